#include "mlcd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <set>

#include "mlcd/fmat.hpp"
#include "mlcd/parallel.hpp"
#include "mlcd/sampler.hpp"

namespace mlcd {

namespace {

bool all_finite(const MatrixD& m) {
    return std::all_of(m.data().begin(), m.data().end(), [](double v) { return std::isfinite(v); });
}

double frobenius(const MatrixD& m) {
    double acc = 0.0;
    for (double v : m.data()) acc += v * v;
    return std::sqrt(acc);
}

MatrixD random_unit_rows(std::size_t rows, std::size_t cols, Rng rng) {
    MatrixD m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double norm = 0.0;
        while (norm < 1e-6) {
            for (auto& v : m.row(r)) v = rng.normal();
            norm = l2_norm(std::span<const double>(m.row(r)));
        }
        for (auto& v : m.row(r)) v /= norm;
    }
    return m;
}

struct OptimizerStep {
    const TrainConfig& config;
    double lr;
    std::size_t t;  // 1-based step for bias correction

    void apply(std::span<double> param, std::span<const double> grad, std::span<double> m1, std::span<double> m2,
               double weight_decay) const {
        if (config.optimizer == OptimizerKind::AdamW) {
            const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
            const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
            for (std::size_t i = 0; i < param.size(); ++i) {
                m1[i] = config.beta1 * m1[i] + (1.0 - config.beta1) * grad[i];
                m2[i] = config.beta2 * m2[i] + (1.0 - config.beta2) * grad[i] * grad[i];
                const double step = (m1[i] / c1) / (std::sqrt(m2[i] / c2) + config.eps);
                param[i] -= lr * weight_decay * param[i] + lr * step;
            }
        } else {
            for (std::size_t i = 0; i < param.size(); ++i) {
                m1[i] = config.momentum * m1[i] + grad[i];
                param[i] -= lr * weight_decay * param[i] + lr * m1[i];
            }
        }
    }
};

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::AdamW ? "adamw" : "sgd_momentum"; }

}  // namespace

void TrainConfig::validate() const {
    loss.validate();
    if (batch_size < 2) throw Error(ErrorCode::InvalidArgument, "batch_size must be at least 2");
    if (steps < 1) throw Error(ErrorCode::InvalidArgument, "steps must be at least 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw Error(ErrorCode::InvalidArgument, "learning_rate must be finite and non-negative");
    }
    if (!(weight_decay >= 0.0)) throw Error(ErrorCode::InvalidArgument, "weight_decay must be non-negative");
    if (log_interval < 1) throw Error(ErrorCode::InvalidArgument, "log_interval must be at least 1");
    if (monitor_size < 1) throw Error(ErrorCode::InvalidArgument, "monitor_size must be at least 1");
}

const std::vector<std::string>& required_config_keys() {
    static const std::vector<std::string> keys = {"variant", "k", "steps", "batch_size", "learning_rate", "seed"};
    return keys;
}

ParsedConfig parse_train_config(const KeyValues& kv) {
    static const std::set<std::string> known = {
        "variant",    "margin",      "scale",        "ratio",        "batch_size",   "steps",       "learning_rate",
        "weight_decay", "optimizer", "momentum",     "beta1",        "beta2",        "eps",         "warmup_steps",
        "log_interval", "embed_dim", "center_init",  "encoder_init", "monitor_size", "seed",        "k",
        "l"};
    for (const auto& [key, value] : kv) {
        if (!known.contains(key)) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
    }
    for (const auto& key : required_config_keys()) require_key(kv, key);

    ParsedConfig out;
    TrainConfig& c = out.train;
    auto get = [&](const char* key) -> const std::string* {
        const auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    c.loss.variant = parse_loss_variant(*get("variant"));
    if (auto v = get("margin")) c.loss.margin = parse_double("margin", *v);
    if (auto v = get("scale")) c.loss.scale = parse_double("scale", *v);
    if (auto v = get("ratio")) c.loss.ratio = parse_double("ratio", *v);
    c.batch_size = parse_u64("batch_size", *get("batch_size"));
    c.steps = parse_u64("steps", *get("steps"));
    c.learning_rate = parse_double("learning_rate", *get("learning_rate"));
    c.seed = parse_u64("seed", *get("seed"));
    if (auto v = get("weight_decay")) c.weight_decay = parse_double("weight_decay", *v);
    if (auto v = get("optimizer")) {
        if (*v == "adamw") {
            c.optimizer = OptimizerKind::AdamW;
        } else if (*v == "sgd_momentum") {
            c.optimizer = OptimizerKind::SgdMomentum;
        } else {
            throw Error(ErrorCode::InvalidArgument, "optimizer must be adamw or sgd_momentum");
        }
    }
    if (auto v = get("momentum")) c.momentum = parse_double("momentum", *v);
    if (auto v = get("beta1")) c.beta1 = parse_double("beta1", *v);
    if (auto v = get("beta2")) c.beta2 = parse_double("beta2", *v);
    if (auto v = get("eps")) c.eps = parse_double("eps", *v);
    if (auto v = get("warmup_steps")) c.warmup_steps = parse_u64("warmup_steps", *v);
    if (auto v = get("log_interval")) c.log_interval = parse_u64("log_interval", *v);
    if (auto v = get("embed_dim")) c.embed_dim = parse_u64("embed_dim", *v);
    if (auto v = get("monitor_size")) c.monitor_size = parse_u64("monitor_size", *v);
    if (auto v = get("center_init")) {
        if (*v == "warm") {
            c.center_init = CenterInit::Warm;
        } else if (*v == "random") {
            c.center_init = CenterInit::Random;
        } else {
            throw Error(ErrorCode::InvalidArgument, "center_init must be warm or random");
        }
    }
    if (auto v = get("encoder_init")) {
        if (*v == "identity") {
            c.encoder_init = EncoderInit::Identity;
        } else if (*v == "random") {
            c.encoder_init = EncoderInit::Random;
        } else {
            throw Error(ErrorCode::InvalidArgument, "encoder_init must be identity or random");
        }
    }
    out.k = parse_u64("k", *get("k"));
    if (auto v = get("l")) out.l = parse_u64("l", *v);
    c.validate();
    if (c.learning_rate <= 0.0) throw Error(ErrorCode::InvalidArgument, "learning_rate must be positive");
    return out;
}

KeyValues to_key_values(const TrainConfig& c, std::size_t k, std::size_t l) {
    return {
        {"variant", std::string(to_string(c.loss.variant))},
        {"margin", format_double(c.loss.margin)},
        {"scale", format_double(c.loss.scale)},
        {"ratio", format_double(c.loss.ratio)},
        {"batch_size", std::to_string(c.batch_size)},
        {"steps", std::to_string(c.steps)},
        {"learning_rate", format_double(c.learning_rate)},
        {"weight_decay", format_double(c.weight_decay)},
        {"optimizer", optimizer_name(c.optimizer)},
        {"momentum", format_double(c.momentum)},
        {"beta1", format_double(c.beta1)},
        {"beta2", format_double(c.beta2)},
        {"eps", format_double(c.eps)},
        {"warmup_steps", std::to_string(c.warmup_steps)},
        {"log_interval", std::to_string(c.log_interval)},
        {"embed_dim", std::to_string(c.embed_dim)},
        {"center_init", c.center_init == CenterInit::Warm ? "warm" : "random"},
        {"encoder_init", c.encoder_init == EncoderInit::Identity ? "identity" : "random"},
        {"monitor_size", std::to_string(c.monitor_size)},
        {"seed", std::to_string(c.seed)},
        {"k", std::to_string(k)},
        {"l", std::to_string(l)},
    };
}

TrainState init_state(const TrainConfig& config, std::size_t input_dim, std::size_t k, const CentroidSet* warm_centers) {
    if (input_dim == 0 || k == 0) throw Error(ErrorCode::InvalidArgument, "input width and class count must be positive");
    const std::size_t emb = config.embed_dim == 0 ? input_dim : config.embed_dim;
    TrainState s;
    if (config.encoder_init == EncoderInit::Identity) {
        s.encoder = MatrixD(input_dim, emb, 0.0);
        for (std::size_t i = 0; i < std::min(input_dim, emb); ++i) s.encoder(i, i) = 1.0;
    } else {
        Rng rng = Rng::stream(config.seed, 3);
        s.encoder = MatrixD(input_dim, emb);
        const double sd = 1.0 / std::sqrt(static_cast<double>(input_dim));
        for (auto& v : s.encoder.data()) v = sd * rng.normal();
    }
    if (config.center_init == CenterInit::Warm) {
        if (warm_centers == nullptr) throw Error(ErrorCode::InvalidArgument, "warm center init needs a centroid set");
        if (warm_centers->k() != k || warm_centers->dim() != emb) {
            throw Error(ErrorCode::DimensionMismatch,
                        fmt::format("centroid set is {}x{}, trainer expects {}x{}", warm_centers->k(),
                                    warm_centers->dim(), k, emb));
        }
        s.centers = warm_centers->centroids.to_double();
    } else {
        s.centers = random_unit_rows(k, emb, Rng::stream(config.seed, 4));
    }
    s.encoder_m1 = MatrixD(input_dim, emb, 0.0);
    s.encoder_m2 = MatrixD(input_dim, emb, 0.0);
    s.centers_m1 = MatrixD(k, emb, 0.0);
    s.centers_m2 = MatrixD(k, emb, 0.0);
    s.sampler_rng = Rng::stream(config.seed, 1);
    s.shuffle_rng = Rng::stream(config.seed, 2);
    return s;
}

namespace {

// Pre-normalization embeddings z = x^T encoder, one row per requested sample.
MatrixD project(const MatrixD& encoder, const FeatureMatrix& features, std::span<const std::size_t> rows) {
    if (features.cols() != encoder.rows()) {
        throw Error(ErrorCode::DimensionMismatch,
                    fmt::format("features have width {}, encoder expects {}", features.cols(), encoder.rows()));
    }
    const std::size_t emb = encoder.cols();
    MatrixD z(rows.size(), emb, 0.0);
    parallel_for(rows.size(), [&](std::size_t r) {
        const auto x = features.row(rows[r]);
        auto out = z.row(r);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double xi = x[i];
            const auto w = encoder.row(i);
            for (std::size_t j = 0; j < emb; ++j) out[j] += xi * w[j];
        }
    });
    return z;
}

MatrixD normalize_rows(const MatrixD& z) {
    MatrixD e(z.rows(), z.cols());
    for (std::size_t r = 0; r < z.rows(); ++r) {
        const auto unit = l2_normalize(std::span<const double>(z.row(r)));
        std::copy(unit.begin(), unit.end(), e.row(r).begin());
    }
    return e;
}

std::vector<std::size_t> iota_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

}  // namespace

MatrixD encode(const MatrixD& encoder, const FeatureMatrix& features, std::span<const std::size_t> rows) {
    return normalize_rows(project(encoder, features, rows));
}

FeatureMatrix embed(const MatrixD& encoder, const FeatureMatrix& features) {
    const auto rows = iota_rows(features.rows());
    return FeatureMatrix::normalized_rows(project(encoder, features, rows));
}

StepMetrics train_step(TrainState& state, const FeatureMatrix& features, const LabelAssignment& labels,
                       std::span<const std::size_t> batch, const TrainConfig& config) {
    config.validate();
    if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
    if (labels.size() != features.rows()) throw Error(ErrorCode::DimensionMismatch, "labels and features differ in length");
    const std::size_t k = state.centers.rows();
    if (labels.k != k) throw Error(ErrorCode::DimensionMismatch, fmt::format("labels have k={}, state has {}", labels.k, k));

    const MatrixD z = project(state.encoder, features, batch);
    if (!all_finite(z) || !all_finite(state.centers)) {
        throw Error(ErrorCode::NonFiniteLoss, fmt::format("parameters diverged before step {}", state.step + 1));
    }
    for (std::size_t r = 0; r < z.rows(); ++r) {
        const double n = l2_norm(std::span<const double>(z.row(r)));
        if (!std::isfinite(n)) {
            throw Error(ErrorCode::NonFiniteLoss,
                        fmt::format("embedding norm {} for batch row {} at step {}", n, r, state.step + 1));
        }
    }
    const MatrixD E = normalize_rows(z);

    const auto batch_pos = batch_positive_union(labels, batch);
    const SampledClassSet active = sample_classes(k, batch_pos, config.loss.ratio, state.sampler_rng);
    MatrixD W(active.size(), state.centers.cols());
    for (std::size_t a = 0; a < active.size(); ++a) {
        const auto src = state.centers.row(active.class_ids[a]);
        std::copy(src.begin(), src.end(), W.row(a).begin());
    }
    const ActivePositives positives = map_positives(active, labels, batch);
    const BatchLoss loss = loss_forward_backward(E, W, positives, config.loss);

    if (!std::isfinite(loss.value) || !all_finite(loss.grad_E) || !all_finite(loss.grad_W)) {
        throw Error(ErrorCode::NonFiniteLoss, fmt::format("non-finite loss or gradient at step {}", state.step + 1));
    }

    // Chain through the normalization and the linear map.
    const std::size_t d_in = state.encoder.rows();
    const std::size_t emb = state.encoder.cols();
    MatrixD gz(batch.size(), emb);
    for (std::size_t r = 0; r < batch.size(); ++r) {
        const auto g = normalize_backward(z.row(r), loss.grad_E.row(r));
        std::copy(g.begin(), g.end(), gz.row(r).begin());
    }
    MatrixD grad_encoder(d_in, emb, 0.0);
    parallel_for(d_in, [&](std::size_t i) {
        auto out = grad_encoder.row(i);
        for (std::size_t r = 0; r < batch.size(); ++r) {
            const double xi = features(batch[r], i);
            const auto g = gz.row(r);
            for (std::size_t j = 0; j < emb; ++j) out[j] += xi * g[j];
        }
    });
    if (!all_finite(grad_encoder)) {
        throw Error(ErrorCode::NonFiniteLoss, fmt::format("non-finite encoder gradient at step {}", state.step + 1));
    }

    const std::size_t t = state.step + 1;
    double lr = config.learning_rate;
    if (config.warmup_steps > 0 && t < config.warmup_steps) {
        lr *= static_cast<double>(t) / static_cast<double>(config.warmup_steps);
    }
    const OptimizerStep opt{config, lr, t};
    opt.apply(state.encoder.data(), grad_encoder.data(), state.encoder_m1.data(), state.encoder_m2.data(),
              config.weight_decay);
    for (std::size_t a = 0; a < active.size(); ++a) {
        const std::uint32_t c = active.class_ids[a];
        auto row = state.centers.row(c);
        const std::vector<double> before(row.begin(), row.end());
        opt.apply(row, loss.grad_W.row(a), state.centers_m1.row(c), state.centers_m2.row(c), 0.0);
        if (!std::equal(before.begin(), before.end(), row.begin())) {
            const auto unit = l2_normalize(std::span<const double>(row));
            std::copy(unit.begin(), unit.end(), row.begin());
        }
    }
    state.step = t;

    StepMetrics m;
    m.loss = loss.value;
    m.mean_si = loss.mean_si;
    m.mean_sj = loss.mean_sj;
    m.grad_norm_encoder = frobenius(grad_encoder);
    m.grad_norm_centers = frobenius(loss.grad_W);
    m.active_classes = active.size();
    return m;
}

MetricRecord evaluate_monitor(const TrainState& state, const FeatureMatrix& features, const LabelAssignment& labels,
                              const TrainConfig& config) {
    const std::size_t n = std::min(config.monitor_size, features.rows());
    const auto rows = iota_rows(n);
    const MatrixD E = encode(state.encoder, features, rows);
    ActivePositives positives(n);
    for (std::size_t i = 0; i < n; ++i) positives[i] = labels[i];
    LossConfig full = config.loss;
    full.ratio = 1.0;
    const BatchLoss loss = loss_forward_backward(E, state.centers, positives, full);
    MetricRecord rec;
    rec.step = state.step;
    rec.loss = loss.value;
    rec.mean_si = loss.mean_si;
    rec.mean_sj = loss.mean_sj;
    return rec;
}

std::string MetricHistory::to_csv() const {
    std::string out = "step,loss,mean_si,mean_sj,grad_norm_encoder,grad_norm_centers\n";
    for (const auto& r : records) {
        out += fmt::format("{},{},{},{},{},{}\n", r.step, r.loss, r.mean_si, r.mean_sj, r.grad_norm_encoder,
                           r.grad_norm_centers);
    }
    return out;
}

TrainResult train(const FeatureMatrix& features, const LabelAssignment& labels, const TrainConfig& config,
                  const CentroidSet* warm_centers) {
    config.validate();
    const std::size_t n = features.rows();
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty dataset");
    if (labels.size() != n) throw Error(ErrorCode::DimensionMismatch, "labels and features differ in length");

    TrainResult result;
    result.state = init_state(config, features.cols(), labels.k, warm_centers);
    TrainState& state = result.state;
    result.history.records.push_back(evaluate_monitor(state, features, labels, config));

    const std::size_t batch_size = std::min(config.batch_size, n);
    std::vector<std::size_t> order = iota_rows(n);
    std::size_t cursor = n;  // forces a shuffle before the first batch
    for (std::size_t s = 1; s <= config.steps; ++s) {
        if (cursor + batch_size > n) {
            for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[state.shuffle_rng.uniform_below(i + 1)]);
            cursor = 0;
        }
        const std::span<const std::size_t> batch(order.data() + cursor, batch_size);
        cursor += batch_size;
        const StepMetrics m = train_step(state, features, labels, batch, config);
        if (s % config.log_interval == 0 || s == config.steps) {
            MetricRecord rec = evaluate_monitor(state, features, labels, config);
            rec.grad_norm_encoder = m.grad_norm_encoder;
            rec.grad_norm_centers = m.grad_norm_centers;
            result.history.records.push_back(rec);
        }
    }
    return result;
}

void save_checkpoint(const std::filesystem::path& dir, const TrainState& state, const TrainConfig& config,
                     std::size_t l) {
    std::filesystem::create_directories(dir);
    auto to_float = [](const MatrixD& m) {
        return Matrix<float>(m.rows(), m.cols(), std::vector<float>(m.data().begin(), m.data().end()));
    };
    write_fmat(dir / "encoder.fmat", FeatureMatrix(to_float(state.encoder), false));
    write_fmat(dir / "centers.fmat", FeatureMatrix::normalized_rows(state.centers));
    KeyValues manifest = {
        {"step", std::to_string(state.step)},
        {"seed", std::to_string(config.seed)},
        {"variant", std::string(to_string(config.loss.variant))},
        {"margin", format_double(config.loss.margin)},
        {"scale", format_double(config.loss.scale)},
        {"ratio", format_double(config.loss.ratio)},
        {"l", std::to_string(l)},
        {"k", std::to_string(state.centers.rows())},
        {"input_dim", std::to_string(state.encoder.rows())},
        {"embed_dim", std::to_string(state.encoder.cols())},
    };
    write_key_values(dir / "checkpoint.txt", manifest);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    Checkpoint ck;
    ck.manifest = read_key_values(dir / "checkpoint.txt");
    ck.encoder = read_fmat(dir / "encoder.fmat").to_double();
    const FeatureMatrix centers = read_fmat(dir / "centers.fmat");
    if (!centers.normalized()) throw Error(ErrorCode::Format, (dir / "centers.fmat").string() + ": centers must be normalized");
    ck.centers = centers.to_double();
    if (ck.encoder.cols() != ck.centers.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "checkpoint encoder and centers disagree on embedding width");
    }
    return ck;
}

}  // namespace mlcd
