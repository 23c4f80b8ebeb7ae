#include "mlcd/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mlcd/parallel.hpp"

namespace mlcd {

namespace {

// Keeps the margin derivative finite when a positive sits on its center.
constexpr double kMinSinTheta = 1e-6;

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct Split {
    std::vector<double> pos;  // scores of positive entries
    std::vector<double> neg;
    std::vector<std::size_t> pos_idx;
    std::vector<std::size_t> neg_idx;
};

Split split_scores(std::span<const double> scores, std::span<const std::uint8_t> mask) {
    if (scores.size() != mask.size()) throw Error(ErrorCode::DimensionMismatch, "scores and mask differ in length");
    Split s;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (mask[i]) {
            s.pos.push_back(scores[i]);
            s.pos_idx.push_back(i);
        } else {
            s.neg.push_back(scores[i]);
            s.neg_idx.push_back(i);
        }
    }
    return s;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

std::vector<double> negated(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = -v[i];
    return out;
}

}  // namespace

LossVariant parse_loss_variant(std::string_view name) {
    if (name == "CD" || name == "cd") return LossVariant::CD;
    if (name == "MLC" || name == "mlc") return LossVariant::MLC;
    if (name == "MLCD" || name == "mlcd") return LossVariant::MLCD;
    throw Error(ErrorCode::InvalidArgument, "unknown loss variant '" + std::string(name) + "'");
}

std::string_view to_string(LossVariant v) {
    switch (v) {
        case LossVariant::CD: return "CD";
        case LossVariant::MLC: return "MLC";
        case LossVariant::MLCD: return "MLCD";
    }
    return "?";
}

void LossConfig::validate() const {
    if (!(margin >= 0.0 && margin <= 0.5)) throw Error(ErrorCode::InvalidArgument, "margin must lie in [0, 0.5]");
    if (!(scale > 0.0 && scale <= 256.0)) throw Error(ErrorCode::InvalidArgument, "scale must lie in (0, 256]");
    if (!(ratio > 0.0 && ratio <= 1.0)) throw Error(ErrorCode::BadRatio, "sampling ratio must lie in (0, 1]");
}

double log_sum_exp(std::span<const double> x) {
    if (x.empty()) return -std::numeric_limits<double>::infinity();
    const double mx = *std::max_element(x.begin(), x.end());
    if (!std::isfinite(mx)) return mx;
    double acc = 0.0;
    for (double v : x) acc += std::exp(v - mx);
    return mx + std::log(acc);
}

double softplus(double x) {
    if (x > 0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double margin_cosine(double s, double m) {
    s = std::clamp(s, -1.0, 1.0);
    if (m == 0.0) return s;
    if (s > std::cos(std::numbers::pi - m)) {
        const double sin_theta = std::sqrt(std::max(0.0, 1.0 - s * s));
        return s * std::cos(m) - sin_theta * std::sin(m);
    }
    return s - m * std::sin(m);
}

double margin_cosine_derivative(double s, double m) {
    s = std::clamp(s, -1.0, 1.0);
    if (m == 0.0) return 1.0;
    if (s > std::cos(std::numbers::pi - m)) {
        const double sin_theta = std::max(kMinSinTheta, std::sqrt(std::max(0.0, 1.0 - s * s)));
        return std::cos(m) + s * std::sin(m) / sin_theta;
    }
    return 1.0;
}

ScoreMatrix apply_margin(const ScoreMatrix& scores, const Matrix<std::uint8_t>& positive_mask, double m) {
    if (scores.rows() != positive_mask.rows() || scores.cols() != positive_mask.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "scores and mask differ in shape");
    }
    if (!(m >= 0.0)) throw Error(ErrorCode::InvalidArgument, "margin must be non-negative");
    ScoreMatrix out = scores;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (positive_mask.data()[i]) out.data()[i] = static_cast<float>(margin_cosine(scores.data()[i], m));
    }
    return out;
}

LossOutput loss_cd(std::span<const double> scores, std::size_t label) {
    if (label >= scores.size()) {
        throw Error(ErrorCode::BadLabel, "label " + std::to_string(label) + " >= class count " + std::to_string(scores.size()));
    }
    std::vector<double> others;
    others.reserve(scores.size() - 1);
    for (std::size_t j = 0; j < scores.size(); ++j)
        if (j != label) others.push_back(scores[j]);

    LossOutput out;
    out.value = softplus(log_sum_exp(others) - scores[label]);
    const double lse = log_sum_exp(scores);
    out.grad_scores.resize(scores.size());
    for (std::size_t j = 0; j < scores.size(); ++j) out.grad_scores[j] = std::exp(scores[j] - lse);
    out.grad_scores[label] -= 1.0;
    out.mean_si = scores[label];
    out.mean_sj = mean_of(others);
    return out;
}

LossOutput loss_mlc(std::span<const double> scores, std::span<const std::uint8_t> positive_mask) {
    const Split s = split_scores(scores, positive_mask);
    if (s.pos.empty()) throw Error(ErrorCode::EmptyPositives, "MLC needs at least one positive class");
    if (s.neg.empty()) throw Error(ErrorCode::EmptyNegatives, "MLC needs at least one negative class");

    const std::vector<double> neg_pos = negated(s.pos);
    const double lse_neg = log_sum_exp(s.neg);
    const double lse_pos = log_sum_exp(neg_pos);
    const double t = lse_neg + lse_pos;

    LossOutput out;
    out.value = softplus(t);
    const double w = sigmoid(t);
    out.grad_scores.assign(scores.size(), 0.0);
    for (std::size_t a = 0; a < s.neg.size(); ++a) out.grad_scores[s.neg_idx[a]] = w * std::exp(s.neg[a] - lse_neg);
    for (std::size_t a = 0; a < s.pos.size(); ++a) out.grad_scores[s.pos_idx[a]] = -w * std::exp(neg_pos[a] - lse_pos);
    out.mean_si = mean_of(s.pos);
    out.mean_sj = mean_of(s.neg);
    return out;
}

LossOutput loss_mlcd(std::span<const double> scores, std::span<const std::uint8_t> positive_mask) {
    const Split s = split_scores(scores, positive_mask);
    if (s.pos.empty()) throw Error(ErrorCode::EmptyPositives, "MLCD needs at least one positive class");

    const std::vector<double> neg_pos = negated(s.pos);
    const double lse_pos = log_sum_exp(neg_pos);
    LossOutput out;
    out.value = softplus(lse_pos);
    out.grad_scores.assign(scores.size(), 0.0);
    const double wp = sigmoid(lse_pos);
    for (std::size_t a = 0; a < s.pos.size(); ++a) out.grad_scores[s.pos_idx[a]] = -wp * std::exp(neg_pos[a] - lse_pos);
    if (!s.neg.empty()) {
        const double lse_neg = log_sum_exp(s.neg);
        out.value += softplus(lse_neg);
        const double wn = sigmoid(lse_neg);
        for (std::size_t a = 0; a < s.neg.size(); ++a) out.grad_scores[s.neg_idx[a]] = wn * std::exp(s.neg[a] - lse_neg);
    }
    out.mean_si = mean_of(s.pos);
    out.mean_sj = mean_of(s.neg);
    return out;
}

BatchLoss loss_on_cosines(const MatrixD& cosines, const ActivePositives& positives, const LossConfig& config) {
    config.validate();
    const std::size_t b = cosines.rows();
    const std::size_t c = cosines.cols();
    if (positives.size() != b) throw Error(ErrorCode::DimensionMismatch, "one positive list per batch row required");
    if (b == 0) throw Error(ErrorCode::InvalidArgument, "empty batch");

    BatchLoss out;
    out.grad_scores = MatrixD(b, c, 0.0);
    out.per_sample.assign(b, 0.0);
    std::vector<double> si_sum(b, 0.0), sj_sum(b, 0.0);
    std::vector<std::size_t> si_n(b, 0), sj_n(b, 0);

    parallel_for(b, [&](std::size_t r) {
        const auto& pos = positives[r];
        if (pos.empty()) throw Error(ErrorCode::EmptyPositives, "batch row " + std::to_string(r) + " has no positives");
        std::vector<std::uint8_t> stat_mask(c, 0);
        for (std::uint32_t col : pos) {
            if (col >= c) throw Error(ErrorCode::BadLabel, "positive column out of range");
            stat_mask[col] = 1;
        }
        // Only the CD target gets the margin; multi-label variants margin every positive.
        std::vector<std::uint8_t> margin_mask(c, 0);
        if (config.variant == LossVariant::CD) {
            margin_mask[pos.front()] = 1;
        } else {
            margin_mask = stat_mask;
        }

        const auto raw = cosines.row(r);
        std::vector<double> logits(c), chain(c);
        for (std::size_t j = 0; j < c; ++j) {
            if (stat_mask[j]) {
                si_sum[r] += raw[j];
                ++si_n[r];
            } else {
                sj_sum[r] += raw[j];
                ++sj_n[r];
            }
            if (margin_mask[j]) {
                logits[j] = config.scale * margin_cosine(raw[j], config.margin);
                chain[j] = config.scale * margin_cosine_derivative(raw[j], config.margin);
            } else {
                logits[j] = config.scale * raw[j];
                chain[j] = config.scale;
            }
        }

        LossOutput row;
        switch (config.variant) {
            case LossVariant::CD: row = loss_cd(logits, pos.front()); break;
            case LossVariant::MLC: row = loss_mlc(logits, stat_mask); break;
            case LossVariant::MLCD: row = loss_mlcd(logits, stat_mask); break;
        }
        out.per_sample[r] = row.value;
        auto g = out.grad_scores.row(r);
        for (std::size_t j = 0; j < c; ++j) g[j] = row.grad_scores[j] * chain[j] / static_cast<double>(b);
    });

    double total = 0.0, si = 0.0, sj = 0.0;
    std::size_t ni = 0, nj = 0;
    for (std::size_t r = 0; r < b; ++r) {
        total += out.per_sample[r];
        si += si_sum[r];
        sj += sj_sum[r];
        ni += si_n[r];
        nj += sj_n[r];
    }
    out.value = total / static_cast<double>(b);
    out.mean_si = ni ? si / static_cast<double>(ni) : 0.0;
    out.mean_sj = nj ? sj / static_cast<double>(nj) : 0.0;
    return out;
}

BatchLoss loss_forward_backward(const MatrixD& E, const MatrixD& W, const ActivePositives& positives,
                                const LossConfig& config) {
    if (E.cols() != W.cols()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "embedding width " + std::to_string(E.cols()) + " vs center width " + std::to_string(W.cols()));
    }
    const std::size_t b = E.rows(), c = W.rows(), d = E.cols();
    MatrixD cosines(b, c);
    parallel_for(b, [&](std::size_t r) {
        for (std::size_t j = 0; j < c; ++j) cosines(r, j) = dot(E.row(r), W.row(j));
    });

    BatchLoss out = loss_on_cosines(cosines, positives, config);
    const MatrixD& G = out.grad_scores;

    out.grad_E = MatrixD(b, d, 0.0);
    parallel_for(b, [&](std::size_t r) {
        auto ge = out.grad_E.row(r);
        for (std::size_t j = 0; j < c; ++j) {
            const double g = G(r, j);
            if (g == 0.0) continue;
            const auto w = W.row(j);
            for (std::size_t t = 0; t < d; ++t) ge[t] += g * w[t];
        }
    });
    // Per-class reduction over batch rows in index order.
    out.grad_W = MatrixD(c, d, 0.0);
    parallel_for(c, [&](std::size_t j) {
        auto gw = out.grad_W.row(j);
        for (std::size_t r = 0; r < b; ++r) {
            const double g = G(r, j);
            if (g == 0.0) continue;
            const auto e = E.row(r);
            for (std::size_t t = 0; t < d; ++t) gw[t] += g * e[t];
        }
    });
    return out;
}

BatchLoss loss_forward_backward(const FeatureMatrix& E, const FeatureMatrix& W, const ActivePositives& positives,
                                const LossConfig& config) {
    return loss_forward_backward(E.to_double(), W.to_double(), positives, config);
}

}  // namespace mlcd
