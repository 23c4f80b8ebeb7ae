#include "mlcd/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <string>

#include "mlcd/fmat.hpp"
#include "mlcd/parallel.hpp"

namespace mlcd {

namespace {

void check_pair(const FeatureMatrix& a, std::span<const std::uint32_t> la, const char* what) {
    if (a.rows() != la.size()) {
        throw Error(ErrorCode::DimensionMismatch, fmt::format("{}: {} rows but {} labels", what, a.rows(), la.size()));
    }
}

double accuracy(std::span<const std::uint8_t> hits) {
    if (hits.empty()) return 0.0;
    std::size_t ok = 0;
    for (auto h : hits) ok += h;
    return static_cast<double>(ok) / static_cast<double>(hits.size());
}

}  // namespace

double knn_eval(const FeatureMatrix& train_E, std::span<const std::uint32_t> train_labels, const FeatureMatrix& test_E,
                std::span<const std::uint32_t> test_labels, std::size_t k_neighbors) {
    check_pair(train_E, train_labels, "knn train");
    check_pair(test_E, test_labels, "knn test");
    if (train_E.cols() != test_E.cols()) {
        throw Error(ErrorCode::DimensionMismatch,
                    fmt::format("train width {} vs test width {}", train_E.cols(), test_E.cols()));
    }
    if (k_neighbors < 1) throw Error(ErrorCode::InvalidArgument, "k_neighbors must be at least 1");
    if (train_E.rows() == 0) throw Error(ErrorCode::InvalidArgument, "empty training set");
    const std::size_t kk = std::min(k_neighbors, train_E.rows());

    std::vector<std::uint8_t> hits(test_E.rows(), 0);
    parallel_for(test_E.rows(), [&](std::size_t q) {
        std::vector<double> sims(train_E.rows());
        for (std::size_t i = 0; i < train_E.rows(); ++i) sims[i] = dot(test_E.row(q), train_E.row(i));
        std::vector<std::size_t> idx(train_E.rows());
        std::iota(idx.begin(), idx.end(), 0);
        std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk), idx.end(),
                          [&](std::size_t a, std::size_t b) { return sims[a] > sims[b] || (sims[a] == sims[b] && a < b); });

        struct Vote {
            std::uint32_t label;
            std::size_t count;
            double distance;
        };
        std::vector<Vote> votes;
        for (std::size_t t = 0; t < kk; ++t) {
            const std::uint32_t y = train_labels[idx[t]];
            auto it = std::find_if(votes.begin(), votes.end(), [y](const Vote& v) { return v.label == y; });
            if (it == votes.end()) {
                votes.push_back({y, 0, 0.0});
                it = votes.end() - 1;
            }
            ++it->count;
            it->distance += 1.0 - sims[idx[t]];
        }
        const Vote best = *std::min_element(votes.begin(), votes.end(), [](const Vote& a, const Vote& b) {
            if (a.count != b.count) return a.count > b.count;
            if (a.distance != b.distance) return a.distance < b.distance;
            return a.label < b.label;
        });
        hits[q] = best.label == test_labels[q];
    });
    return accuracy(hits);
}

ProbeResult linear_probe(const FeatureMatrix& train_E, std::span<const std::uint32_t> train_labels,
                         const FeatureMatrix& test_E, std::span<const std::uint32_t> test_labels,
                         const ProbeOptions& options) {
    check_pair(train_E, train_labels, "probe train");
    check_pair(test_E, test_labels, "probe test");
    if (train_E.cols() != test_E.cols()) {
        throw Error(ErrorCode::DimensionMismatch,
                    fmt::format("train width {} vs test width {}", train_E.cols(), test_E.cols()));
    }
    std::vector<std::uint32_t> distinct(train_labels.begin(), train_labels.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) throw Error(ErrorCode::DegenerateLabels, "linear probe needs at least two classes");

    std::uint32_t max_label = distinct.back();
    for (auto y : test_labels) max_label = std::max(max_label, y);
    const std::size_t C = max_label + 1;
    const std::size_t d = train_E.cols();
    const std::size_t n = train_E.rows();

    MatrixD W(C, d + 1, 0.0);  // last column is the bias
    auto logits_of = [&](std::span<const float> x, std::vector<double>& out) {
        for (std::size_t c = 0; c < C; ++c) {
            const auto w = W.row(c);
            double z = w[d];
            for (std::size_t t = 0; t < d; ++t) z += w[t] * x[t];
            out[c] = z;
        }
    };

    MatrixD per_sample(n, C);
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        parallel_for(n, [&](std::size_t i) {
            std::vector<double> z(C);
            logits_of(train_E.row(i), z);
            const double mx = *std::max_element(z.begin(), z.end());
            double s = 0.0;
            for (auto& v : z) s += (v = std::exp(v - mx));
            auto g = per_sample.row(i);
            for (std::size_t c = 0; c < C; ++c) g[c] = z[c] / s;
            g[train_labels[i]] -= 1.0;
        });
        MatrixD grad(C, d + 1, 0.0);
        parallel_for(C, [&](std::size_t c) {
            auto gr = grad.row(c);
            for (std::size_t i = 0; i < n; ++i) {
                const double g = per_sample(i, c);
                const auto x = train_E.row(i);
                for (std::size_t t = 0; t < d; ++t) gr[t] += g * x[t];
                gr[d] += g;
            }
        });
        const double step = options.learning_rate / static_cast<double>(n);
        for (std::size_t i = 0; i < W.size(); ++i) W.data()[i] -= step * grad.data()[i];
    }

    auto evaluate = [&](const FeatureMatrix& E, std::span<const std::uint32_t> labels) {
        std::vector<std::uint8_t> hits(E.rows(), 0);
        parallel_for(E.rows(), [&](std::size_t i) {
            std::vector<double> z(C);
            logits_of(E.row(i), z);
            const auto best = static_cast<std::uint32_t>(std::max_element(z.begin(), z.end()) - z.begin());
            hits[i] = best == labels[i];
        });
        return accuracy(hits);
    };
    return ProbeResult{evaluate(train_E, train_labels), evaluate(test_E, test_labels)};
}

std::size_t histogram_bin(double cosine) {
    const double u = (std::clamp(cosine, -1.0, 1.0) + 1.0) / 2.0;
    return std::min(kHistogramBins - 1, static_cast<std::size_t>(u * static_cast<double>(kHistogramBins)));
}

SimilarityStats similarity_stats(const FeatureMatrix& E, const FeatureMatrix& centers, const LabelAssignment& assignment) {
    if (E.cols() != centers.cols()) {
        throw Error(ErrorCode::DimensionMismatch,
                    fmt::format("embedding width {} vs center width {}", E.cols(), centers.cols()));
    }
    if (assignment.size() != E.rows()) {
        throw Error(ErrorCode::DimensionMismatch,
                    fmt::format("{} embeddings but {} label lists", E.rows(), assignment.size()));
    }
    if (assignment.k != centers.rows()) {
        throw Error(ErrorCode::DimensionMismatch, fmt::format("labels have k={}, {} centers", assignment.k, centers.rows()));
    }
    const std::size_t k = centers.rows();
    struct Partial {
        double pos_sum = 0.0, neg_sum = 0.0;
        std::uint64_t pos_n = 0, neg_n = 0;
        std::vector<std::size_t> pos_bins, neg_bins;
    };
    std::vector<Partial> partial(E.rows());
    parallel_for(E.rows(), [&](std::size_t i) {
        std::vector<std::uint8_t> is_pos(k, 0);
        for (auto c : assignment[i]) is_pos.at(c) = 1;
        Partial& p = partial[i];
        for (std::size_t j = 0; j < k; ++j) {
            const double s = dot(E.row(i), centers.row(j));
            if (is_pos[j]) {
                p.pos_sum += s;
                ++p.pos_n;
                p.pos_bins.push_back(histogram_bin(s));
            } else {
                p.neg_sum += s;
                ++p.neg_n;
                p.neg_bins.push_back(histogram_bin(s));
            }
        }
    });
    SimilarityStats out;
    double pos = 0.0, neg = 0.0;
    for (const auto& p : partial) {
        pos += p.pos_sum;
        neg += p.neg_sum;
        out.positive_pairs += p.pos_n;
        out.negative_pairs += p.neg_n;
        for (auto b : p.pos_bins) ++out.positive_hist[b];
        for (auto b : p.neg_bins) ++out.negative_hist[b];
    }
    out.mean_si = out.positive_pairs ? pos / static_cast<double>(out.positive_pairs) : 0.0;
    out.mean_sj = out.negative_pairs ? neg / static_cast<double>(out.negative_pairs) : 0.0;
    return out;
}

PcaRgb pca_rgb(const Matrix<float>& features) {
    const std::size_t m = features.rows();
    const std::size_t d = features.cols();
    if (m < 3) throw Error(ErrorCode::InvalidArgument, "pca_rgb needs at least 3 rows");
    if (d == 0) throw Error(ErrorCode::InvalidArgument, "pca_rgb needs at least one column");

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < d; ++t) mean[static_cast<Eigen::Index>(t)] += features(i, t);
    mean /= static_cast<double>(m);

    Eigen::MatrixXd X(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < d; ++t) {
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
                features(i, t) - mean[static_cast<Eigen::Index>(t)];
        }
    const Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(m);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const Eigen::VectorXd& evals = solver.eigenvalues();  // ascending
    const double top = evals[evals.size() - 1];
    const double cutoff = std::max(1e-18, 1e-12 * top);

    PcaRgb out;
    out.rgb.assign(m, {128, 128, 128});
    out.foreground.assign(m, 0);
    const std::size_t want = std::min<std::size_t>(3, d);
    for (std::size_t c = 0; c < want; ++c) {
        const Eigen::Index col = evals.size() - 1 - static_cast<Eigen::Index>(c);
        if (!(evals[col] > cutoff)) break;
        Eigen::VectorXd v = solver.eigenvectors().col(col);
        Eigen::Index arg = 0;
        for (Eigen::Index t = 1; t < v.size(); ++t)
            if (std::abs(v[t]) > std::abs(v[arg])) arg = t;
        if (v[arg] < 0) v = -v;
        out.components[c].assign(v.data(), v.data() + v.size());

        const Eigen::VectorXd scores = X * v;
        const double lo = scores.minCoeff();
        const double hi = scores.maxCoeff();
        for (std::size_t i = 0; i < m; ++i) {
            const double s = scores[static_cast<Eigen::Index>(i)];
            out.rgb[i][c] = hi - lo > 1e-12 ? static_cast<std::uint8_t>(std::lround(255.0 * (s - lo) / (hi - lo))) : 128;
            if (c == 0) out.foreground[i] = s > 0.0;
        }
        ++out.rank;
    }
    return out;
}

KeyValues EvalReport::to_key_values() const {
    KeyValues kv = {
        {"mean_si", format_double(stats.mean_si)},
        {"mean_sj", format_double(stats.mean_sj)},
        {"positive_pairs", std::to_string(stats.positive_pairs)},
        {"negative_pairs", std::to_string(stats.negative_pairs)},
        {"histogram_bins", std::to_string(kHistogramBins)},
    };
    if (has_accuracy) {
        kv["knn_accuracy"] = format_double(knn_accuracy);
        kv["knn_k"] = std::to_string(knn_k);
        kv["probe_accuracy"] = format_double(probe_accuracy);
    }
    return kv;
}

std::string EvalReport::histogram_csv() const {
    std::string out = "bin_low,bin_high,pos_count,neg_count\n";
    const double width = 2.0 / static_cast<double>(kHistogramBins);
    for (std::size_t b = 0; b < kHistogramBins; ++b) {
        out += fmt::format("{},{},{},{}\n", -1.0 + width * static_cast<double>(b),
                           -1.0 + width * static_cast<double>(b + 1), stats.positive_hist[b], stats.negative_hist[b]);
    }
    return out;
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
    write_key_values(path, report.to_key_values());
    write_file_bytes(path.string() + ".hist.csv", report.histogram_csv());
}

}  // namespace mlcd
