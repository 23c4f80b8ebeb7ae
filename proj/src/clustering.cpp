#include "mlcd/clustering.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mlcd/parallel.hpp"
#include "mlcd/rng.hpp"

namespace mlcd {

namespace {

void require_normalized(const FeatureMatrix& features, const char* what) {
    if (!features.normalized()) throw Error(ErrorCode::NotNormalized, std::string(what) + " requires normalized features");
    if (features.rows() == 0 || features.cols() == 0) throw Error(ErrorCode::InvalidArgument, "empty feature matrix");
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

FeatureMatrix gather(const FeatureMatrix& features, const std::vector<std::size_t>& picks) {
    return FeatureMatrix(features.select_rows(picks).values(), true);
}

}  // namespace

InitMethod parse_init_method(std::string_view name) {
    if (name == "random") return InitMethod::Random;
    if (name == "kmeanspp") return InitMethod::KMeansPP;
    throw Error(ErrorCode::InvalidArgument, "unknown init method '" + std::string(name) + "'");
}

std::string_view to_string(InitMethod m) { return m == InitMethod::Random ? "random" : "kmeanspp"; }

CentroidSet kmeans_init(const FeatureMatrix& features, std::size_t k, std::uint64_t seed, InitMethod method) {
    require_normalized(features, "kmeans_init");
    const std::size_t n = features.rows();
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
    if (k > n) throw Error(ErrorCode::TooManyClusters, "k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));

    Rng rng = Rng::stream(seed, 0);
    std::vector<std::size_t> picks;
    picks.reserve(k);

    if (method == InitMethod::Random) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + rng.uniform_below(n - i);
            std::swap(order[i], order[j]);
        }
        picks.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
        std::vector<double> d2(n, 0.0);
        std::vector<bool> taken(n, false);
        picks.push_back(rng.uniform_below(n));
        taken[picks[0]] = true;
        for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(features.row(i), features.row(picks[0]));
        while (picks.size() < k) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) total += taken[i] ? 0.0 : d2[i];
            std::size_t chosen = n;
            if (total > 0.0) {
                const double target = rng.uniform01() * total;
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (taken[i] || d2[i] <= 0.0) continue;
                    acc += d2[i];
                    chosen = i;
                    if (acc > target) break;
                }
            } else {
                // Remaining points coincide with chosen ones: fall back to uniform.
                std::vector<std::size_t> rest;
                for (std::size_t i = 0; i < n; ++i)
                    if (!taken[i]) rest.push_back(i);
                chosen = rest[rng.uniform_below(rest.size())];
            }
            picks.push_back(chosen);
            taken[chosen] = true;
            for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(features.row(i), features.row(chosen)));
        }
    }
    return CentroidSet{gather(features, picks), seed, 0, 0.0};
}

HardAssignment kmeans_assign(const FeatureMatrix& features, const CentroidSet& centroids) {
    require_normalized(features, "kmeans_assign");
    const FeatureMatrix& W = centroids.centroids;
    if (features.cols() != W.cols()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "features have width " + std::to_string(features.cols()) + ", centroids " + std::to_string(W.cols()));
    }
    const std::size_t n = features.rows();
    HardAssignment out;
    out.labels.resize(n);
    std::vector<double> dist(n);
    parallel_for(n, [&](std::size_t i) {
        std::vector<double> sims(W.rows());
        row_similarities(features.row(i), W, sims);
        std::uint32_t best = 0;
        for (std::uint32_t j = 1; j < sims.size(); ++j) {
            if (sims[j] > sims[best]) best = j;
        }
        out.labels[i] = best;
        dist[i] = squared_distance(features.row(i), W.row(best));
    });
    double total = 0.0;
    for (double d : dist) total += d;
    out.objective = total / static_cast<double>(n);
    return out;
}

UpdateResult kmeans_update(const FeatureMatrix& features, const HardAssignment& assignment, std::size_t k) {
    require_normalized(features, "kmeans_update");
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    if (assignment.labels.size() != n) throw Error(ErrorCode::DimensionMismatch, "assignment length differs from sample count");

    // Fixed reduction order: samples in index order per cluster.
    MatrixD sums(k, d, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t c = assignment.labels[i];
        if (c >= k) throw Error(ErrorCode::BadLabel, "label " + std::to_string(c) + " out of range for k=" + std::to_string(k));
        ++counts[c];
        const auto x = features.row(i);
        auto s = sums.row(c);
        for (std::size_t j = 0; j < d; ++j) s[j] += x[j];
    }

    std::vector<std::size_t> sole(k, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (counts[assignment.labels[i]] == 1) sole[assignment.labels[i]] = i;
    }

    Matrix<float> centers(k, d);
    std::vector<bool> empty(k, false);
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 1) {
            // Already unit norm; copying keeps the bits exact.
            const auto src = features.row(sole[c]);
            std::copy(src.begin(), src.end(), centers.row(c).begin());
            continue;
        }
        if (counts[c] == 0 || l2_norm(sums.row(c)) < kZeroNorm) {
            empty[c] = true;
            continue;
        }
        const auto unit = l2_normalize(std::span<const double>(sums.row(c)));
        auto dst = centers.row(c);
        for (std::size_t j = 0; j < d; ++j) dst[j] = static_cast<float>(unit[j]);
    }

    UpdateResult result;
    std::vector<bool> used(n, false);
    for (std::size_t c = 0; c < k; ++c) {
        if (!empty[c]) continue;
        // Farthest sample from its own centroid; samples whose centroid is
        // itself being repaired count as distance 0.
        std::size_t far = n;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            const std::uint32_t own = assignment.labels[i];
            const double dist = empty[own] ? 0.0 : squared_distance(features.row(i), centers.row(own));
            if (dist > far_d) {
                far_d = dist;
                far = i;
            }
        }
        if (far == n) throw Error(ErrorCode::TooManyClusters, "not enough samples to repair empty clusters");
        used[far] = true;
        const auto src = features.row(far);
        std::copy(src.begin(), src.end(), centers.row(c).begin());
        result.repaired.push_back(static_cast<std::uint32_t>(c));
    }
    result.centroids.centroids = FeatureMatrix(std::move(centers), true);
    return result;
}

KMeansResult kmeans_fit(const FeatureMatrix& features, const KMeansOptions& options) {
    if (options.max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be at least 1");
    if (!(options.tol >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tol must be non-negative");

    KMeansResult result;
    result.centroids = kmeans_init(features, options.k, options.seed, options.method);
    result.assignment = kmeans_assign(features, result.centroids);
    result.objective_history.push_back(result.assignment.objective);
    result.repair_flags.push_back(false);

    std::size_t iters = 0;
    while (iters < options.max_iters) {
        UpdateResult upd = kmeans_update(features, result.assignment, options.k);
        result.centroids.centroids = std::move(upd.centroids.centroids);
        result.assignment = kmeans_assign(features, result.centroids);
        ++iters;
        const double prev = result.objective_history.back();
        const double cur = result.assignment.objective;
        result.objective_history.push_back(cur);
        result.repair_flags.push_back(!upd.repaired.empty());
        if (upd.repaired.empty() && prev - cur < options.tol) break;
    }
    result.centroids.seed = options.seed;
    result.centroids.iterations_run = iters;
    result.centroids.final_objective = result.assignment.objective;
    return result;
}

}  // namespace mlcd
