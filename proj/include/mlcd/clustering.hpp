#ifndef MLCD_CLUSTERING_HPP
#define MLCD_CLUSTERING_HPP

#include <cstdint>
#include <string_view>
#include <vector>

#include "mlcd/tensor.hpp"

namespace mlcd {

/// k unit-norm prototypes plus fit metadata.
struct CentroidSet {
    FeatureMatrix centroids;
    std::uint64_t seed = 0;
    std::size_t iterations_run = 0;
    double final_objective = 0.0;

    std::size_t k() const { return centroids.rows(); }
    std::size_t dim() const { return centroids.cols(); }
};

struct HardAssignment {
    std::vector<std::uint32_t> labels;
    /// Mean squared distance ‖e_i - w_{y_i}‖², in [0, 4].
    double objective = 0.0;
};

enum class InitMethod { Random, KMeansPP };

InitMethod parse_init_method(std::string_view name);
std::string_view to_string(InitMethod m);

CentroidSet kmeans_init(const FeatureMatrix& features, std::size_t k, std::uint64_t seed,
                        InitMethod method = InitMethod::KMeansPP);

/// Nearest centroid by cosine; ties go to the lowest class index.
HardAssignment kmeans_assign(const FeatureMatrix& features, const CentroidSet& centroids);

struct UpdateResult {
    CentroidSet centroids;
    /// Classes re-seeded because they had no members (or a zero member sum).
    std::vector<std::uint32_t> repaired;
};

/// Normalized member means. An empty cluster is re-seeded with the sample
/// farthest from its own (freshly updated) centroid, skipping samples already
/// used for another repair.
UpdateResult kmeans_update(const FeatureMatrix& features, const HardAssignment& assignment, std::size_t k);

struct KMeansOptions {
    std::size_t k = 0;
    std::size_t max_iters = 100;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    InitMethod method = InitMethod::KMeansPP;
};

struct KMeansResult {
    CentroidSet centroids;
    HardAssignment assignment;
    /// history[0] is the objective at initialization, then one entry per
    /// assign+update pass.
    std::vector<double> objective_history;
    /// repair_flags[t] is set when entry t followed an empty-cluster repair.
    std::vector<bool> repair_flags;
};

KMeansResult kmeans_fit(const FeatureMatrix& features, const KMeansOptions& options);

}  // namespace mlcd

#endif  // MLCD_CLUSTERING_HPP
