#ifndef MLCD_SYNTHETIC_HPP
#define MLCD_SYNTHETIC_HPP

#include <cstdint>
#include <vector>

#include "mlcd/tensor.hpp"

namespace mlcd {

/// Multi-concept toy data: every sample is a normalized blend of one or more
/// latent unit directions plus isotropic Gaussian noise.
struct SyntheticSpec {
    std::size_t num_directions = 20;
    std::size_t dim = 16;
    std::size_t samples = 2000;
    std::size_t max_concepts = 2;
    double secondary_weight_min = 0.3;
    double secondary_weight_max = 0.8;
    double noise = 0.1;  // per-coordinate standard deviation
    /// Weight of one direction shared by all latent directions; pairwise
    /// cosines between directions concentrate around shared^2.
    double shared_component = 0.0;
    std::uint64_t seed = 0;
};

struct SyntheticData {
    FeatureMatrix features;    // normalized
    FeatureMatrix directions;  // normalized latent directions
    std::vector<std::uint32_t> primary;
    std::vector<std::vector<std::uint32_t>> concepts;  // primary first
};

SyntheticData make_multi_concept(const SyntheticSpec& spec);

}  // namespace mlcd

#endif  // MLCD_SYNTHETIC_HPP
