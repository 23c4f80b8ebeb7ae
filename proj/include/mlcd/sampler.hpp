#ifndef MLCD_SAMPLER_HPP
#define MLCD_SAMPLER_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "mlcd/labeling.hpp"
#include "mlcd/rng.hpp"
#include "mlcd/tensor.hpp"

namespace mlcd {

/// Active classes for one step: every batch positive plus a uniform sample
/// of the remaining classes. The set is shared by the whole batch.
struct SampledClassSet {
    std::vector<std::uint32_t> class_ids;  // sorted, distinct
    std::vector<std::uint32_t> positives;  // sorted, distinct
    std::vector<std::uint32_t> negatives;  // sorted, disjoint from positives
    double ratio = 1.0;
    std::uint64_t rng_state_before = 0;

    std::size_t size() const { return class_ids.size(); }
    /// Column of a class id in class_ids; throws BadLabel if absent.
    std::uint32_t column_of(std::uint32_t class_id) const;
};

/// max(1, floor(r * pool)) for r < 1, the whole pool for r == 1, never more
/// than the pool.
std::size_t negative_sample_count(std::size_t k, std::size_t num_positives, double r);

SampledClassSet sample_classes(std::size_t k, std::span<const std::uint32_t> batch_positives, double r, Rng& rng);

/// Positive columns per sample (indices into class_ids), in label order.
using ActivePositives = std::vector<std::vector<std::uint32_t>>;

ActivePositives map_positives(const SampledClassSet& set, const LabelAssignment& labels,
                              std::span<const std::size_t> batch);

Matrix<std::uint8_t> positive_mask(const ActivePositives& positives, std::size_t num_classes);

/// Distinct labels of the batch samples.
std::vector<std::uint32_t> batch_positive_union(const LabelAssignment& labels, std::span<const std::size_t> batch);

}  // namespace mlcd

#endif  // MLCD_SAMPLER_HPP
