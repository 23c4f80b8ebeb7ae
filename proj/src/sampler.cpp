#include "mlcd/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mlcd {

std::uint32_t SampledClassSet::column_of(std::uint32_t class_id) const {
    const auto it = std::lower_bound(class_ids.begin(), class_ids.end(), class_id);
    if (it == class_ids.end() || *it != class_id) {
        throw Error(ErrorCode::BadLabel, "class " + std::to_string(class_id) + " is not in the active set");
    }
    return static_cast<std::uint32_t>(it - class_ids.begin());
}

std::size_t negative_sample_count(std::size_t k, std::size_t num_positives, double r) {
    const std::size_t pool = k - std::min(k, num_positives);
    if (pool == 0) return 0;
    if (r >= 1.0) return pool;
    const auto n = static_cast<std::size_t>(std::floor(r * static_cast<double>(pool)));
    return std::min(pool, std::max<std::size_t>(1, n));
}

SampledClassSet sample_classes(std::size_t k, std::span<const std::uint32_t> batch_positives, double r, Rng& rng) {
    if (!(r > 0.0 && r <= 1.0)) throw Error(ErrorCode::BadRatio, "sampling ratio must lie in (0, 1]");
    SampledClassSet out;
    out.ratio = r;
    out.rng_state_before = rng.state();
    out.positives.assign(batch_positives.begin(), batch_positives.end());
    std::sort(out.positives.begin(), out.positives.end());
    out.positives.erase(std::unique(out.positives.begin(), out.positives.end()), out.positives.end());
    if (!out.positives.empty() && out.positives.back() >= k) {
        throw Error(ErrorCode::BadLabel, "batch positive " + std::to_string(out.positives.back()) + " >= k");
    }

    std::vector<std::uint32_t> pool;
    pool.reserve(k - out.positives.size());
    for (std::uint32_t c = 0, p = 0; c < k; ++c) {
        if (p < out.positives.size() && out.positives[p] == c) {
            ++p;
            continue;
        }
        pool.push_back(c);
    }
    const std::size_t count = negative_sample_count(k, out.positives.size(), r);
    // Partial Fisher-Yates: the first `count` slots are a uniform sample.
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.uniform_below(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    out.negatives.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(out.negatives.begin(), out.negatives.end());

    out.class_ids.reserve(out.positives.size() + out.negatives.size());
    std::merge(out.positives.begin(), out.positives.end(), out.negatives.begin(), out.negatives.end(),
               std::back_inserter(out.class_ids));
    return out;
}

ActivePositives map_positives(const SampledClassSet& set, const LabelAssignment& labels,
                              std::span<const std::size_t> batch) {
    ActivePositives out(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        for (std::uint32_t id : labels[batch[b]]) out[b].push_back(set.column_of(id));
    }
    return out;
}

Matrix<std::uint8_t> positive_mask(const ActivePositives& positives, std::size_t num_classes) {
    Matrix<std::uint8_t> mask(positives.size(), num_classes, 0);
    for (std::size_t b = 0; b < positives.size(); ++b) {
        for (std::uint32_t c : positives[b]) {
            if (c >= num_classes) throw Error(ErrorCode::BadLabel, "positive column out of range");
            mask(b, c) = 1;
        }
    }
    return mask;
}

std::vector<std::uint32_t> batch_positive_union(const LabelAssignment& labels, std::span<const std::size_t> batch) {
    std::vector<std::uint32_t> out;
    for (std::size_t i : batch) out.insert(out.end(), labels[i].begin(), labels[i].end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace mlcd
