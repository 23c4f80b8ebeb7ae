#ifndef MLCD_LABELING_HPP
#define MLCD_LABELING_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mlcd/clustering.hpp"

namespace mlcd {

enum class LabelMode { Single, TopL, Threshold };

/// Positive class ids per sample, most similar first (ties by ascending id).
struct LabelAssignment {
    std::vector<std::vector<std::uint32_t>> lists;
    std::uint32_t k = 0;
    LabelMode mode = LabelMode::Single;
    std::uint32_t l = 1;
    double tau = 0.0;

    std::size_t size() const { return lists.size(); }
    const std::vector<std::uint32_t>& operator[](std::size_t i) const { return lists[i]; }

    /// Checks non-empty lists of distinct ids below k; throws Format otherwise.
    void validate() const;

    /// First (most similar) label of every sample.
    std::vector<std::uint32_t> primary() const;

    /// Samples selected in order; k and mode carried over.
    LabelAssignment select(std::span<const std::size_t> indices) const;
};

LabelAssignment assign_top_l(const FeatureMatrix& features, const CentroidSet& centroids, std::size_t l);
LabelAssignment assign_threshold(const FeatureMatrix& features, const CentroidSet& centroids, double tau);

/// Wraps hard labels as single-label lists.
LabelAssignment from_hard_labels(std::span<const std::uint32_t> labels, std::uint32_t k);

// LBL layout: "MLCDLBL1", u32 n, u32 k, then per sample u32 length followed
// by that many u32 ids. Little-endian. The mode is not stored; decoded files
// report TopL when every list has the same length, Threshold otherwise.
inline constexpr char kLblMagic[8] = {'M', 'L', 'C', 'D', 'L', 'B', 'L', '1'};

std::string encode_labels(const LabelAssignment& a);
LabelAssignment decode_labels(const std::string& bytes, const std::string& source = "<memory>");
void write_labels(const std::filesystem::path& path, const LabelAssignment& a);
LabelAssignment read_labels(const std::filesystem::path& path);

}  // namespace mlcd

#endif  // MLCD_LABELING_HPP
