#ifndef MLCD_EVAL_HPP
#define MLCD_EVAL_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mlcd/keyvalue.hpp"
#include "mlcd/labeling.hpp"
#include "mlcd/tensor.hpp"

namespace mlcd {

/// Majority vote over the k nearest training rows by cosine. Vote ties go to
/// the label with the smaller summed distance (1 - cos), then the smaller id.
double knn_eval(const FeatureMatrix& train_E, std::span<const std::uint32_t> train_labels, const FeatureMatrix& test_E,
                std::span<const std::uint32_t> test_labels, std::size_t k_neighbors);

struct ProbeOptions {
    std::size_t epochs = 200;
    double learning_rate = 1.0;
};

struct ProbeResult {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
};

/// Multinomial logistic regression (weights + bias, zero init) trained by
/// full-batch gradient descent on frozen embeddings.
ProbeResult linear_probe(const FeatureMatrix& train_E, std::span<const std::uint32_t> train_labels,
                         const FeatureMatrix& test_E, std::span<const std::uint32_t> test_labels,
                         const ProbeOptions& options = {});

inline constexpr std::size_t kHistogramBins = 64;

struct SimilarityStats {
    double mean_si = 0.0;
    double mean_sj = 0.0;
    std::array<std::uint64_t, kHistogramBins> positive_hist{};
    std::array<std::uint64_t, kHistogramBins> negative_hist{};
    std::uint64_t positive_pairs = 0;
    std::uint64_t negative_pairs = 0;
};

/// Histogram bin of a cosine over [-1, 1]; out-of-range values are clamped.
std::size_t histogram_bin(double cosine);

/// Positive pairs are (sample, assigned center); negative pairs are
/// (sample, every other center).
SimilarityStats similarity_stats(const FeatureMatrix& E, const FeatureMatrix& centers, const LabelAssignment& assignment);

struct PcaRgb {
    std::vector<std::array<std::uint8_t, 3>> rgb;
    std::vector<std::uint8_t> foreground;  // first component score > 0
    std::size_t rank = 0;                  // components actually recovered (<= 3)
    std::array<std::vector<double>, 3> components;  // principal directions, sign-fixed

    bool rank_deficient() const { return rank < 3; }
};

/// Projects rows onto the top three principal directions and min-max maps
/// each to [0, 255]. Missing components (rank < 3) are filled with 128.
PcaRgb pca_rgb(const Matrix<float>& features);

struct EvalReport {
    double knn_accuracy = 0.0;
    double probe_accuracy = 0.0;
    std::size_t knn_k = 5;
    bool has_accuracy = true;  // false for similarity-only reports
    SimilarityStats stats;

    KeyValues to_key_values() const;
    /// bin_low,bin_high,pos_count,neg_count
    std::string histogram_csv() const;
};

/// Writes report as key=value text plus `<report>.hist.csv`.
void write_report(const std::filesystem::path& path, const EvalReport& report);

}  // namespace mlcd

#endif  // MLCD_EVAL_HPP
