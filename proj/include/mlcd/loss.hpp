#ifndef MLCD_LOSS_HPP
#define MLCD_LOSS_HPP

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mlcd/sampler.hpp"
#include "mlcd/tensor.hpp"

namespace mlcd {

/// CD: softmax over one pseudo label. MLC: one log term over every
/// (negative, positive) pair. MLCD: separate positive and negative terms.
enum class LossVariant { CD, MLC, MLCD };

LossVariant parse_loss_variant(std::string_view name);
std::string_view to_string(LossVariant v);

struct LossConfig {
    LossVariant variant = LossVariant::MLCD;
    double margin = 0.3;  ///< additive angular margin on positives, radians
    double scale = 32.0;  ///< logit scale applied after the margin
    double ratio = 0.1;   ///< fraction of negative classes sampled per step

    /// margin in [0, 0.5], scale in (0, 256], ratio in (0, 1].
    void validate() const;
};

struct LossOutput {
    double value = 0.0;
    std::vector<double> grad_scores;
    double mean_si = 0.0;
    double mean_sj = 0.0;
};

/// Numerically stable log(sum(exp(x))); -inf for an empty range.
double log_sum_exp(std::span<const double> x);
/// log(1 + exp(x)) without overflow.
double softplus(double x);

/// cos(acos(s) + m) for s > cos(pi - m), else s - m sin(m). s is clamped to
/// [-1, 1] first.
double margin_cosine(double s, double m);
/// d margin_cosine / ds = sin(theta + m) / sin(theta) on the main branch,
/// 1 on the fallback branch.
double margin_cosine_derivative(double s, double m);

ScoreMatrix apply_margin(const ScoreMatrix& scores, const Matrix<std::uint8_t>& positive_mask, double m);

/// log(1 + sum_{j != label} exp(s_j - s_label)); gradient softmax - onehot.
LossOutput loss_cd(std::span<const double> scores, std::size_t label);

/// log(1 + sum_neg exp(s_j) * sum_pos exp(-s_i)).
LossOutput loss_mlc(std::span<const double> scores, std::span<const std::uint8_t> positive_mask);

/// log(1 + sum_pos exp(-s_i)) + log(1 + sum_neg exp(s_j)). An empty negative
/// set contributes zero.
LossOutput loss_mlcd(std::span<const double> scores, std::span<const std::uint8_t> positive_mask);

struct BatchLoss {
    double value = 0.0;        ///< mean of per-sample losses
    MatrixD grad_scores;       ///< d value / d raw cosine, b x c
    MatrixD grad_E;            ///< b x d
    MatrixD grad_W;            ///< c x d
    double mean_si = 0.0;      ///< raw cosine over (sample, positive) pairs
    double mean_sj = 0.0;      ///< raw cosine over (sample, active negative) pairs
    std::vector<double> per_sample;
};

/// Loss and gradient from a raw b x c cosine matrix. positives[b] lists the
/// positive columns of sample b, most similar first (CD uses the first).
BatchLoss loss_on_cosines(const MatrixD& cosines, const ActivePositives& positives, const LossConfig& config);

/// scores = scale * margin(E W^T); per-sample loss averaged over the batch.
/// Fills grad_E and grad_W in addition to grad_scores.
BatchLoss loss_forward_backward(const MatrixD& E, const MatrixD& W, const ActivePositives& positives,
                                const LossConfig& config);
BatchLoss loss_forward_backward(const FeatureMatrix& E, const FeatureMatrix& W, const ActivePositives& positives,
                                const LossConfig& config);

}  // namespace mlcd

#endif  // MLCD_LOSS_HPP
