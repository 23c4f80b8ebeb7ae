#ifndef MLCD_TRAINER_HPP
#define MLCD_TRAINER_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mlcd/clustering.hpp"
#include "mlcd/keyvalue.hpp"
#include "mlcd/labeling.hpp"
#include "mlcd/loss.hpp"
#include "mlcd/rng.hpp"

namespace mlcd {

enum class OptimizerKind { SgdMomentum, AdamW };
enum class CenterInit { Warm, Random };
enum class EncoderInit { Identity, Random };

struct TrainConfig {
    LossConfig loss;
    std::size_t batch_size = 64;
    std::size_t steps = 100;
    double learning_rate = 1e-3;
    double weight_decay = 0.2;  // decoupled, encoder only
    OptimizerKind optimizer = OptimizerKind::AdamW;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t warmup_steps = 0;  // linear warm-up, 0 disables
    std::size_t log_interval = 10;
    std::size_t embed_dim = 0;  // 0: same as the input width
    CenterInit center_init = CenterInit::Warm;
    EncoderInit encoder_init = EncoderInit::Identity;
    std::size_t monitor_size = 512;  // samples used for logged metrics
    std::uint64_t seed = 0;

    void validate() const;
};

/// Keys every config file must define; the rest fall back to defaults.
const std::vector<std::string>& required_config_keys();

/// Builds a TrainConfig from key=value pairs. Unknown keys are rejected.
/// The class count key `k` and positive count `l` are returned separately.
struct ParsedConfig {
    TrainConfig train;
    std::size_t k = 0;
    std::size_t l = 1;
};
ParsedConfig parse_train_config(const KeyValues& kv);
KeyValues to_key_values(const TrainConfig& config, std::size_t k, std::size_t l);

struct TrainState {
    MatrixD encoder;  // d_in x d_emb
    MatrixD centers;  // k x d_emb, unit rows
    // AdamW first/second moments; SGD keeps its velocity in the *_m1 buffers.
    MatrixD encoder_m1, encoder_m2;
    MatrixD centers_m1, centers_m2;
    std::size_t step = 0;
    Rng sampler_rng;
    Rng shuffle_rng;

    friend bool operator==(const TrainState&, const TrainState&) = default;
};

TrainState init_state(const TrainConfig& config, std::size_t input_dim, std::size_t k,
                      const CentroidSet* warm_centers = nullptr);

struct StepMetrics {
    double loss = 0.0;
    double mean_si = 0.0;
    double mean_sj = 0.0;
    double grad_norm_encoder = 0.0;
    double grad_norm_centers = 0.0;
    std::size_t active_classes = 0;
};

/// Embeds raw rows: l2_normalize(x^T encoder).
MatrixD encode(const MatrixD& encoder, const FeatureMatrix& features, std::span<const std::size_t> rows);
FeatureMatrix embed(const MatrixD& encoder, const FeatureMatrix& features);

/// One optimizer step on the given batch rows. Only the encoder and the
/// centers in the sampled class set change.
StepMetrics train_step(TrainState& state, const FeatureMatrix& features, const LabelAssignment& labels,
                       std::span<const std::size_t> batch, const TrainConfig& config);

struct MetricRecord {
    std::size_t step = 0;
    double loss = 0.0;
    double mean_si = 0.0;
    double mean_sj = 0.0;
    double grad_norm_encoder = 0.0;
    double grad_norm_centers = 0.0;
};

struct MetricHistory {
    std::vector<MetricRecord> records;

    std::string to_csv() const;
};

/// Loss (all classes active) and cosine statistics on the first
/// monitor_size samples.
MetricRecord evaluate_monitor(const TrainState& state, const FeatureMatrix& features, const LabelAssignment& labels,
                              const TrainConfig& config);

struct TrainResult {
    TrainState state;
    MetricHistory history;
};

/// Seeded shuffled mini-batches for config.steps steps. Records the monitor
/// metrics before the first step, every log_interval steps and after the
/// last step.
TrainResult train(const FeatureMatrix& features, const LabelAssignment& labels, const TrainConfig& config,
                  const CentroidSet* warm_centers = nullptr);

struct Checkpoint {
    MatrixD encoder;
    MatrixD centers;
    KeyValues manifest;
};

/// encoder.fmat, centers.fmat and checkpoint.txt inside dir.
void save_checkpoint(const std::filesystem::path& dir, const TrainState& state, const TrainConfig& config,
                     std::size_t l);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace mlcd

#endif  // MLCD_TRAINER_HPP
