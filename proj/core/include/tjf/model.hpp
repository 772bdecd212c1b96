#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tjf/data.hpp"
#include "tjf/graph_attention.hpp"
#include "tjf/tcn.hpp"

namespace tjf {

/// Every hyperparameter of the forecaster and its training recipe.
struct ModelConfig {
    std::int64_t d_z = 32;
    SpatialOptions spatial;
    TcnConfig tcn;
    std::int64_t agent_count = 0;  // K; the decoder emits 2K coordinates

    double learning_rate = 5e-4;
    double lr_decay = 0.999;  // multiplicative, per epoch
    std::int64_t batch_size = 8;
    std::int64_t max_epochs = 300;
    std::int64_t early_stop_patience = 20;  // epochs without val improvement; 0 disables
    std::uint64_t seed = 0;
    bool teacher_forcing = true;
    /// Roles whose agents contribute loss terms; empty trains on everyone.
    std::vector<std::string> modeled_roles;

    void validate() const;  // throws ConfigError
};

struct DecoderParams {
    Tensor weight;  // [2K x d_z]
    Tensor bias;    // [2K]

    static DecoderParams init(std::int64_t d_z, std::int64_t agent_count, Rng& rng);
};

/// The composed forecaster: spatial encoder -> TCN -> linear decoder.
struct ForecastModel {
    ModelConfig config;
    SpatialParams spatial;
    TcnParams tcn;
    DecoderParams decoder;

    static ForecastModel init(const ModelConfig& config);

    /// Stable-ordered (name, tensor) view of every learnable parameter.
    std::vector<std::pair<std::string, Tensor>> parameters() const;

    /// All parameter values finite?
    bool parameters_finite() const;

    /// Decoded one-step-ahead positions [2K x T] for an embedding sequence.
    Tensor decode(const Tensor& g_hat) const;
};

/// Observed prefix plus how far to forecast. `ground_truth`, when present,
/// holds the future frames for scoring; prediction never reads it.
struct PredictionTask {
    std::vector<FrameSnapshot> observed;
    std::int64_t horizon = 0;
    std::vector<FrameSnapshot> ground_truth;
};

/// Teacher-forced sequence loss: encodes frames 1..T-1, predicts frames
/// 2..T in one pass, and returns the mean squared error over all agents,
/// steps and coordinates. With teacher forcing disabled the encoder consumes
/// the model's own (detached) predictions after the first frame; every step
/// is still scored against ground truth.
Tensor forward_loss(const ForecastModel& model, const Demonstration& demo, bool train, Rng& rng);

/// Autoregressive forecast: each predicted frame is appended to the encoder
/// input before the next step. Never reads task.ground_truth.
std::vector<FrameSnapshot> rollout(const ForecastModel& model, const PredictionTask& task);

/// Constant-velocity extrapolation from the last two observed frames.
std::vector<FrameSnapshot> velocity_baseline(const PredictionTask& task);

/// Same architecture with attention frozen at uniform 1/K weights (the
/// ablation wiring); training and inference are otherwise identical.
ModelConfig uniform_aggregation_variant(ModelConfig config);

/// Flattened [2K x T] coordinate matrix of frames[first..first+count).
Tensor frames_to_matrix(std::span<const FrameSnapshot> frames, std::size_t first,
                        std::size_t count);

}  // namespace tjf
