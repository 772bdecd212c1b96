#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tjf/ops.hpp"
#include "tjf/rng.hpp"
#include "tjf/tensor.hpp"

namespace tjf {

/// 2-D position of one agent in normalized coordinates ([-1,1] after
/// preprocessing).
struct AgentState {
    double x = 0.0;
    double y = 0.0;
};

/// All K agents at one timestep. The storage order carries no meaning; the
/// encoder output is invariant under reordering.
struct FrameSnapshot {
    std::vector<AgentState> states;
    std::int64_t agent_count() const { return static_cast<std::int64_t>(states.size()); }
};

enum class Activation { Relu, Tanh, Identity };
enum class Aggregation { Attention, Uniform };

Activation parse_activation(const std::string& name);
std::string activation_name(Activation a);
Aggregation parse_aggregation(const std::string& name);
std::string aggregation_name(Aggregation a);

struct SpatialOptions {
    double leaky_slope = 0.2;
    Activation activation = Activation::Relu;
    Aggregation aggregation = Aggregation::Attention;
    bool velocity_features = false;  // appends per-agent frame deltas to the features

    std::int64_t feature_width() const { return velocity_features ? 4 : 2; }
};

/// Learnable spatial-encoder parameters: the node transform W (d_z x d_in)
/// and the pairwise scoring vector a (2*d_z).
struct SpatialParams {
    Tensor weight;
    Tensor attention;

    static SpatialParams init(std::int64_t d_z, std::int64_t d_in, Rng& rng);
    std::int64_t embedding_width() const { return weight.dim(0); }
    std::int64_t feature_width() const { return weight.dim(1); }
};

struct FrameEncoding {
    Tensor embedding;  // [d_z]
    Tensor attention;  // [K x K], each row sums to 1
};

/// Feature matrix [d_in x K] for one frame; column k holds agent k.
Tensor frame_features(const FrameSnapshot& frame);

/// Encodes a [d_in x K] feature matrix: per-node linear transform, pairwise
/// scores through LeakyReLU, row-softmax normalization over sources, score-
/// weighted aggregation, activation, and sum pooling into one embedding.
FrameEncoding encode_features(const Tensor& features, const SpatialParams& params,
                              const SpatialOptions& options);

/// encode_features over the raw 2-D positions of a frame.
FrameEncoding encode_frame(const FrameSnapshot& frame, const SpatialParams& params,
                           const SpatialOptions& options);

/// Column t of the result is the embedding of frames[t]; no information
/// crosses timesteps. Optionally collects the per-frame attention matrices.
Tensor encode_sequence(std::span<const FrameSnapshot> frames, const SpatialParams& params,
                       const SpatialOptions& options,
                       std::vector<Tensor>* attention_out = nullptr);

}  // namespace tjf
