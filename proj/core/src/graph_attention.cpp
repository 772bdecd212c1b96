#include "tjf/graph_attention.hpp"

#include <cmath>

namespace tjf {

Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw ConfigError("unknown activation '" + name + "' (expected relu|tanh|identity)");
}

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "relu";
}

Aggregation parse_aggregation(const std::string& name) {
    if (name == "attention") return Aggregation::Attention;
    if (name == "uniform") return Aggregation::Uniform;
    throw ConfigError("unknown aggregation '" + name + "' (expected attention|uniform)");
}

std::string aggregation_name(Aggregation a) {
    return a == Aggregation::Attention ? "attention" : "uniform";
}

SpatialParams SpatialParams::init(std::int64_t d_z, std::int64_t d_in, Rng& rng) {
    if (d_z < 1 || d_in < 1) throw ConfigError("spatial dims must be positive");
    SpatialParams p;
    const double w_bound = std::sqrt(1.0 / static_cast<double>(d_in));
    std::vector<double> w(static_cast<std::size_t>(d_z * d_in));
    for (auto& v : w) v = rng.uniform(-w_bound, w_bound);
    p.weight = Tensor::from_vector({d_z, d_in}, std::move(w), true);

    const double a_bound = std::sqrt(1.0 / static_cast<double>(2 * d_z));
    std::vector<double> a(static_cast<std::size_t>(2 * d_z));
    for (auto& v : a) v = rng.uniform(-a_bound, a_bound);
    p.attention = Tensor::from_vector({2 * d_z}, std::move(a), true);
    return p;
}

Tensor frame_features(const FrameSnapshot& frame) {
    const std::int64_t k = frame.agent_count();
    if (k < 1) throw DataError("encode_frame: empty frame (no agents)");
    std::vector<double> f(static_cast<std::size_t>(2 * k));
    for (std::int64_t i = 0; i < k; ++i) {
        f[static_cast<std::size_t>(i)] = frame.states[static_cast<std::size_t>(i)].x;
        f[static_cast<std::size_t>(k + i)] = frame.states[static_cast<std::size_t>(i)].y;
    }
    return Tensor::from_vector({2, k}, std::move(f));
}

namespace {

Tensor apply_activation(const Tensor& x, Activation act) {
    switch (act) {
        case Activation::Relu: return relu(x);
        case Activation::Tanh: return tanh_op(x);
        case Activation::Identity: return x;
    }
    return relu(x);
}

}  // namespace

FrameEncoding encode_features(const Tensor& features, const SpatialParams& params,
                              const SpatialOptions& options) {
    if (features.rank() != 2) {
        throw DimensionError("encode_features: expected [d_in x K] features, got " +
                             shape_str(features.shape()));
    }
    const std::int64_t k = features.dim(1);
    if (features.dim(0) != params.feature_width()) {
        throw ParameterError("encode_features: features have width " +
                             std::to_string(features.dim(0)) + " but W expects " +
                             std::to_string(params.feature_width()));
    }

    const Tensor z = matmul(params.weight, features);  // [d_z x K]

    Tensor alpha;
    if (options.aggregation == Aggregation::Attention) {
        const Tensor scores = leaky_relu(attention_scores(z, params.attention), options.leaky_slope);
        alpha = softmax_rows(scores);  // row i: how node i distributes over sources j
    } else {
        alpha = Tensor::full({k, k}, 1.0 / static_cast<double>(k));
    }

    // h'_i = act(sum_j alpha[i][j] * z_j)  ==  column i of Z * alpha^T
    const Tensor aggregated = gemm(z, alpha, false, true);
    const Tensor activated = apply_activation(aggregated, options.activation);
    FrameEncoding enc;
    enc.embedding = sum_over_axis(activated, 1);  // pool over nodes
    enc.attention = alpha;
    return enc;
}

FrameEncoding encode_frame(const FrameSnapshot& frame, const SpatialParams& params,
                           const SpatialOptions& options) {
    return encode_features(frame_features(frame), params, options);
}

Tensor encode_sequence(std::span<const FrameSnapshot> frames, const SpatialParams& params,
                       const SpatialOptions& options, std::vector<Tensor>* attention_out) {
    if (frames.empty()) throw DataError("encode_sequence: no frames");
    const std::int64_t k = frames[0].agent_count();
    for (const auto& f : frames) {
        if (f.agent_count() != k) {
            throw DataError("encode_sequence: inconsistent agent count (" + std::to_string(k) +
                            " vs " + std::to_string(f.agent_count()) + ")");
        }
    }

    const std::int64_t d_in = options.feature_width();
    const std::int64_t d_z = params.embedding_width();
    std::vector<Tensor> columns;
    columns.reserve(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
        Tensor features;
        if (options.velocity_features) {
            std::vector<double> f(static_cast<std::size_t>(d_in * k));
            const auto& cur = frames[t].states;
            const auto& prev = frames[t > 0 ? t - 1 : 0].states;  // first frame: zero velocity
            for (std::int64_t i = 0; i < k; ++i) {
                const auto idx = static_cast<std::size_t>(i);
                f[static_cast<std::size_t>(0 * k + i)] = cur[idx].x;
                f[static_cast<std::size_t>(1 * k + i)] = cur[idx].y;
                f[static_cast<std::size_t>(2 * k + i)] = cur[idx].x - prev[idx].x;
                f[static_cast<std::size_t>(3 * k + i)] = cur[idx].y - prev[idx].y;
            }
            features = Tensor::from_vector({d_in, k}, std::move(f));
        } else {
            features = frame_features(frames[t]);
        }
        FrameEncoding enc = encode_features(features, params, options);
        columns.push_back(reshape(enc.embedding, {d_z, 1}));
        if (attention_out) attention_out->push_back(enc.attention);
    }
    return concat(std::span<const Tensor>(columns), 1);
}

}  // namespace tjf
