#include "tjf/model.hpp"

#include <algorithm>
#include <cmath>

namespace tjf {

void ModelConfig::validate() const {
    if (d_z < 1) throw ConfigError("model: d_z must be >= 1");
    if (agent_count < 1) throw ConfigError("model: agent_count must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("model: learning_rate must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("model: lr_decay must lie in (0,1]");
    if (batch_size < 1) throw ConfigError("model: batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("model: max_epochs must be >= 1");
    if (early_stop_patience < 0) throw ConfigError("model: early_stop_patience must be >= 0");
    if (!(spatial.leaky_slope > 0.0 && spatial.leaky_slope < 1.0)) {
        throw ConfigError("model: leaky_slope must lie in (0,1)");
    }
    tcn.validate();
}

DecoderParams DecoderParams::init(std::int64_t d_z, std::int64_t agent_count, Rng& rng) {
    DecoderParams p;
    const std::int64_t out = 2 * agent_count;
    const double bound = std::sqrt(1.0 / static_cast<double>(d_z));
    std::vector<double> w(static_cast<std::size_t>(out * d_z));
    for (auto& v : w) v = rng.uniform(-bound, bound);
    p.weight = Tensor::from_vector({out, d_z}, std::move(w), true);
    p.bias = Tensor::zeros({out}, true);
    return p;
}

ForecastModel ForecastModel::init(const ModelConfig& config) {
    config.validate();
    ForecastModel m;
    m.config = config;
    Rng rng(config.seed, 7);
    m.spatial = SpatialParams::init(config.d_z, config.spatial.feature_width(), rng);
    m.tcn = TcnParams::init(config.d_z, config.tcn, rng);
    m.decoder = DecoderParams::init(config.d_z, config.agent_count, rng);
    return m;
}

std::vector<std::pair<std::string, Tensor>> ForecastModel::parameters() const {
    std::vector<std::pair<std::string, Tensor>> params;
    params.emplace_back("spatial.weight", spatial.weight);
    params.emplace_back("spatial.attention", spatial.attention);
    for (std::size_t b = 0; b < tcn.blocks.size(); ++b) {
        const auto& block = tcn.blocks[b];
        const std::string prefix = "tcn.block" + std::to_string(b) + ".";
        params.emplace_back(prefix + "conv1.direction", block.conv1.direction);
        params.emplace_back(prefix + "conv1.gain", block.conv1.gain);
        params.emplace_back(prefix + "conv1.bias", block.conv1.bias);
        params.emplace_back(prefix + "conv2.direction", block.conv2.direction);
        params.emplace_back(prefix + "conv2.gain", block.conv2.gain);
        params.emplace_back(prefix + "conv2.bias", block.conv2.bias);
        if (block.projection.defined()) params.emplace_back(prefix + "projection", block.projection);
    }
    params.emplace_back("tcn.output.kernel", tcn.output_kernel);
    params.emplace_back("tcn.output.bias", tcn.output_bias);
    params.emplace_back("decoder.weight", decoder.weight);
    params.emplace_back("decoder.bias", decoder.bias);
    return params;
}

bool ForecastModel::parameters_finite() const {
    for (const auto& [name, tensor] : parameters()) {
        for (double v : tensor.values()) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

Tensor ForecastModel::decode(const Tensor& g_hat) const {
    return add_channel_bias(matmul(decoder.weight, g_hat), decoder.bias);
}

Tensor frames_to_matrix(std::span<const FrameSnapshot> frames, std::size_t first,
                        std::size_t count) {
    const std::int64_t k = frames[first].agent_count();
    std::vector<double> data(static_cast<std::size_t>(2 * k) * count);
    // Row layout matches the decoder output: x_1, y_1, x_2, y_2, ...
    for (std::size_t c = 0; c < count; ++c) {
        const auto& states = frames[first + c].states;
        for (std::int64_t a = 0; a < k; ++a) {
            data[static_cast<std::size_t>(2 * a) * count + c] = states[static_cast<std::size_t>(a)].x;
            data[static_cast<std::size_t>(2 * a + 1) * count + c] = states[static_cast<std::size_t>(a)].y;
        }
    }
    return Tensor::from_vector({2 * k, static_cast<std::int64_t>(count)}, std::move(data));
}

namespace {

FrameSnapshot column_to_frame(const Tensor& matrix, std::int64_t column, std::int64_t k) {
    FrameSnapshot frame;
    frame.states.resize(static_cast<std::size_t>(k));
    const std::int64_t t = matrix.dim(1);
    for (std::int64_t a = 0; a < k; ++a) {
        frame.states[static_cast<std::size_t>(a)].x = matrix.data()[(2 * a) * t + column];
        frame.states[static_cast<std::size_t>(a)].y = matrix.data()[(2 * a + 1) * t + column];
    }
    return frame;
}

/// Loss row mask from the modeled-role config: 1 for coordinate rows of
/// agents whose role is listed, 0 elsewhere.
std::vector<double> loss_row_mask(const ModelConfig& config, const Demonstration& demo) {
    const std::int64_t k = demo.agent_count();
    std::vector<double> mask(static_cast<std::size_t>(2 * k), 1.0);
    if (config.modeled_roles.empty() || demo.agent_roles.empty()) return mask;
    for (std::int64_t a = 0; a < k; ++a) {
        const std::string& role = demo.agent_roles[static_cast<std::size_t>(a)];
        bool modeled = false;
        for (const auto& r : config.modeled_roles) {
            if (r == role) {
                modeled = true;
                break;
            }
        }
        if (!modeled) {
            mask[static_cast<std::size_t>(2 * a)] = 0.0;
            mask[static_cast<std::size_t>(2 * a + 1)] = 0.0;
        }
    }
    return mask;
}

Tensor autoregressive_loss(const ForecastModel& model, const Demonstration& demo, bool train,
                           Rng& rng);

}  // namespace

Tensor forward_loss(const ForecastModel& model, const Demonstration& demo, bool train, Rng& rng) {
    if (demo.frame_count() < 2) {
        throw DataError("forward_loss: demonstration '" + demo.demo_id + "' has fewer than 2 frames");
    }
    if (demo.agent_count() != model.config.agent_count) {
        throw IncompatibilityError("forward_loss: demo '" + demo.demo_id + "' has K=" +
                                   std::to_string(demo.agent_count()) + ", model expects K=" +
                                   std::to_string(model.config.agent_count));
    }
    if (!model.config.teacher_forcing && train) {
        return autoregressive_loss(model, demo, train, rng);
    }

    const std::size_t t_in = demo.frames.size() - 1;
    const Tensor g = encode_sequence(std::span<const FrameSnapshot>(demo.frames.data(), t_in),
                                     model.spatial, model.config.spatial);
    const Tensor g_hat = tcn_forward(g, model.config.tcn, model.tcn, train, rng);
    const Tensor predicted = model.decode(g_hat);  // column t predicts frame t+1
    const Tensor target = frames_to_matrix(demo.frames, 1, t_in);

    const auto mask = loss_row_mask(model.config, demo);
    const bool all_ones =
        std::all_of(mask.begin(), mask.end(), [](double m) { return m == 1.0; });
    return all_ones ? l2_loss(predicted, target) : l2_loss_masked_rows(predicted, target, mask);
}

namespace {

Tensor autoregressive_loss(const ForecastModel& model, const Demonstration& demo, bool train,
                           Rng& rng) {
    // Rollout-style training: every step is scored against ground truth and
    // receives gradients directly; the frames fed back into the encoder are
    // detached (no backprop through the feedback recursion).
    const std::int64_t k = demo.agent_count();
    const std::int64_t t_total = demo.frame_count();
    std::vector<FrameSnapshot> frames{demo.frames[0]};
    std::vector<Tensor> predictions;
    for (std::int64_t t = 1; t < t_total; ++t) {
        const Tensor g = encode_sequence(std::span<const FrameSnapshot>(frames.data(), frames.size()),
                                         model.spatial, model.config.spatial);
        const Tensor g_hat = tcn_forward(g, model.config.tcn, model.tcn, train, rng);
        const Tensor decoded = model.decode(g_hat);
        const std::int64_t last = decoded.dim(1) - 1;
        std::vector<double> col(static_cast<std::size_t>(2 * k));
        for (std::int64_t r = 0; r < 2 * k; ++r)
            col[static_cast<std::size_t>(r)] = decoded.data()[r * decoded.dim(1) + last];
        // Keep the prediction on the tape and feed the detached copy back in.
        Tensor col_t = Tensor::from_vector({2 * k, 1}, col);
        if (decoded.requires_grad()) {
            // Slice the last column as a graph op so gradients reach it.
            auto di = decoded.impl();
            col_t = detail::make_op_result(
                {2 * k, 1}, std::move(col), "last_column", {decoded},
                [di, k, last](const detail::TensorImpl& o) {
                    if (!di->requires_grad) return;
                    auto& g = detail::ensure_grad(*di);
                    const std::int64_t t = di->shape[1];
                    for (std::int64_t r = 0; r < 2 * k; ++r)
                        g[static_cast<std::size_t>(r * t + last)] += o.grad[static_cast<std::size_t>(r)];
                });
        }
        predictions.push_back(col_t);
        frames.push_back(column_to_frame(col_t, 0, k));
    }
    const Tensor predicted = concat(std::span<const Tensor>(predictions), 1);
    const Tensor target = frames_to_matrix(demo.frames, 1, static_cast<std::size_t>(t_total - 1));
    const auto mask = loss_row_mask(model.config, demo);
    const bool all_ones =
        std::all_of(mask.begin(), mask.end(), [](double m) { return m == 1.0; });
    return all_ones ? l2_loss(predicted, target) : l2_loss_masked_rows(predicted, target, mask);
}

}  // namespace

std::vector<FrameSnapshot> rollout(const ForecastModel& model, const PredictionTask& task) {
    if (task.horizon < 1) throw ParameterError("rollout: horizon must be >= 1");
    if (task.observed.empty()) throw DataError("rollout: no observed frames");
    for (const auto& f : task.observed) {
        if (f.agent_count() != model.config.agent_count) {
            throw IncompatibilityError("rollout: observed K=" + std::to_string(f.agent_count()) +
                                       ", model expects K=" +
                                       std::to_string(model.config.agent_count));
        }
    }

    NoGradGuard no_grad;
    Rng rng(0);  // inference path never draws (dropout disabled)
    const std::int64_t k = model.config.agent_count;
    std::vector<FrameSnapshot> frames = task.observed;
    std::vector<FrameSnapshot> predicted;
    predicted.reserve(static_cast<std::size_t>(task.horizon));
    for (std::int64_t step = 0; step < task.horizon; ++step) {
        const Tensor g = encode_sequence(std::span<const FrameSnapshot>(frames.data(), frames.size()),
                                         model.spatial, model.config.spatial);
        const Tensor g_hat = tcn_forward(g, model.config.tcn, model.tcn, /*train=*/false, rng);
        const Tensor decoded = model.decode(g_hat);
        FrameSnapshot next = column_to_frame(decoded, decoded.dim(1) - 1, k);
        frames.push_back(next);
        predicted.push_back(std::move(next));
    }
    return predicted;
}

std::vector<FrameSnapshot> velocity_baseline(const PredictionTask& task) {
    if (task.horizon < 1) throw ParameterError("velocity_baseline: horizon must be >= 1");
    if (task.observed.size() < 2) {
        throw DataError("velocity_baseline: needs at least 2 observed frames");
    }
    const auto& last = task.observed.back();
    const auto& prev = task.observed[task.observed.size() - 2];
    if (last.agent_count() != prev.agent_count()) {
        throw DataError("velocity_baseline: inconsistent agent count in observations");
    }
    const std::size_t k = last.states.size();
    std::vector<FrameSnapshot> predicted(static_cast<std::size_t>(task.horizon));
    for (std::size_t a = 0; a < k; ++a) {
        const double vx = last.states[a].x - prev.states[a].x;
        const double vy = last.states[a].y - prev.states[a].y;
        for (std::int64_t i = 0; i < task.horizon; ++i) {
            auto& frame = predicted[static_cast<std::size_t>(i)];
            if (frame.states.size() != k) frame.states.resize(k);
            frame.states[a] = {last.states[a].x + static_cast<double>(i + 1) * vx,
                               last.states[a].y + static_cast<double>(i + 1) * vy};
        }
    }
    return predicted;
}

ModelConfig uniform_aggregation_variant(ModelConfig config) {
    config.spatial.aggregation = Aggregation::Uniform;
    return config;
}

}  // namespace tjf
