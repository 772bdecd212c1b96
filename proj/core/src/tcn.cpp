#include "tjf/tcn.hpp"

#include <cmath>

namespace tjf {

std::vector<std::int64_t> TcnConfig::dilations() const {
    std::vector<std::int64_t> d(static_cast<std::size_t>(levels));
    std::int64_t v = 1;
    for (auto& x : d) {
        x = v;
        v *= 2;
    }
    return d;
}

std::int64_t TcnConfig::receptive_field() const {
    return 1 + 2 * (kernel_size - 1) * ((std::int64_t{1} << levels) - 1);
}

void TcnConfig::validate() const {
    if (levels < 1) throw ConfigError("tcn: levels must be >= 1");
    if (kernel_size < 1) throw ConfigError("tcn: kernel_size must be >= 1");
    if (channels < 1) throw ConfigError("tcn: channels must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("tcn: dropout_rate must lie in [0,1)");
}

namespace {

Tensor init_kernel(std::int64_t c_out, std::int64_t c_in, std::int64_t f, Rng& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(c_in * f));
    std::vector<double> v(static_cast<std::size_t>(c_out * c_in * f));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor::from_vector({c_out, c_in, f}, std::move(v), true);
}

}  // namespace

ConvLayerParams ConvLayerParams::init(std::int64_t c_out, std::int64_t c_in, std::int64_t f,
                                      Rng& rng) {
    ConvLayerParams p;
    p.direction = init_kernel(c_out, c_in, f, rng);
    // Gains start at the row norms so the effective kernel equals the raw
    // initialization.
    std::vector<double> g(static_cast<std::size_t>(c_out));
    const std::int64_t row = c_in * f;
    for (std::int64_t c = 0; c < c_out; ++c) {
        double sq = 0.0;
        for (std::int64_t i = 0; i < row; ++i) {
            const double v = p.direction.data()[c * row + i];
            sq += v * v;
        }
        g[static_cast<std::size_t>(c)] = std::sqrt(sq);
    }
    p.gain = Tensor::from_vector({c_out}, std::move(g), true);
    p.bias = Tensor::zeros({c_out}, true);
    return p;
}

ResidualBlockParams ResidualBlockParams::init(std::int64_t c_in, std::int64_t c_out,
                                              std::int64_t f, Rng& rng) {
    ResidualBlockParams p;
    p.conv1 = ConvLayerParams::init(c_out, c_in, f, rng);
    p.conv2 = ConvLayerParams::init(c_out, c_out, f, rng);
    if (c_in != c_out) p.projection = init_kernel(c_out, c_in, 1, rng);
    return p;
}

TcnParams TcnParams::init(std::int64_t d_z, const TcnConfig& config, Rng& rng) {
    config.validate();
    TcnParams p;
    std::int64_t c_in = d_z;
    for (std::int64_t level = 0; level < config.levels; ++level) {
        p.blocks.push_back(ResidualBlockParams::init(c_in, config.channels, config.kernel_size, rng));
        c_in = config.channels;
    }
    p.output_kernel = init_kernel(d_z, config.channels, 1, rng);
    p.output_bias = Tensor::zeros({d_z}, true);
    return p;
}

Tensor residual_block(const Tensor& x, const ResidualBlockParams& params, std::int64_t dilation,
                      double dropout_rate, bool train, Rng& rng) {
    const std::int64_t c_in = x.dim(0);
    const std::int64_t c_out = params.conv1.direction.dim(0);
    if (params.conv1.direction.dim(1) != c_in) {
        throw ConfigError("residual_block: input has " + std::to_string(c_in) +
                          " channels, conv expects " +
                          std::to_string(params.conv1.direction.dim(1)));
    }
    if (c_in != c_out && !params.projection.defined()) {
        throw ConfigError("residual_block: channel change " + std::to_string(c_in) + " -> " +
                          std::to_string(c_out) + " requires a 1x1 projection");
    }

    Tensor h = dilated_causal_conv1d(x, params.conv1.effective_kernel(), dilation);
    h = add_channel_bias(h, params.conv1.bias);
    h = relu(h);
    h = dropout(h, dropout_rate, train, rng, /*per_channel=*/true);

    h = dilated_causal_conv1d(h, params.conv2.effective_kernel(), dilation);
    h = add_channel_bias(h, params.conv2.bias);
    h = relu(h);
    h = dropout(h, dropout_rate, train, rng, /*per_channel=*/true);

    const Tensor skip =
        params.projection.defined() ? dilated_causal_conv1d(x, params.projection, 1) : x;
    return relu(add(skip, h));
}

Tensor tcn_forward(const Tensor& g, const TcnConfig& config, const TcnParams& params, bool train,
                   Rng& rng) {
    if (g.rank() != 2) {
        throw DimensionError("tcn_forward: expected [d_z x T] input, got " + shape_str(g.shape()));
    }
    if (static_cast<std::size_t>(config.levels) != params.blocks.size()) {
        throw ConfigError("tcn_forward: config declares " + std::to_string(config.levels) +
                          " levels, parameters hold " + std::to_string(params.blocks.size()));
    }

    Tensor h = g;
    std::int64_t dilation = 1;
    for (const auto& block : params.blocks) {
        h = residual_block(h, block, dilation, config.dropout_rate, train, rng);
        dilation *= 2;
    }
    h = dilated_causal_conv1d(h, params.output_kernel, 1);
    return add_channel_bias(h, params.output_bias);
}

}  // namespace tjf
