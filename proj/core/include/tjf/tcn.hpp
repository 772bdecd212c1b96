#pragma once

#include <cstdint>
#include <vector>

#include "tjf/ops.hpp"
#include "tjf/rng.hpp"
#include "tjf/tensor.hpp"

namespace tjf {

/// Stack shape of the temporal module: `levels` residual blocks with
/// dilations 1, 2, 4, ..., 2^(levels-1).
struct TcnConfig {
    std::int64_t levels = 4;
    std::int64_t kernel_size = 3;
    std::int64_t channels = 64;
    double dropout_rate = 0.1;

    std::vector<std::int64_t> dilations() const;

    /// Past positions visible to one output: 1 + 2*(f-1)*(2^levels - 1),
    /// two dilated convolutions per block.
    std::int64_t receptive_field() const;
    bool covers(std::int64_t window_length) const { return receptive_field() >= window_length; }

    void validate() const;
};

/// One weight-normalized causal convolution: effective kernel is
/// gain * direction / ||direction|| per output channel, plus a bias.
struct ConvLayerParams {
    Tensor direction;  // [C_out x C_in x f]
    Tensor gain;       // [C_out]
    Tensor bias;       // [C_out]

    static ConvLayerParams init(std::int64_t c_out, std::int64_t c_in, std::int64_t f, Rng& rng);
    Tensor effective_kernel() const { return weight_norm(direction, gain); }
};

struct ResidualBlockParams {
    ConvLayerParams conv1;
    ConvLayerParams conv2;
    Tensor projection;  // [C_out x C_in x 1]; defined iff C_in != C_out

    static ResidualBlockParams init(std::int64_t c_in, std::int64_t c_out, std::int64_t f,
                                    Rng& rng);
};

struct TcnParams {
    std::vector<ResidualBlockParams> blocks;
    Tensor output_kernel;  // [d_z x channels x 1]
    Tensor output_bias;    // [d_z]

    static TcnParams init(std::int64_t d_z, const TcnConfig& config, Rng& rng);
};

/// o = relu(skip(x) + R(x)) where R is conv->relu->dropout twice, both
/// convolutions causal at the given dilation. skip is the identity, or the
/// 1x1 projection when the channel counts differ.
Tensor residual_block(const Tensor& x, const ResidualBlockParams& params, std::int64_t dilation,
                      double dropout_rate, bool train, Rng& rng);

/// Full stack over a [d_z x T] embedding sequence; column t of the output is
/// the prediction for the column t+1 of the input, computed from columns
/// <= t only.
Tensor tcn_forward(const Tensor& g, const TcnConfig& config, const TcnParams& params, bool train,
                   Rng& rng);

}  // namespace tjf
