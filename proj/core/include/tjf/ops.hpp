#pragma once

#include <span>

#include "tjf/rng.hpp"
#include "tjf/tensor.hpp"

namespace tjf {

// --- linear algebra ---------------------------------------------------------

/// C = op(A) * op(B) with optional transposes (row-major).
Tensor gemm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b);

/// Plain matrix product A[m x k] * B[k x n].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& m);

// --- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor tanh_op(const Tensor& x);

// --- shape ------------------------------------------------------------------

Tensor concat(std::span<const Tensor> parts, std::int64_t axis);
Tensor reshape(const Tensor& x, std::vector<std::int64_t> shape);
Tensor sum_over_axis(const Tensor& x, std::int64_t axis);
Tensor sum_all(const Tensor& x);

// --- neural-net primitives --------------------------------------------------

/// Numerically stable softmax of a rank-1 tensor (max subtraction).
Tensor softmax(const Tensor& v);

/// Row-wise softmax of a rank-2 tensor; each output row sums to 1.
Tensor softmax_rows(const Tensor& m);

/// Causal convolution over a [C_in x L] sequence with a [C_out x C_in x f]
/// kernel. The input is implicitly left-padded with (f-1)*dilation zeros so
/// the output keeps length L; output position s therefore depends only on
/// input positions <= s.
Tensor dilated_causal_conv1d(const Tensor& input, const Tensor& kernel, std::int64_t dilation);

/// Adds bias[c] to every position of channel c of a [C x L] tensor.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

/// Weight-norm reparameterization: w_c = gain[c] * v_c / ||v_c||, with the
/// norm taken over everything but the leading (output-channel) axis.
Tensor weight_norm(const Tensor& v, const Tensor& gain);

/// Inverted dropout. Identity when !train or p == 0. With per_channel set,
/// one mask entry per row of a [C x L] tensor, shared across positions.
Tensor dropout(const Tensor& x, double p, bool train, Rng& rng, bool per_channel = false);

/// Pairwise pre-activation attention scores for a [d x K] embedding matrix
/// and a [2d] scoring vector: E[i][j] = a[:d].z_i + a[d:].z_j, equal to the
/// dot product of a with the concatenation (z_i || z_j).
Tensor attention_scores(const Tensor& z, const Tensor& a);

/// Mean over all elements of the squared difference.
Tensor l2_loss(const Tensor& pred, const Tensor& target);

/// l2 loss restricted to rows where row_mask[r] != 0 (mean over kept
/// elements). Used for team-conditional training.
Tensor l2_loss_masked_rows(const Tensor& pred, const Tensor& target,
                           const std::vector<double>& row_mask);

// --- kink tracking (finite-difference test support) -------------------------

/// While enabled, relu/leaky_relu record the smallest |pre-activation| they
/// see, letting gradient checks reject configurations too close to a kink.
void set_kink_tracking(bool enabled);
double min_kink_distance();
void reset_kink_distance();

}  // namespace tjf
