#include "tjf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace tjf {

namespace {

using detail::TensorImpl;
using detail::ensure_grad;

thread_local bool g_track_kinks = false;
thread_local double g_min_kink = std::numeric_limits<double>::infinity();

void require_rank(const Tensor& t, std::int64_t rank, const char* op) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank-" + std::to_string(rank) +
                             " tensor, got " + shape_str(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

// Accumulating raw GEMM: out[m x n] += op(A) * op(B).
void gemm_accum(const double* a, std::int64_t ar, std::int64_t ac, bool ta, const double* b,
                std::int64_t br, std::int64_t bc, bool tb, double* out) {
    const std::int64_t m = ta ? ac : ar;
    const std::int64_t k = ta ? ar : ac;
    const std::int64_t n = tb ? br : bc;
    if (!ta && !tb) {
        for (std::int64_t i = 0; i < m; ++i) {
            double* out_row = out + i * n;
            for (std::int64_t t = 0; t < k; ++t) {
                const double av = a[i * ac + t];
                const double* b_row = b + t * n;
                for (std::int64_t j = 0; j < n; ++j) out_row[j] += av * b_row[j];
            }
        }
    } else if (!ta && tb) {
        for (std::int64_t i = 0; i < m; ++i) {
            const double* a_row = a + i * ac;
            for (std::int64_t j = 0; j < n; ++j) {
                const double* b_row = b + j * bc;
                double acc = 0.0;
                for (std::int64_t t = 0; t < k; ++t) acc += a_row[t] * b_row[t];
                out[i * n + j] += acc;
            }
        }
    } else if (ta && !tb) {
        for (std::int64_t t = 0; t < k; ++t) {
            const double* a_row = a + t * ac;
            const double* b_row = b + t * n;
            for (std::int64_t i = 0; i < m; ++i) {
                const double av = a_row[i];
                double* out_row = out + i * n;
                for (std::int64_t j = 0; j < n; ++j) out_row[j] += av * b_row[j];
            }
        }
    } else {
        for (std::int64_t i = 0; i < m; ++i) {
            for (std::int64_t j = 0; j < n; ++j) {
                const double* b_row = b + j * bc;
                double acc = 0.0;
                for (std::int64_t t = 0; t < k; ++t) acc += a[t * ac + i] * b_row[t];
                out[i * n + j] += acc;
            }
        }
    }
}

}  // namespace

void set_kink_tracking(bool enabled) { g_track_kinks = enabled; }
double min_kink_distance() { return g_min_kink; }
void reset_kink_distance() { g_min_kink = std::numeric_limits<double>::infinity(); }

Tensor gemm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
    require_rank(a, 2, "gemm");
    require_rank(b, 2, "gemm");
    const std::int64_t ar = a.dim(0), ac = a.dim(1), br = b.dim(0), bc = b.dim(1);
    const std::int64_t m = trans_a ? ac : ar;
    const std::int64_t k = trans_a ? ar : ac;
    const std::int64_t k2 = trans_b ? bc : br;
    const std::int64_t n = trans_b ? br : bc;
    if (k != k2) {
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                             (trans_a ? "^T" : "") + " x " + shape_str(b.shape()) +
                             (trans_b ? "^T" : ""));
    }

    std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
    gemm_accum(a.data(), ar, ac, trans_a, b.data(), br, bc, trans_b, out.data());

    auto ai = a.impl();
    auto bi = b.impl();
    return detail::make_op_result(
        {m, n}, std::move(out), "gemm", {a, b}, [ai, bi, trans_a, trans_b](const TensorImpl& o) {
            const std::int64_t ar = ai->shape[0], ac = ai->shape[1];
            const std::int64_t br = bi->shape[0], bc = bi->shape[1];
            const std::int64_t m = trans_a ? ac : ar;
            const std::int64_t n = trans_b ? br : bc;
            if (ai->requires_grad) {
                auto& ga = ensure_grad(*ai);
                if (!trans_a) {
                    // dA = dC * op(B)^T
                    gemm_accum(o.grad.data(), m, n, false, bi->data.data(), br, bc, !trans_b,
                               ga.data());
                } else {
                    // dA = op(B) * dC^T
                    gemm_accum(bi->data.data(), br, bc, trans_b, o.grad.data(), m, n, true,
                               ga.data());
                }
            }
            if (bi->requires_grad) {
                auto& gb = ensure_grad(*bi);
                if (!trans_b) {
                    // dB = op(A)^T * dC
                    gemm_accum(ai->data.data(), ar, ac, !trans_a, o.grad.data(), m, n, false,
                               gb.data());
                } else {
                    // dB = dC^T * op(A)
                    gemm_accum(o.grad.data(), m, n, true, ai->data.data(), ar, ac, trans_a,
                               gb.data());
                }
            }
        });
}

Tensor matmul(const Tensor& a, const Tensor& b) { return gemm(a, b, false, false); }

Tensor transpose(const Tensor& m) {
    require_rank(m, 2, "transpose");
    const std::int64_t r = m.dim(0), c = m.dim(1);
    std::vector<double> out(static_cast<std::size_t>(r * c));
    for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < c; ++j) out[j * r + i] = m.data()[i * c + j];
    auto mi = m.impl();
    return detail::make_op_result({c, r}, std::move(out), "transpose", {m},
                                  [mi, r, c](const TensorImpl& o) {
                                      if (!mi->requires_grad) return;
                                      auto& g = ensure_grad(*mi);
                                      for (std::int64_t j = 0; j < c; ++j)
                                          for (std::int64_t i = 0; i < r; ++i)
                                              g[i * c + j] += o.grad[j * r + i];
                                  });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.values());
    const double* bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
    auto ai = a.impl();
    auto bi = b.impl();
    return detail::make_op_result(a.shape(), std::move(out), "add", {a, b},
                                  [ai, bi](const TensorImpl& o) {
                                      for (auto* t : {ai.get(), bi.get()}) {
                                          if (!t->requires_grad) continue;
                                          auto& g = ensure_grad(*t);
                                          for (std::size_t i = 0; i < g.size(); ++i)
                                              g[i] += o.grad[i];
                                      }
                                  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.values());
    const double* bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
    auto ai = a.impl();
    auto bi = b.impl();
    return detail::make_op_result(
        a.shape(), std::move(out), "mul", {a, b}, [ai, bi](const TensorImpl& o) {
            if (ai->requires_grad) {
                auto& g = ensure_grad(*ai);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * bi->data[i];
            }
            if (bi->requires_grad) {
                auto& g = ensure_grad(*bi);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * ai->data[i];
            }
        });
}

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.values());
    for (auto& v : out) v *= factor;
    auto ai = a.impl();
    return detail::make_op_result(a.shape(), std::move(out), "scale", {a},
                                  [ai, factor](const TensorImpl& o) {
                                      if (!ai->requires_grad) return;
                                      auto& g = ensure_grad(*ai);
                                      for (std::size_t i = 0; i < g.size(); ++i)
                                          g[i] += factor * o.grad[i];
                                  });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.values());
    for (auto& v : out) {
        if (g_track_kinks) g_min_kink = std::min(g_min_kink, std::fabs(v));
        if (v < 0.0) v = 0.0;
    }
    auto xi = x.impl();
    return detail::make_op_result(x.shape(), std::move(out), "relu", {x},
                                  [xi](const TensorImpl& o) {
                                      if (!xi->requires_grad) return;
                                      auto& g = ensure_grad(*xi);
                                      for (std::size_t i = 0; i < g.size(); ++i)
                                          if (xi->data[i] >= 0.0) g[i] += o.grad[i];
                                  });
}

Tensor leaky_relu(const Tensor& x, double slope) {
    if (!(slope > 0.0 && slope < 1.0)) {
        throw ParameterError("leaky_relu: slope must lie in (0,1), got " + std::to_string(slope));
    }
    std::vector<double> out(x.values());
    for (auto& v : out) {
        if (g_track_kinks) g_min_kink = std::min(g_min_kink, std::fabs(v));
        if (v < 0.0) v *= slope;
    }
    auto xi = x.impl();
    return detail::make_op_result(x.shape(), std::move(out), "leaky_relu", {x},
                                  [xi, slope](const TensorImpl& o) {
                                      if (!xi->requires_grad) return;
                                      auto& g = ensure_grad(*xi);
                                      for (std::size_t i = 0; i < g.size(); ++i)
                                          g[i] += (xi->data[i] >= 0.0 ? 1.0 : slope) * o.grad[i];
                                  });
}

Tensor tanh_op(const Tensor& x) {
    std::vector<double> out(x.values());
    for (auto& v : out) v = std::tanh(v);
    auto xi = x.impl();
    return detail::make_op_result(x.shape(), std::move(out), "tanh", {x},
                                  [xi](const TensorImpl& o) {
                                      if (!xi->requires_grad) return;
                                      auto& g = ensure_grad(*xi);
                                      for (std::size_t i = 0; i < g.size(); ++i)
                                          g[i] += (1.0 - o.data[i] * o.data[i]) * o.grad[i];
                                  });
}

Tensor concat(std::span<const Tensor> parts, std::int64_t axis) {
    if (parts.empty()) throw ParameterError("concat: no inputs");
    const std::int64_t rank = parts[0].rank();
    if (rank != 1 && rank != 2) {
        throw DimensionError("concat: supports rank-1/rank-2 tensors, got " +
                             shape_str(parts[0].shape()));
    }
    if (axis < 0 || axis >= rank) throw ParameterError("concat: axis out of range");
    for (const auto& p : parts) {
        if (p.rank() != rank) throw DimensionError("concat: mixed ranks");
        for (std::int64_t d = 0; d < rank; ++d) {
            if (d != axis && p.dim(d) != parts[0].dim(d)) {
                throw DimensionError("concat: shape mismatch " + shape_str(parts[0].shape()) +
                                     " vs " + shape_str(p.shape()) + " on axis " +
                                     std::to_string(d));
            }
        }
    }

    std::int64_t total = 0;
    for (const auto& p : parts) total += p.dim(axis);

    std::vector<Tensor> inputs(parts.begin(), parts.end());
    std::vector<std::shared_ptr<TensorImpl>> impls;
    impls.reserve(parts.size());
    for (const auto& p : parts) impls.push_back(p.impl());

    if (rank == 1 || axis == 0) {
        // Row-major: concatenating along axis 0 is a flat copy.
        std::vector<std::int64_t> shape = parts[0].shape();
        shape[static_cast<std::size_t>(axis)] = total;
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(total) *
                    (rank == 2 ? static_cast<std::size_t>(parts[0].dim(1)) : 1));
        for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
        return detail::make_op_result(std::move(shape), std::move(out), "concat",
                                      std::move(inputs), [impls](const TensorImpl& o) {
                                          std::size_t offset = 0;
                                          for (const auto& in : impls) {
                                              const std::size_t n = in->data.size();
                                              if (in->requires_grad) {
                                                  auto& g = ensure_grad(*in);
                                                  for (std::size_t i = 0; i < n; ++i)
                                                      g[i] += o.grad[offset + i];
                                              }
                                              offset += n;
                                          }
                                      });
    }

    // rank == 2, axis == 1
    const std::int64_t rows = parts[0].dim(0);
    std::vector<double> out(static_cast<std::size_t>(rows * total));
    std::int64_t col = 0;
    for (const auto& p : parts) {
        const std::int64_t c = p.dim(1);
        for (std::int64_t r = 0; r < rows; ++r) {
            std::memcpy(out.data() + r * total + col, p.data() + r * c,
                        static_cast<std::size_t>(c) * sizeof(double));
        }
        col += c;
    }
    return detail::make_op_result(
        {rows, total}, std::move(out), "concat", std::move(inputs),
        [impls, rows, total](const TensorImpl& o) {
            std::int64_t col = 0;
            for (const auto& in : impls) {
                const std::int64_t c = in->shape[1];
                if (in->requires_grad) {
                    auto& g = ensure_grad(*in);
                    for (std::int64_t r = 0; r < rows; ++r)
                        for (std::int64_t j = 0; j < c; ++j)
                            g[r * c + j] += o.grad[static_cast<std::size_t>(r * total + col + j)];
                }
                col += c;
            }
        });
}

Tensor reshape(const Tensor& x, std::vector<std::int64_t> shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    if (n != x.size()) {
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                             shape_str(shape));
    }
    auto xi = x.impl();
    return detail::make_op_result(std::move(shape), x.values(), "reshape", {x},
                                  [xi](const TensorImpl& o) {
                                      if (!xi->requires_grad) return;
                                      auto& g = ensure_grad(*xi);
                                      for (std::size_t i = 0; i < g.size(); ++i)
                                          g[i] += o.grad[i];
                                  });
}

Tensor sum_over_axis(const Tensor& x, std::int64_t axis) {
    if (x.rank() == 1) {
        if (axis != 0) throw ParameterError("sum_over_axis: axis out of range");
        double acc = 0.0;
        for (auto v : x.values()) acc += v;
        auto xi = x.impl();
        return detail::make_op_result({1}, {acc}, "sum_over_axis", {x},
                                      [xi](const TensorImpl& o) {
                                          if (!xi->requires_grad) return;
                                          auto& g = ensure_grad(*xi);
                                          for (auto& v : g) v += o.grad[0];
                                      });
    }
    require_rank(x, 2, "sum_over_axis");
    if (axis != 0 && axis != 1) throw ParameterError("sum_over_axis: axis out of range");
    const std::int64_t r = x.dim(0), c = x.dim(1);
    auto xi = x.impl();
    if (axis == 0) {
        std::vector<double> out(static_cast<std::size_t>(c), 0.0);
        for (std::int64_t i = 0; i < r; ++i)
            for (std::int64_t j = 0; j < c; ++j) out[j] += x.data()[i * c + j];
        return detail::make_op_result({c}, std::move(out), "sum_over_axis", {x},
                                      [xi, r, c](const TensorImpl& o) {
                                          if (!xi->requires_grad) return;
                                          auto& g = ensure_grad(*xi);
                                          for (std::int64_t i = 0; i < r; ++i)
                                              for (std::int64_t j = 0; j < c; ++j)
                                                  g[i * c + j] += o.grad[j];
                                      });
    }
    std::vector<double> out(static_cast<std::size_t>(r), 0.0);
    for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < c; ++j) out[i] += x.data()[i * c + j];
    return detail::make_op_result({r}, std::move(out), "sum_over_axis", {x},
                                  [xi, r, c](const TensorImpl& o) {
                                      if (!xi->requires_grad) return;
                                      auto& g = ensure_grad(*xi);
                                      for (std::int64_t i = 0; i < r; ++i)
                                          for (std::int64_t j = 0; j < c; ++j)
                                              g[i * c + j] += o.grad[i];
                                  });
}

Tensor sum_all(const Tensor& x) {
    double acc = 0.0;
    for (auto v : x.values()) acc += v;
    auto xi = x.impl();
    return detail::make_op_result({1}, {acc}, "sum_all", {x}, [xi](const TensorImpl& o) {
        if (!xi->requires_grad) return;
        auto& g = ensure_grad(*xi);
        for (auto& v : g) v += o.grad[0];
    });
}

namespace {

void softmax_row(const double* in, double* out, std::int64_t n) {
    double mx = in[0];
    for (std::int64_t i = 1; i < n; ++i) mx = std::max(mx, in[i]);
    double sum = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        out[i] = std::exp(in[i] - mx);
        sum += out[i];
    }
    for (std::int64_t i = 0; i < n; ++i) out[i] /= sum;
}

void softmax_row_backward(const double* p, const double* dout, double* din, std::int64_t n) {
    double dot = 0.0;
    for (std::int64_t i = 0; i < n; ++i) dot += p[i] * dout[i];
    for (std::int64_t i = 0; i < n; ++i) din[i] += p[i] * (dout[i] - dot);
}

}  // namespace

Tensor softmax(const Tensor& v) {
    require_rank(v, 1, "softmax");
    const std::int64_t n = v.dim(0);
    std::vector<double> out(static_cast<std::size_t>(n));
    softmax_row(v.data(), out.data(), n);
    auto vi = v.impl();
    return detail::make_op_result({n}, std::move(out), "softmax", {v},
                                  [vi, n](const TensorImpl& o) {
                                      if (!vi->requires_grad) return;
                                      auto& g = ensure_grad(*vi);
                                      softmax_row_backward(o.data.data(), o.grad.data(), g.data(),
                                                           n);
                                  });
}

Tensor softmax_rows(const Tensor& m) {
    require_rank(m, 2, "softmax_rows");
    const std::int64_t r = m.dim(0), c = m.dim(1);
    std::vector<double> out(static_cast<std::size_t>(r * c));
    for (std::int64_t i = 0; i < r; ++i) softmax_row(m.data() + i * c, out.data() + i * c, c);
    auto mi = m.impl();
    return detail::make_op_result({r, c}, std::move(out), "softmax_rows", {m},
                                  [mi, r, c](const TensorImpl& o) {
                                      if (!mi->requires_grad) return;
                                      auto& g = ensure_grad(*mi);
                                      for (std::int64_t i = 0; i < r; ++i)
                                          softmax_row_backward(o.data.data() + i * c,
                                                               o.grad.data() + i * c,
                                                               g.data() + i * c, c);
                                  });
}

Tensor dilated_causal_conv1d(const Tensor& input, const Tensor& kernel, std::int64_t dilation) {
    require_rank(input, 2, "dilated_causal_conv1d");
    require_rank(kernel, 3, "dilated_causal_conv1d");
    if (dilation < 1) {
        throw ParameterError("dilated_causal_conv1d: dilation must be >= 1, got " +
                             std::to_string(dilation));
    }
    const std::int64_t c_in = input.dim(0), length = input.dim(1);
    const std::int64_t c_out = kernel.dim(0), kc_in = kernel.dim(1), f = kernel.dim(2);
    if (kc_in != c_in) {
        throw DimensionError("dilated_causal_conv1d: kernel expects " + std::to_string(kc_in) +
                             " input channels, input has " + std::to_string(c_in));
    }

    // Implicit left padding of (f-1)*dilation zeros: taps reaching past the
    // left edge contribute nothing, so they are simply skipped.
    std::vector<double> out(static_cast<std::size_t>(c_out * length), 0.0);
    for (std::int64_t co = 0; co < c_out; ++co) {
        double* out_row = out.data() + co * length;
        for (std::int64_t ci = 0; ci < c_in; ++ci) {
            const double* in_row = input.data() + ci * length;
            const double* k_row = kernel.data() + (co * c_in + ci) * f;
            for (std::int64_t i = 0; i < f; ++i) {
                const double w = k_row[i];
                const std::int64_t start = i * dilation;
                for (std::int64_t s = start; s < length; ++s) out_row[s] += w * in_row[s - start];
            }
        }
    }

    auto ii = input.impl();
    auto ki = kernel.impl();
    return detail::make_op_result(
        {c_out, length}, std::move(out), "dilated_causal_conv1d", {input, kernel},
        [ii, ki, dilation, c_in, c_out, length, f](const TensorImpl& o) {
            if (ki->requires_grad) {
                auto& gk = ensure_grad(*ki);
                for (std::int64_t co = 0; co < c_out; ++co) {
                    const double* dout_row = o.grad.data() + co * length;
                    for (std::int64_t ci = 0; ci < c_in; ++ci) {
                        const double* in_row = ii->data.data() + ci * length;
                        double* gk_row = gk.data() + (co * c_in + ci) * f;
                        for (std::int64_t i = 0; i < f; ++i) {
                            const std::int64_t start = i * dilation;
                            double acc = 0.0;
                            for (std::int64_t s = start; s < length; ++s)
                                acc += dout_row[s] * in_row[s - start];
                            gk_row[i] += acc;
                        }
                    }
                }
            }
            if (ii->requires_grad) {
                auto& gi = ensure_grad(*ii);
                for (std::int64_t co = 0; co < c_out; ++co) {
                    const double* dout_row = o.grad.data() + co * length;
                    for (std::int64_t ci = 0; ci < c_in; ++ci) {
                        double* gi_row = gi.data() + ci * length;
                        const double* k_row = ki->data.data() + (co * c_in + ci) * f;
                        for (std::int64_t i = 0; i < f; ++i) {
                            const double w = k_row[i];
                            const std::int64_t start = i * dilation;
                            for (std::int64_t s = start; s < length; ++s)
                                gi_row[s - start] += w * dout_row[s];
                        }
                    }
                }
            }
        });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
    require_rank(x, 2, "add_channel_bias");
    require_rank(bias, 1, "add_channel_bias");
    const std::int64_t c = x.dim(0), l = x.dim(1);
    if (bias.dim(0) != c) {
        throw DimensionError("add_channel_bias: bias " + shape_str(bias.shape()) +
                             " does not match channels of " + shape_str(x.shape()));
    }
    std::vector<double> out(x.values());
    for (std::int64_t ch = 0; ch < c; ++ch) {
        const double b = bias.data()[ch];
        for (std::int64_t s = 0; s < l; ++s) out[static_cast<std::size_t>(ch * l + s)] += b;
    }
    auto xi = x.impl();
    auto bi = bias.impl();
    return detail::make_op_result({c, l}, std::move(out), "add_channel_bias", {x, bias},
                                  [xi, bi, c, l](const TensorImpl& o) {
                                      if (xi->requires_grad) {
                                          auto& g = ensure_grad(*xi);
                                          for (std::size_t i = 0; i < g.size(); ++i)
                                              g[i] += o.grad[i];
                                      }
                                      if (bi->requires_grad) {
                                          auto& g = ensure_grad(*bi);
                                          for (std::int64_t ch = 0; ch < c; ++ch) {
                                              double acc = 0.0;
                                              for (std::int64_t s = 0; s < l; ++s)
                                                  acc += o.grad[static_cast<std::size_t>(ch * l + s)];
                                              g[ch] += acc;
                                          }
                                      }
                                  });
}

Tensor weight_norm(const Tensor& v, const Tensor& gain) {
    if (v.rank() < 2) throw DimensionError("weight_norm: expected rank >= 2, got " + shape_str(v.shape()));
    require_rank(gain, 1, "weight_norm");
    const std::int64_t c_out = v.dim(0);
    if (gain.dim(0) != c_out) {
        throw DimensionError("weight_norm: gain " + shape_str(gain.shape()) +
                             " does not match leading dim of " + shape_str(v.shape()));
    }
    const std::int64_t row = v.size() / c_out;

    std::vector<double> out(static_cast<std::size_t>(v.size()));
    std::vector<double> norms(static_cast<std::size_t>(c_out));
    for (std::int64_t c = 0; c < c_out; ++c) {
        const double* vr = v.data() + c * row;
        double sq = 0.0;
        for (std::int64_t i = 0; i < row; ++i) sq += vr[i] * vr[i];
        const double n = std::sqrt(sq);
        if (n < 1e-300) throw NumericalError("weight_norm: zero-direction row " + std::to_string(c));
        norms[static_cast<std::size_t>(c)] = n;
        const double s = gain.data()[c] / n;
        for (std::int64_t i = 0; i < row; ++i) out[static_cast<std::size_t>(c * row + i)] = s * vr[i];
    }

    auto vi = v.impl();
    auto gi = gain.impl();
    return detail::make_op_result(
        v.shape(), std::move(out), "weight_norm", {v, gain},
        [vi, gi, c_out, row, norms](const TensorImpl& o) {
            for (std::int64_t c = 0; c < c_out; ++c) {
                const double n = norms[static_cast<std::size_t>(c)];
                const double g = gi->data[static_cast<std::size_t>(c)];
                const double* vr = vi->data.data() + c * row;
                const double* dw = o.grad.data() + c * row;
                double u_dot_dw = 0.0;
                for (std::int64_t i = 0; i < row; ++i) u_dot_dw += (vr[i] / n) * dw[i];
                if (gi->requires_grad) ensure_grad(*gi)[static_cast<std::size_t>(c)] += u_dot_dw;
                if (vi->requires_grad) {
                    auto& gv = ensure_grad(*vi);
                    const double s = g / n;
                    for (std::int64_t i = 0; i < row; ++i) {
                        gv[static_cast<std::size_t>(c * row + i)] +=
                            s * (dw[i] - u_dot_dw * (vr[i] / n));
                    }
                }
            }
        });
}

Tensor dropout(const Tensor& x, double p, bool train, Rng& rng, bool per_channel) {
    if (p < 0.0 || p >= 1.0) {
        throw ParameterError("dropout: rate must lie in [0,1), got " + std::to_string(p));
    }
    if (!train || p == 0.0) return x;

    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask;
    if (per_channel) {
        require_rank(x, 2, "dropout(per_channel)");
        const std::int64_t c = x.dim(0);
        mask.resize(static_cast<std::size_t>(c));
        for (auto& m : mask) m = (rng.uniform() >= p) ? keep_scale : 0.0;
    } else {
        mask.resize(static_cast<std::size_t>(x.size()));
        for (auto& m : mask) m = (rng.uniform() >= p) ? keep_scale : 0.0;
    }

    std::vector<double> out(x.values());
    if (per_channel) {
        const std::int64_t c = x.dim(0), l = x.dim(1);
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const double m = mask[static_cast<std::size_t>(ch)];
            for (std::int64_t s = 0; s < l; ++s) out[static_cast<std::size_t>(ch * l + s)] *= m;
        }
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    }

    auto xi = x.impl();
    return detail::make_op_result(
        x.shape(), std::move(out), "dropout", {x},
        [xi, mask = std::move(mask), per_channel](const TensorImpl& o) {
            if (!xi->requires_grad) return;
            auto& g = ensure_grad(*xi);
            if (per_channel) {
                const std::int64_t c = xi->shape[0], l = xi->shape[1];
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    const double m = mask[static_cast<std::size_t>(ch)];
                    for (std::int64_t s = 0; s < l; ++s)
                        g[static_cast<std::size_t>(ch * l + s)] +=
                            m * o.grad[static_cast<std::size_t>(ch * l + s)];
                }
            } else {
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += mask[i] * o.grad[i];
            }
        });
}

Tensor attention_scores(const Tensor& z, const Tensor& a) {
    require_rank(z, 2, "attention_scores");
    require_rank(a, 1, "attention_scores");
    const std::int64_t d = z.dim(0), k = z.dim(1);
    if (a.dim(0) != 2 * d) {
        throw DimensionError("attention_scores: scoring vector " + shape_str(a.shape()) +
                             " must have length 2*" + std::to_string(d));
    }

    // E[i][j] = a[:d].z_i + a[d:].z_j
    std::vector<double> s1(static_cast<std::size_t>(k), 0.0);
    std::vector<double> s2(static_cast<std::size_t>(k), 0.0);
    for (std::int64_t r = 0; r < d; ++r) {
        const double a1 = a.data()[r], a2 = a.data()[d + r];
        const double* zr = z.data() + r * k;
        for (std::int64_t i = 0; i < k; ++i) {
            s1[static_cast<std::size_t>(i)] += a1 * zr[i];
            s2[static_cast<std::size_t>(i)] += a2 * zr[i];
        }
    }
    std::vector<double> out(static_cast<std::size_t>(k * k));
    for (std::int64_t i = 0; i < k; ++i)
        for (std::int64_t j = 0; j < k; ++j)
            out[static_cast<std::size_t>(i * k + j)] =
                s1[static_cast<std::size_t>(i)] + s2[static_cast<std::size_t>(j)];

    auto zi = z.impl();
    auto ai = a.impl();
    return detail::make_op_result(
        {k, k}, std::move(out), "attention_scores", {z, a},
        [zi, ai, d, k](const TensorImpl& o) {
            std::vector<double> ds1(static_cast<std::size_t>(k), 0.0);
            std::vector<double> ds2(static_cast<std::size_t>(k), 0.0);
            for (std::int64_t i = 0; i < k; ++i) {
                for (std::int64_t j = 0; j < k; ++j) {
                    const double go = o.grad[static_cast<std::size_t>(i * k + j)];
                    ds1[static_cast<std::size_t>(i)] += go;
                    ds2[static_cast<std::size_t>(j)] += go;
                }
            }
            if (ai->requires_grad) {
                auto& ga = ensure_grad(*ai);
                for (std::int64_t r = 0; r < d; ++r) {
                    const double* zr = zi->data.data() + r * k;
                    double acc1 = 0.0, acc2 = 0.0;
                    for (std::int64_t i = 0; i < k; ++i) {
                        acc1 += zr[i] * ds1[static_cast<std::size_t>(i)];
                        acc2 += zr[i] * ds2[static_cast<std::size_t>(i)];
                    }
                    ga[static_cast<std::size_t>(r)] += acc1;
                    ga[static_cast<std::size_t>(d + r)] += acc2;
                }
            }
            if (zi->requires_grad) {
                auto& gz = ensure_grad(*zi);
                for (std::int64_t r = 0; r < d; ++r) {
                    const double a1 = ai->data[static_cast<std::size_t>(r)];
                    const double a2 = ai->data[static_cast<std::size_t>(d + r)];
                    for (std::int64_t i = 0; i < k; ++i) {
                        gz[static_cast<std::size_t>(r * k + i)] +=
                            a1 * ds1[static_cast<std::size_t>(i)] +
                            a2 * ds2[static_cast<std::size_t>(i)];
                    }
                }
            }
        });
}

Tensor l2_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "l2_loss");
    const std::size_t n = pred.values().size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred.data()[i] - target.data()[i];
        acc += d * d;
    }
    acc /= static_cast<double>(n);
    auto pi = pred.impl();
    auto ti = target.impl();
    return detail::make_op_result(
        {1}, {acc}, "l2_loss", {pred, target}, [pi, ti, n](const TensorImpl& o) {
            const double s = 2.0 * o.grad[0] / static_cast<double>(n);
            if (pi->requires_grad) {
                auto& g = ensure_grad(*pi);
                for (std::size_t i = 0; i < n; ++i) g[i] += s * (pi->data[i] - ti->data[i]);
            }
            if (ti->requires_grad) {
                auto& g = ensure_grad(*ti);
                for (std::size_t i = 0; i < n; ++i) g[i] -= s * (pi->data[i] - ti->data[i]);
            }
        });
}

Tensor l2_loss_masked_rows(const Tensor& pred, const Tensor& target,
                           const std::vector<double>& row_mask) {
    require_same_shape(pred, target, "l2_loss");
    require_rank(pred, 2, "l2_loss_masked_rows");
    const std::int64_t r = pred.dim(0), c = pred.dim(1);
    if (static_cast<std::int64_t>(row_mask.size()) != r) {
        throw DimensionError("l2_loss_masked_rows: mask length " +
                             std::to_string(row_mask.size()) + " does not match rows of " +
                             shape_str(pred.shape()));
    }
    std::int64_t kept_rows = 0;
    for (auto m : row_mask)
        if (m != 0.0) ++kept_rows;
    if (kept_rows == 0) throw ParameterError("l2_loss_masked_rows: mask keeps no rows");
    const double denom = static_cast<double>(kept_rows * c);

    double acc = 0.0;
    for (std::int64_t i = 0; i < r; ++i) {
        if (row_mask[static_cast<std::size_t>(i)] == 0.0) continue;
        for (std::int64_t j = 0; j < c; ++j) {
            const double d = pred.data()[i * c + j] - target.data()[i * c + j];
            acc += d * d;
        }
    }
    acc /= denom;

    auto pi = pred.impl();
    auto ti = target.impl();
    return detail::make_op_result(
        {1}, {acc}, "l2_loss_masked_rows", {pred, target},
        [pi, ti, row_mask, r, c, denom](const TensorImpl& o) {
            const double s = 2.0 * o.grad[0] / denom;
            for (std::int64_t i = 0; i < r; ++i) {
                if (row_mask[static_cast<std::size_t>(i)] == 0.0) continue;
                for (std::int64_t j = 0; j < c; ++j) {
                    const std::size_t idx = static_cast<std::size_t>(i * c + j);
                    const double d = s * (pi->data[idx] - ti->data[idx]);
                    if (pi->requires_grad) ensure_grad(*pi)[idx] += d;
                    if (ti->requires_grad) ensure_grad(*ti)[idx] -= d;
                }
            }
        });
}

}  // namespace tjf
