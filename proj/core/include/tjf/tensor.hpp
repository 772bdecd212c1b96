#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tjf/errors.hpp"

namespace tjf {

class Tensor;

namespace detail {

struct Node;

struct TensorImpl {
    std::vector<std::int64_t> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // empty until the first accumulation
    std::shared_ptr<Node> node;  // producing operation; null for leaves
};

/// One recorded operation on the tape. `backward` reads the output gradient
/// and accumulates into the gradients of the captured inputs.
struct Node {
    const char* op = "";
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::function<void(const TensorImpl& out)> backward;
};

/// Zero-fills the gradient buffer on first use.
inline std::vector<double>& ensure_grad(TensorImpl& t) {
    if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0);
    return t.grad;
}

}  // namespace detail

std::string shape_str(const std::vector<std::int64_t>& shape);

/// Dense n-dimensional array of doubles, row-major, participating in a
/// recorded reverse-mode computation graph. Copies are shallow handles.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::int64_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::int64_t> shape, double value, bool requires_grad = false);
    static Tensor from_vector(std::vector<std::int64_t> shape, std::vector<double> values,
                              bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<std::int64_t>& shape() const { return impl_->shape; }
    std::int64_t rank() const { return static_cast<std::int64_t>(impl_->shape.size()); }
    std::int64_t dim(std::int64_t axis) const { return impl_->shape[static_cast<std::size_t>(axis)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(impl_->data.size()); }

    double* data() { return impl_->data.data(); }
    const double* data() const { return impl_->data.data(); }
    std::vector<double>& values() { return impl_->data; }
    const std::vector<double>& values() const { return impl_->data; }

    /// Value of a rank-0/size-1 tensor.
    double item() const;
    /// Element access for rank-1 and rank-2 tensors (test convenience).
    double at(std::int64_t i) const;
    double at(std::int64_t i, std::int64_t j) const;

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v);
    bool has_grad() const { return impl_ && !impl_->grad.empty(); }
    const std::vector<double>& grad() const;
    void zero_grad() { impl_->grad.clear(); }

    /// Reverse-mode sweep from this scalar. Gradients accumulate (sum) into
    /// every requires_grad tensor reachable through the recorded graph;
    /// repeated calls keep accumulating until zero_grad().
    void backward(double seed = 1.0) const;

    /// Detached copy: same values, no graph, no gradient requirement.
    Tensor detached_copy() const;

    const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
    static Tensor from_impl(std::shared_ptr<detail::TensorImpl> impl);

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

/// Gradient recording is enabled by default; a NoGradGuard suspends it for
/// the current thread (inference, rollout, validation passes).
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

namespace detail {
/// Builds an op result: attaches a tape node when recording is on and any
/// input requires a gradient.
Tensor make_op_result(std::vector<std::int64_t> shape, std::vector<double> data, const char* op,
                      std::vector<Tensor> inputs,
                      std::function<void(const TensorImpl&)> backward);
}  // namespace detail

}  // namespace tjf
