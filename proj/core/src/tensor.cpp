#include "tjf/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace tjf {

namespace {

thread_local bool g_grad_enabled = true;

std::int64_t checked_element_count(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d <= 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
        n *= d;
    }
    return n;
}

}  // namespace

std::string shape_str(const std::vector<std::int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor Tensor::from_impl(std::shared_ptr<detail::TensorImpl> impl) {
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
}

Tensor Tensor::zeros(std::vector<std::int64_t> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<std::int64_t> shape, double value, bool requires_grad) {
    auto impl = std::make_shared<detail::TensorImpl>();
    const auto n = checked_element_count(shape);
    impl->shape = std::move(shape);
    impl->data.assign(static_cast<std::size_t>(n), value);
    impl->requires_grad = requires_grad;
    return from_impl(std::move(impl));
}

Tensor Tensor::from_vector(std::vector<std::int64_t> shape, std::vector<double> values,
                           bool requires_grad) {
    const auto n = checked_element_count(shape);
    if (n != static_cast<std::int64_t>(values.size())) {
        throw DimensionError("value count " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(shape));
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return from_impl(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_vector({1}, {value}, requires_grad);
}

double Tensor::item() const {
    if (size() != 1) throw DimensionError("item() requires a single-element tensor, got " + shape_str(shape()));
    return impl_->data[0];
}

double Tensor::at(std::int64_t i) const {
    if (rank() != 1) throw DimensionError("at(i) requires a rank-1 tensor, got " + shape_str(shape()));
    return impl_->data[static_cast<std::size_t>(i)];
}

double Tensor::at(std::int64_t i, std::int64_t j) const {
    if (rank() != 2) throw DimensionError("at(i,j) requires a rank-2 tensor, got " + shape_str(shape()));
    return impl_->data[static_cast<std::size_t>(i * dim(1) + j)];
}

void Tensor::set_requires_grad(bool v) {
    if (impl_->node) throw ParameterError("requires_grad can only be toggled on leaf tensors");
    impl_->requires_grad = v;
}

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) throw Error("tensor has no gradient; call backward() first");
    return impl_->grad;
}

Tensor Tensor::detached_copy() const {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    return from_impl(std::move(impl));
}

void Tensor::backward(double seed) const {
    if (!defined()) throw Error("backward() on an undefined tensor");
    if (size() != 1) {
        throw DimensionError("backward() requires a scalar output, got " + shape_str(shape()));
    }

    if (!impl_->node) {
        detail::ensure_grad(*impl_)[0] += seed;
        return;
    }

    // Reverse topological order over the recorded DAG: a node runs only after
    // every consumer of its output has contributed to the output gradient.
    std::vector<detail::TensorImpl*> order;
    std::unordered_set<detail::TensorImpl*> seen;
    std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
    stack.emplace_back(impl_.get(), 0);
    seen.insert(impl_.get());
    while (!stack.empty()) {
        auto& [t, next_input] = stack.back();
        if (next_input >= t->node->inputs.size()) {
            order.push_back(t);
            stack.pop_back();
            continue;
        }
        detail::TensorImpl* child = t->node->inputs[next_input++].get();
        if (child->node && seen.insert(child).second) {
            stack.emplace_back(child, 0);
        }
    }

    // Interior gradients belong to this sweep alone; only leaves accumulate
    // across repeated backward calls.
    for (auto* t : order) t->grad.clear();
    detail::ensure_grad(*impl_)[0] += seed;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::TensorImpl* t = *it;
        if (!t->grad.empty()) t->node->backward(*t);
    }
}

namespace detail {

Tensor make_op_result(std::vector<std::int64_t> shape, std::vector<double> data, const char* op,
                      std::vector<Tensor> inputs,
                      std::function<void(const TensorImpl&)> backward) {
    Tensor out = Tensor::from_vector(std::move(shape), std::move(data));
    bool needs_grad = false;
    if (g_grad_enabled) {
        for (const auto& in : inputs) {
            if (in.requires_grad()) {
                needs_grad = true;
                break;
            }
        }
    }
    if (needs_grad) {
        auto node = std::make_shared<Node>();
        node->op = op;
        node->inputs.reserve(inputs.size());
        for (const auto& in : inputs) node->inputs.push_back(in.impl());
        node->backward = std::move(backward);
        out.impl()->node = std::move(node);
        out.impl()->requires_grad = true;
    }
    return out;
}

}  // namespace detail

}  // namespace tjf
