#include "ikrnet/nn/tensor.hpp"

#include <algorithm>
#include <random>
#include <unordered_map>

#include "ikrnet/errors.hpp"

namespace ikrnet::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
    auto node = std::make_shared<Node<T>>();
    node->data.assign(nn::numel(shape), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
    if (nn::numel(shape) != values.size()) {
        throw ShapeError("tensor of shape " + shape_str(shape) + " cannot hold " + std::to_string(values.size()) +
                         " values");
    }
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
    return from({1}, {value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
    if (numel() != 1) {
        throw ShapeError("item() on a tensor with " + std::to_string(numel()) + " elements");
    }
    return node_->data[0];
}

template <typename T>
void Tensor<T>::backward(const BackwardOptions& options) {
    if (numel() != 1) {
        throw ShapeError("backward() without a seed needs a scalar output, got " + shape_str(shape()));
    }
    const T one = T(1);
    backward(std::span<const T>(&one, 1), options);
}

template <typename T>
void Tensor<T>::backward(std::span<const T> seed, const BackwardOptions& options) {
    if (seed.size() != numel()) {
        throw ShapeError("backward seed has " + std::to_string(seed.size()) + " values for output " +
                         shape_str(shape()));
    }
    if (!node_->requires_grad) {
        throw InvalidArgument("backward() on a tensor that does not require grad");
    }
    // Count consumers inside the subgraph reachable from this output.
    std::unordered_map<Node<T>*, std::size_t> pending;
    std::vector<Node<T>*> stack{node_.get()};
    pending[node_.get()] = 0;
    while (!stack.empty()) {
        Node<T>* n = stack.back();
        stack.pop_back();
        for (const auto& p : n->parents) {
            if (!p->requires_grad) continue;
            auto [it, inserted] = pending.try_emplace(p.get(), 0);
            ++it->second;
            if (inserted) stack.push_back(p.get());
        }
    }

    auto& g = node_->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];

    // Kahn's algorithm: a node runs once every consumer has pushed its gradient.
    std::vector<Node<T>*> ready{node_.get()};
    std::mt19937_64 rng(options.order_seed.value_or(0));
    while (!ready.empty()) {
        std::size_t pick = ready.size() - 1;
        if (options.order_seed) {
            pick = std::uniform_int_distribution<std::size_t>(0, ready.size() - 1)(rng);
        }
        Node<T>* n = ready[pick];
        ready.erase(ready.begin() + static_cast<std::ptrdiff_t>(pick));
        if (n->backward && !n->grad.empty()) {
            n->backward(*n);
        }
        for (const auto& p : n->parents) {
            if (!p->requires_grad) continue;
            if (--pending[p.get()] == 0) ready.push_back(p.get());
        }
    }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
    auto node = std::make_shared<Node<T>>();
    node->shape = node_->shape;
    node->data = node_->data;
    return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
    auto t = detach();
    t.node_->requires_grad = node_->requires_grad;
    return t;
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::vector<std::shared_ptr<Node<T>>> parents,
                      BackwardFn<T> backward, const char* op) {
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->op = op;
    if (g_grad_enabled) {
        const bool any = std::any_of(parents.begin(), parents.end(),
                                     [](const auto& p) { return p && p->requires_grad; });
        if (any) {
            node->requires_grad = true;
            node->backward = std::move(backward);
            for (auto& p : parents) {
                if (p) node->parents.push_back(std::move(p));
            }
        }
    }
    return Tensor<T>(std::move(node));
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> make_result(Shape, std::vector<float>, std::vector<std::shared_ptr<Node<float>>>,
                                   BackwardFn<float>, const char*);
template Tensor<double> make_result(Shape, std::vector<double>, std::vector<std::shared_ptr<Node<double>>>,
                                    BackwardFn<double>, const char*);

}  // namespace ikrnet::nn
