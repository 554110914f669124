#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ikrnet::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
struct Node;

// Backward rule of an op: reads the output node's gradient and accumulates
// into the parents' gradient buffers.
template <typename T>
using BackwardFn = std::function<void(const Node<T>& out)>;

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until something accumulates into it
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node<T>>> parents;
    BackwardFn<T> backward;
    const char* op = "leaf";

    // Zero-initialized on first use.
    std::vector<T>& grad_buffer() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
        return grad;
    }
};

struct BackwardOptions {
    // When set, ready nodes are processed in a seeded random topological
    // order instead of the default stack order.
    std::optional<std::uint64_t> order_seed;
};

// Dense row-major tensor handle. Copies share the underlying node, the same
// way a graph edge does; use clone() for an independent buffer.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, T value, bool requires_grad = false);
    // Throws ShapeError when values.size() != numel(shape).
    static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
    static Tensor scalar(T value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<T> data() { return node_->data; }
    std::span<const T> data() const { return node_->data; }
    std::vector<T> to_vector() const { return node_->data; }
    T item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    bool has_grad() const { return node_->grad.size() == node_->data.size(); }
    // Empty span when no gradient has been accumulated.
    std::span<const T> grad() const { return node_->grad; }
    std::span<T> mutable_grad() { return node_->grad_buffer(); }
    void zero_grad() { node_->grad.clear(); }

    // Reverse-mode sweep from this scalar output.
    void backward(const BackwardOptions& options = {});
    // Same, seeded with an explicit output gradient of matching shape.
    void backward(std::span<const T> seed, const BackwardOptions& options = {});

    Tensor detach() const;
    Tensor clone() const;

    const std::shared_ptr<Node<T>>& node() const { return node_; }
    bool same_node(const Tensor& other) const { return node_ == other.node_; }

private:
    std::shared_ptr<Node<T>> node_;
};

// Disables graph recording on the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Builds an op output node. The backward rule is only attached when grad mode
// is on and some parent requires a gradient.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::vector<std::shared_ptr<Node<T>>> parents,
                      BackwardFn<T> backward, const char* op);

}  // namespace ikrnet::nn
