#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ikrnet/nn/tensor.hpp"

namespace ikrnet::nn {

// Elementwise and structural primitives. Shapes must match exactly; there is
// no broadcasting.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> tanh(const Tensor<T>& a);

// [M,K] x [K,N] -> [M,N]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// x [B,I], weight [O,I], bias [O] -> [B,O]
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const std::optional<Tensor<T>>& bias);

template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
// [B,C,L] -> [B,L,C]
template <typename T> Tensor<T> transpose_last2(const Tensor<T>& a);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
template <typename T> Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t begin, std::size_t end);
// Drops `axis` by picking one index along it.
template <typename T> Tensor<T> select(const Tensor<T>& a, std::size_t axis, std::size_t index);
// Inserts a new axis at `axis`; all parts must share a shape.
template <typename T> Tensor<T> stack(const std::vector<Tensor<T>>& parts, std::size_t axis);

// Mean over every element -> [1].
template <typename T> Tensor<T> mean(const Tensor<T>& a);
// Mean over the last axis: [..., L] -> [...].
template <typename T> Tensor<T> mean_last(const Tensor<T>& a);

// x [B,C,L] scaled by s [B,C] per channel.
template <typename T> Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s);

// input [B,C_in,L], weight [C_out,C_in/groups,k], bias [C_out].
// L_out = floor((L + 2 padding - k) / stride) + 1, cross-correlation semantics.
template <typename T>
Tensor<T> conv1d(const Tensor<T>& input, const Tensor<T>& weight, const std::optional<Tensor<T>>& bias,
                 std::size_t stride, std::size_t padding, std::size_t groups);

// Bin i averages [floor(i L / out), ceil((i + 1) L / out)).
template <typename T> Tensor<T> adaptive_avg_pool1d(const Tensor<T>& input, std::size_t out_len);

struct BatchNormOptions {
    bool training = true;
    double momentum = 0.1;
    double eps = 1e-5;
};

// input [B,C,L]. Training mode normalizes with batch statistics and updates
// the running buffers in place (unbiased variance, like the usual frameworks);
// inference mode uses the running buffers.
template <typename T>
Tensor<T> batchnorm1d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                      Tensor<T>& running_mean, Tensor<T>& running_var, const BatchNormOptions& options);

inline constexpr double kBceEps = 1e-7;

// Mean over the batch of -[y log p + (1 - y) log(1 - p)], p clamped to
// [eps, 1 - eps]. Labels carry no gradient.
template <typename T> Tensor<T> bce_loss(const Tensor<T>& scores, const Tensor<T>& labels);

}  // namespace ikrnet::nn
