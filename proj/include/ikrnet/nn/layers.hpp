#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ikrnet/nn/ops.hpp"
#include "ikrnet/nn/tensor.hpp"

namespace ikrnet::nn {

using Rng = std::mt19937_64;

template <typename T>
struct NamedTensor {
    std::string name;
    Tensor<T> tensor;
};

// Owns the named trainable parameters and non-trainable buffers (batchnorm
// running statistics) of a model, in registration order.
template <typename T>
class ParameterStore {
public:
    // Throws ConfigError on a duplicate name.
    Tensor<T> add_parameter(std::string name, Tensor<T> tensor);
    Tensor<T> add_buffer(std::string name, Tensor<T> tensor);

    const std::vector<NamedTensor<T>>& parameters() const { return parameters_; }
    const std::vector<NamedTensor<T>>& buffers() const { return buffers_; }
    std::size_t parameter_count() const;
    void zero_grad();

private:
    void check_unique(const std::string& name) const;

    std::vector<NamedTensor<T>> parameters_;
    std::vector<NamedTensor<T>> buffers_;
};

// U(-bound, bound) with bound = sqrt(6 / fan_in).
template <typename T>
Tensor<T> kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng);
template <typename T>
Tensor<T> uniform(Shape shape, double bound, Rng& rng);

template <typename T>
struct Conv1dLayer {
    Tensor<T> weight;
    std::optional<Tensor<T>> bias;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t groups = 1;

    Tensor<T> operator()(const Tensor<T>& x) const { return conv1d(x, weight, bias, stride, padding, groups); }
};

template <typename T>
Conv1dLayer<T> make_conv1d(ParameterStore<T>& store, const std::string& name, std::size_t in_channels,
                           std::size_t out_channels, std::size_t kernel, std::size_t stride, std::size_t padding,
                           std::size_t groups, bool with_bias, Rng& rng);

template <typename T>
struct LinearLayer {
    Tensor<T> weight;
    std::optional<Tensor<T>> bias;

    Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias); }
};

template <typename T>
LinearLayer<T> make_linear(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
                           Rng& rng);

template <typename T>
struct BatchNormLayer {
    Tensor<T> gamma;
    Tensor<T> beta;
    Tensor<T> running_mean;
    Tensor<T> running_var;

    Tensor<T> operator()(const Tensor<T>& x, bool training) {
        return batchnorm1d(x, gamma, beta, running_mean, running_var, BatchNormOptions{training, 0.1, 1e-5});
    }
};

template <typename T>
BatchNormLayer<T> make_batchnorm(ParameterStore<T>& store, const std::string& name, std::size_t channels);

// Squeeze-and-excite gate: global average pool over L, FC down by the
// reduction ratio, ReLU, FC back up, sigmoid, channel-wise rescale.
template <typename T>
struct SqueezeExciteWeights {
    LinearLayer<T> reduce;
    LinearLayer<T> expand;
};

template <typename T>
SqueezeExciteWeights<T> make_squeeze_excite(ParameterStore<T>& store, const std::string& name,
                                            std::size_t channels, std::size_t reduction, Rng& rng);

template <typename T>
Tensor<T> squeeze_excite(const Tensor<T>& input, const SqueezeExciteWeights<T>& weights);

// Gate layout along the 4H axis: input, forget, cell, output.
template <typename T>
struct LstmWeights {
    Tensor<T> w_ih;  // [4H, I]
    Tensor<T> w_hh;  // [4H, H]
    Tensor<T> bias;  // [4H]

    std::size_t hidden() const { return w_hh.dim(1); }
    std::size_t input() const { return w_ih.dim(1); }
};

// U(+-1/sqrt(H)) weights, zero biases except the forget gate at 1.
template <typename T>
LstmWeights<T> make_lstm(ParameterStore<T>& store, const std::string& name, std::size_t input, std::size_t hidden,
                         Rng& rng);

template <typename T>
std::pair<Tensor<T>, Tensor<T>> lstm_cell(const Tensor<T>& x_t, const Tensor<T>& h_prev, const Tensor<T>& c_prev,
                                          const LstmWeights<T>& weights);

template <typename T>
struct BiLstmLayerWeights {
    LstmWeights<T> forward;
    LstmWeights<T> backward;
};

template <typename T>
std::vector<BiLstmLayerWeights<T>> make_bilstm(ParameterStore<T>& store, const std::string& name,
                                               std::size_t input, std::size_t hidden, std::size_t layers, Rng& rng);

// seq [B,T,I] -> [B,T,2H]; per step the forward half comes first.
template <typename T>
Tensor<T> bilstm(const Tensor<T>& seq, const std::vector<BiLstmLayerWeights<T>>& layers);

// Single direction over a sequence [B,T,I] -> [B,T,H].
template <typename T>
Tensor<T> lstm_sequence(const Tensor<T>& seq, const LstmWeights<T>& weights, bool reverse);

}  // namespace ikrnet::nn
