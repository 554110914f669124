#include "ikrnet/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "ikrnet/errors.hpp"

namespace ikrnet::nn {

template <typename T>
void ParameterStore<T>::check_unique(const std::string& name) const {
    auto same = [&](const NamedTensor<T>& n) { return n.name == name; };
    if (std::any_of(parameters_.begin(), parameters_.end(), same) ||
        std::any_of(buffers_.begin(), buffers_.end(), same)) {
        throw ConfigError("duplicate parameter name '" + name + "'");
    }
}

template <typename T>
Tensor<T> ParameterStore<T>::add_parameter(std::string name, Tensor<T> tensor) {
    check_unique(name);
    tensor.set_requires_grad(true);
    parameters_.push_back({std::move(name), tensor});
    return tensor;
}

template <typename T>
Tensor<T> ParameterStore<T>::add_buffer(std::string name, Tensor<T> tensor) {
    check_unique(name);
    tensor.set_requires_grad(false);
    buffers_.push_back({std::move(name), tensor});
    return tensor;
}

template <typename T>
std::size_t ParameterStore<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters_) n += p.tensor.numel();
    return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
    for (auto& p : parameters_) p.tensor.zero_grad();
}

template <typename T>
Tensor<T> uniform(Shape shape, double bound, Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<T> values(numel(shape));
    for (auto& v : values) v = static_cast<T>(dist(rng));
    return Tensor<T>::from(std::move(shape), std::move(values));
}

template <typename T>
Tensor<T> kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    return uniform<T>(std::move(shape), std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1))), rng);
}

template <typename T>
Conv1dLayer<T> make_conv1d(ParameterStore<T>& store, const std::string& name, std::size_t in_channels,
                           std::size_t out_channels, std::size_t kernel, std::size_t stride, std::size_t padding,
                           std::size_t groups, bool with_bias, Rng& rng) {
    if (groups == 0 || in_channels % groups != 0 || out_channels % groups != 0) {
        throw ConfigError(name + ": channels not divisible by groups");
    }
    Conv1dLayer<T> layer;
    const std::size_t fan_in = (in_channels / groups) * kernel;
    layer.weight = store.add_parameter(name + ".weight",
                                       kaiming_uniform<T>({out_channels, in_channels / groups, kernel}, fan_in, rng));
    if (with_bias) {
        layer.bias = store.add_parameter(name + ".bias", Tensor<T>::zeros({out_channels}));
    }
    layer.stride = stride;
    layer.padding = padding;
    layer.groups = groups;
    return layer;
}

template <typename T>
LinearLayer<T> make_linear(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
                           Rng& rng) {
    LinearLayer<T> layer;
    layer.weight = store.add_parameter(name + ".weight", kaiming_uniform<T>({out, in}, in, rng));
    layer.bias = store.add_parameter(name + ".bias", Tensor<T>::zeros({out}));
    return layer;
}

template <typename T>
BatchNormLayer<T> make_batchnorm(ParameterStore<T>& store, const std::string& name, std::size_t channels) {
    BatchNormLayer<T> bn;
    bn.gamma = store.add_parameter(name + ".gamma", Tensor<T>::full({channels}, T(1)));
    bn.beta = store.add_parameter(name + ".beta", Tensor<T>::zeros({channels}));
    bn.running_mean = store.add_buffer(name + ".running_mean", Tensor<T>::zeros({channels}));
    bn.running_var = store.add_buffer(name + ".running_var", Tensor<T>::full({channels}, T(1)));
    return bn;
}

template <typename T>
SqueezeExciteWeights<T> make_squeeze_excite(ParameterStore<T>& store, const std::string& name,
                                            std::size_t channels, std::size_t reduction, Rng& rng) {
    if (reduction < 1) {
        throw ConfigError(name + ": squeeze-excite reduction must be >= 1");
    }
    const std::size_t hidden = std::max<std::size_t>(1, channels / reduction);
    return {make_linear(store, name + ".reduce", channels, hidden, rng),
            make_linear(store, name + ".expand", hidden, channels, rng)};
}

template <typename T>
Tensor<T> squeeze_excite(const Tensor<T>& input, const SqueezeExciteWeights<T>& weights) {
    if (input.rank() != 3) {
        throw ShapeError("squeeze_excite: expected [B,C,L], got " + shape_str(input.shape()));
    }
    const Tensor<T> pooled = mean_last(input);  // [B,C]
    const Tensor<T> gate = sigmoid(weights.expand(relu(weights.reduce(pooled))));
    return scale_channels(input, gate);
}

template <typename T>
LstmWeights<T> make_lstm(ParameterStore<T>& store, const std::string& name, std::size_t input, std::size_t hidden,
                         Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    LstmWeights<T> w;
    w.w_ih = store.add_parameter(name + ".w_ih", uniform<T>({4 * hidden, input}, bound, rng));
    w.w_hh = store.add_parameter(name + ".w_hh", uniform<T>({4 * hidden, hidden}, bound, rng));
    auto bias = Tensor<T>::zeros({4 * hidden});
    std::fill_n(bias.data().begin() + static_cast<std::ptrdiff_t>(hidden), hidden, T(1));
    w.bias = store.add_parameter(name + ".bias", bias);
    return w;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> lstm_cell(const Tensor<T>& x_t, const Tensor<T>& h_prev, const Tensor<T>& c_prev,
                                          const LstmWeights<T>& w) {
    const std::size_t hidden = w.hidden();
    if (w.w_ih.dim(0) != 4 * hidden || w.w_hh.dim(0) != 4 * hidden || w.bias.numel() != 4 * hidden) {
        throw ShapeError("lstm_cell: inconsistent weight shapes");
    }
    if (h_prev.rank() != 2 || h_prev.dim(1) != hidden || c_prev.shape() != h_prev.shape() ||
        x_t.rank() != 2 || x_t.dim(0) != h_prev.dim(0)) {
        throw ShapeError("lstm_cell: state " + shape_str(h_prev.shape()) + " / input " + shape_str(x_t.shape()) +
                         " do not match hidden size " + std::to_string(hidden));
    }
    const Tensor<T> gates = add(linear(x_t, w.w_ih, std::optional<Tensor<T>>(w.bias)),
                                linear(h_prev, w.w_hh, std::optional<Tensor<T>>()));
    const Tensor<T> in_gate = sigmoid(slice(gates, 1, 0, hidden));
    const Tensor<T> forget_gate = sigmoid(slice(gates, 1, hidden, 2 * hidden));
    const Tensor<T> cell_gate = tanh(slice(gates, 1, 2 * hidden, 3 * hidden));
    const Tensor<T> out_gate = sigmoid(slice(gates, 1, 3 * hidden, 4 * hidden));
    Tensor<T> c_t = add(mul(forget_gate, c_prev), mul(in_gate, cell_gate));
    Tensor<T> h_t = mul(out_gate, tanh(c_t));
    return {h_t, c_t};
}

template <typename T>
std::vector<BiLstmLayerWeights<T>> make_bilstm(ParameterStore<T>& store, const std::string& name,
                                               std::size_t input, std::size_t hidden, std::size_t layers, Rng& rng) {
    std::vector<BiLstmLayerWeights<T>> out;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = l == 0 ? input : 2 * hidden;
        const std::string prefix = name + ".layer" + std::to_string(l);
        BiLstmLayerWeights<T> layer;
        layer.forward = make_lstm(store, prefix + ".fwd", in, hidden, rng);
        layer.backward = make_lstm(store, prefix + ".bwd", in, hidden, rng);
        out.push_back(std::move(layer));
    }
    return out;
}

template <typename T>
Tensor<T> lstm_sequence(const Tensor<T>& seq, const LstmWeights<T>& weights, bool reverse) {
    if (seq.rank() != 3 || seq.dim(1) < 1) {
        throw ShapeError("lstm_sequence: expected [B,T,I] with T >= 1, got " + shape_str(seq.shape()));
    }
    const std::size_t batch = seq.dim(0), steps = seq.dim(1);
    Tensor<T> h = Tensor<T>::zeros({batch, weights.hidden()});
    Tensor<T> c = Tensor<T>::zeros({batch, weights.hidden()});
    std::vector<Tensor<T>> outputs(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        const std::size_t t = reverse ? steps - 1 - i : i;
        std::tie(h, c) = lstm_cell(select(seq, 1, t), h, c, weights);
        outputs[t] = h;
    }
    return stack(outputs, 1);
}

template <typename T>
Tensor<T> bilstm(const Tensor<T>& seq, const std::vector<BiLstmLayerWeights<T>>& layers) {
    if (layers.empty()) {
        throw ConfigError("bilstm: at least one layer required");
    }
    Tensor<T> x = seq;
    for (const auto& layer : layers) {
        const Tensor<T> fwd = lstm_sequence(x, layer.forward, false);
        const Tensor<T> bwd = lstm_sequence(x, layer.backward, true);
        x = concat(std::vector<Tensor<T>>{fwd, bwd}, 2);
    }
    return x;
}

#define IKRNET_INSTANTIATE_LAYERS(T)                                                                            \
    template class ParameterStore<T>;                                                                           \
    template Tensor<T> uniform<T>(Shape, double, Rng&);                                                         \
    template Tensor<T> kaiming_uniform<T>(Shape, std::size_t, Rng&);                                            \
    template Conv1dLayer<T> make_conv1d(ParameterStore<T>&, const std::string&, std::size_t, std::size_t,        \
                                        std::size_t, std::size_t, std::size_t, std::size_t, bool, Rng&);        \
    template LinearLayer<T> make_linear(ParameterStore<T>&, const std::string&, std::size_t, std::size_t, Rng&); \
    template BatchNormLayer<T> make_batchnorm(ParameterStore<T>&, const std::string&, std::size_t);             \
    template SqueezeExciteWeights<T> make_squeeze_excite(ParameterStore<T>&, const std::string&, std::size_t,    \
                                                         std::size_t, Rng&);                                    \
    template Tensor<T> squeeze_excite(const Tensor<T>&, const SqueezeExciteWeights<T>&);                        \
    template LstmWeights<T> make_lstm(ParameterStore<T>&, const std::string&, std::size_t, std::size_t, Rng&);  \
    template std::pair<Tensor<T>, Tensor<T>> lstm_cell(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                                       const LstmWeights<T>&);                                  \
    template std::vector<BiLstmLayerWeights<T>> make_bilstm(ParameterStore<T>&, const std::string&, std::size_t, \
                                                            std::size_t, std::size_t, Rng&);                    \
    template Tensor<T> bilstm(const Tensor<T>&, const std::vector<BiLstmLayerWeights<T>>&);                     \
    template Tensor<T> lstm_sequence(const Tensor<T>&, const LstmWeights<T>&, bool);

IKRNET_INSTANTIATE_LAYERS(float)
IKRNET_INSTANTIATE_LAYERS(double)

}  // namespace ikrnet::nn
