#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ikrnet/model/config.hpp"
#include "ikrnet/nn/layers.hpp"

namespace ikrnet::model {

using nn::Tensor;

// score >= 0.5 -> 1 (ties go to the positive class).
int classify_score(double score);

template <typename T>
struct BlockWeights {
    // Inverted residual: optional 1x1 expand, depthwise k, SE on the hidden
    // channels, 1x1 project. Basic: two k-convs plus an optional 1x1 shortcut.
    std::optional<nn::Conv1dLayer<T>> expand;
    std::optional<nn::BatchNormLayer<T>> expand_bn;
    nn::Conv1dLayer<T> conv;
    std::optional<nn::BatchNormLayer<T>> conv_bn;
    std::optional<nn::SqueezeExciteWeights<T>> se;
    nn::Conv1dLayer<T> project;
    std::optional<nn::BatchNormLayer<T>> project_bn;
    std::optional<nn::Conv1dLayer<T>> shortcut;
    std::optional<nn::BatchNormLayer<T>> shortcut_bn;
    bool residual = false;
};

template <typename T>
struct BranchWeights {
    nn::Conv1dLayer<T> stem;
    std::optional<nn::BatchNormLayer<T>> stem_bn;
    std::vector<BlockWeights<T>> blocks;
    std::optional<nn::Conv1dLayer<T>> out_proj;
};

template <typename T>
class IKrNetModel {
public:
    // Throws ConfigError on an invalid config. Deterministic given the seed.
    static IKrNetModel build(const IKrNetConfig& config, std::uint64_t seed);

    // batch [B,1,L] -> scores [B] in [0,1]. training selects batch statistics
    // for normalization (and updates the running buffers).
    Tensor<T> forward(const Tensor<T>& batch, bool training = false);

    // Pooled output of one branch, [B, branch_out_channels, branch_out_len].
    Tensor<T> branch_features(const Tensor<T>& batch, std::size_t branch, bool training = false);

    std::vector<int> classify(const Tensor<T>& batch);

    std::size_t count_parameters() const { return store_.parameter_count(); }
    std::size_t min_input_length() const { return config_.largest_front_kernel(); }

    const IKrNetConfig& config() const { return config_; }
    nn::ParameterStore<T>& store() { return store_; }
    const nn::ParameterStore<T>& store() const { return store_; }

private:
    void check_input(const Tensor<T>& batch) const;
    Tensor<T> run_block(BlockWeights<T>& w, const Tensor<T>& x, bool training);
    Tensor<T> run_branch(BranchWeights<T>& w, const Tensor<T>& x, bool training);

    IKrNetConfig config_;
    nn::ParameterStore<T> store_;
    std::vector<BranchWeights<T>> branches_;
    std::vector<nn::BiLstmLayerWeights<T>> bilstm_;
    std::optional<nn::LinearLayer<T>> spatial_fc_;
    nn::LinearLayer<T> head_hidden_;
    nn::LinearLayer<T> head_out_;
};

extern template class IKrNetModel<float>;
extern template class IKrNetModel<double>;

}  // namespace ikrnet::model
