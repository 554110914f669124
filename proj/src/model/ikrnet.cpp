#include "ikrnet/model/ikrnet.hpp"

#include <string>

#include "ikrnet/errors.hpp"

namespace ikrnet::model {

int classify_score(double score) { return score >= 0.5 ? 1 : 0; }

namespace {

template <typename T>
struct Builder {
    nn::ParameterStore<T>& store;
    nn::Rng& rng;
    bool bn;

    nn::Conv1dLayer<T> conv(const std::string& name, std::size_t in, std::size_t out, std::size_t k,
                            std::size_t stride, std::size_t groups) {
        return nn::make_conv1d<T>(store, name, in, out, k, stride, k / 2, groups, !bn, rng);
    }
    std::optional<nn::BatchNormLayer<T>> norm(const std::string& name, std::size_t channels) {
        if (!bn) return std::nullopt;
        return nn::make_batchnorm<T>(store, name, channels);
    }

    BlockWeights<T> inverted(const std::string& name, std::size_t cin, std::size_t cout, std::size_t k,
                             std::size_t stride, std::size_t expansion, std::size_t reduction) {
        BlockWeights<T> b;
        const std::size_t hidden = cin * expansion;
        if (expansion != 1) {
            b.expand = conv(name + ".expand", cin, hidden, 1, 1, 1);
            b.expand_bn = norm(name + ".expand_bn", hidden);
        }
        b.conv = conv(name + ".depthwise", hidden, hidden, k, stride, hidden);
        b.conv_bn = norm(name + ".depthwise_bn", hidden);
        b.se = nn::make_squeeze_excite<T>(store, name + ".se", hidden, reduction, rng);
        b.project = conv(name + ".project", hidden, cout, 1, 1, 1);
        b.project_bn = norm(name + ".project_bn", cout);
        b.residual = stride == 1 && cin == cout;
        return b;
    }

    BlockWeights<T> basic(const std::string& name, std::size_t cin, std::size_t cout, std::size_t k,
                          std::size_t stride) {
        BlockWeights<T> b;
        b.conv = conv(name + ".conv1", cin, cout, k, stride, 1);
        b.conv_bn = norm(name + ".conv1_bn", cout);
        b.project = conv(name + ".conv2", cout, cout, k, 1, 1);
        b.project_bn = norm(name + ".conv2_bn", cout);
        if (stride != 1 || cin != cout) {
            b.shortcut = conv(name + ".shortcut", cin, cout, 1, stride, 1);
            b.shortcut_bn = norm(name + ".shortcut_bn", cout);
        }
        b.residual = true;
        return b;
    }
};

template <typename T>
Tensor<T> apply_norm(std::optional<nn::BatchNormLayer<T>>& bn, const Tensor<T>& x, bool training) {
    return bn ? (*bn)(x, training) : x;
}

}  // namespace

template <typename T>
IKrNetModel<T> IKrNetModel<T>::build(const IKrNetConfig& config, std::uint64_t seed) {
    config.validate();
    IKrNetModel m;
    m.config_ = config;
    nn::Rng rng(seed);
    Builder<T> b{m.store_, rng, config.use_batchnorm};

    for (std::size_t i = 0; i < config.branches.size(); ++i) {
        const auto [lk, k] = config.branches[i];
        const std::string name = "branch" + std::to_string(i);
        BranchWeights<T> br{b.conv(name + ".stem", 1, config.initial_filters, lk, 1, 1), std::nullopt, {}, {}};
        br.stem_bn = b.norm(name + ".stem_bn", config.initial_filters);
        std::size_t cin = config.initial_filters;
        for (std::size_t j = 0; j < config.n_blocks; ++j) {
            const std::size_t cout = config.block_channels(j);
            const std::string bname = name + ".block" + std::to_string(j);
            br.blocks.push_back(config.block_type == BlockType::Basic
                                    ? b.basic(bname, cin, cout, k, config.strides[j])
                                    : b.inverted(bname, cin, cout, k, config.strides[j], config.expansion_factor,
                                                 config.se_reduction));
            cin = cout;
        }
        if (cin != config.branch_out_channels) {
            br.out_proj = nn::make_conv1d<T>(m.store_, name + ".out_proj", cin, config.branch_out_channels, 1, 1, 0,
                                             1, true, rng);
        }
        m.branches_.push_back(std::move(br));
    }

    const std::size_t channels = config.branches.size() * config.branch_out_channels;
    const std::size_t flat = channels * config.branch_out_len;
    const std::size_t width = 2 * config.bilstm_hidden;
    std::size_t head_in = flat;
    if (config.bilstm_layers > 0) {
        m.bilstm_ = nn::make_bilstm<T>(m.store_, "bilstm", channels, config.bilstm_hidden, config.bilstm_layers, rng);
        if (config.use_skip_link) m.spatial_fc_ = nn::make_linear<T>(m.store_, "spatial_fc", flat, width, rng);
        head_in = width;
    }
    m.head_hidden_ = nn::make_linear<T>(m.store_, "head.hidden", head_in, width, rng);
    m.head_out_ = nn::make_linear<T>(m.store_, "head.out", width, 1, rng);
    return m;
}

template <typename T>
void IKrNetModel<T>::check_input(const Tensor<T>& batch) const {
    if (batch.rank() != 3 || batch.dim(1) != 1 || batch.dim(0) == 0) {
        throw ShapeError("IKrNet expects input [B,1,L], got " + nn::shape_str(batch.shape()));
    }
    if (batch.dim(2) < min_input_length()) {
        throw InvalidArgument("input length " + std::to_string(batch.dim(2)) +
                              " is below the minimum admissible length " + std::to_string(min_input_length()));
    }
}

template <typename T>
Tensor<T> IKrNetModel<T>::run_block(BlockWeights<T>& w, const Tensor<T>& x, bool training) {
    if (config_.block_type == BlockType::Basic) {
        Tensor<T> h = nn::relu(apply_norm(w.conv_bn, w.conv(x), training));
        h = apply_norm(w.project_bn, w.project(h), training);
        Tensor<T> skip = w.shortcut ? apply_norm(w.shortcut_bn, (*w.shortcut)(x), training) : x;
        return nn::relu(nn::add(h, skip));
    }
    Tensor<T> h = x;
    if (w.expand) h = nn::relu(apply_norm(w.expand_bn, (*w.expand)(h), training));
    h = nn::relu(apply_norm(w.conv_bn, w.conv(h), training));
    h = nn::squeeze_excite(h, *w.se);
    h = apply_norm(w.project_bn, w.project(h), training);
    return w.residual ? nn::add(h, x) : h;
}

template <typename T>
Tensor<T> IKrNetModel<T>::run_branch(BranchWeights<T>& w, const Tensor<T>& x, bool training) {
    Tensor<T> h = nn::relu(apply_norm(w.stem_bn, w.stem(x), training));
    for (auto& block : w.blocks) h = run_block(block, h, training);
    h = nn::adaptive_avg_pool1d(h, config_.branch_out_len);
    if (w.out_proj) h = (*w.out_proj)(h);
    return h;
}

template <typename T>
Tensor<T> IKrNetModel<T>::branch_features(const Tensor<T>& batch, std::size_t branch, bool training) {
    check_input(batch);
    if (branch >= branches_.size()) {
        throw InvalidArgument("branch " + std::to_string(branch) + " out of range");
    }
    return run_branch(branches_[branch], batch, training);
}

template <typename T>
Tensor<T> IKrNetModel<T>::forward(const Tensor<T>& batch, bool training) {
    check_input(batch);
    const std::size_t B = batch.dim(0);
    std::vector<Tensor<T>> feats;
    for (auto& br : branches_) feats.push_back(run_branch(br, batch, training));
    Tensor<T> spatial = feats.size() == 1 ? feats[0] : nn::concat(feats, 1);  // [B, C, P]
    Tensor<T> flat = nn::reshape(spatial, {B, spatial.dim(1) * spatial.dim(2)});

    Tensor<T> z = flat;
    if (!bilstm_.empty()) {
        Tensor<T> seq = nn::transpose_last2(spatial);  // [B, P, C]
        Tensor<T> out = nn::bilstm(seq, bilstm_);
        z = nn::select(out, 1, out.dim(1) - 1);
        if (spatial_fc_) z = nn::add(z, (*spatial_fc_)(flat));
    }
    Tensor<T> h = nn::relu(head_hidden_(z));
    Tensor<T> s = nn::sigmoid(head_out_(h));
    return nn::reshape(s, {B});
}

template <typename T>
std::vector<int> IKrNetModel<T>::classify(const Tensor<T>& batch) {
    nn::NoGradGuard guard;
    const Tensor<T> s = forward(batch, false);
    std::vector<int> out;
    out.reserve(s.numel());
    for (T v : s.data()) out.push_back(classify_score(static_cast<double>(v)));
    return out;
}

template class IKrNetModel<float>;
template class IKrNetModel<double>;

}  // namespace ikrnet::model
