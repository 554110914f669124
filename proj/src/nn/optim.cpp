#include "ikrnet/nn/optim.hpp"

#include <cmath>

#include "ikrnet/errors.hpp"

namespace ikrnet::nn {

template <typename T>
void adamw_update(std::span<T> theta, std::span<const T> grad, std::span<T> m, std::span<T> v, std::uint64_t step,
                  const AdamWHyper& h) {
    if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
        throw ShapeError("adamw_update: buffer sizes differ");
    }
    if (step == 0) {
        throw InvalidArgument("adamw_update: step count starts at 1");
    }
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i];
        const double mi = h.beta1 * m[i] + (1.0 - h.beta1) * g;
        const double vi = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double m_hat = mi / bc1;
        const double v_hat = vi / bc2;
        const double th = theta[i];
        theta[i] = static_cast<T>(th - h.lr * (m_hat / (std::sqrt(v_hat) + h.eps) + h.weight_decay * th));
    }
}

template <typename T>
void AdamW<T>::step(ParameterStore<T>& store) {
    const auto& params = store.parameters();
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.tensor.numel(), T(0));
            v_.emplace_back(p.tensor.numel(), T(0));
        }
    }
    if (m_.size() != params.size()) {
        throw InvalidArgument("AdamW: parameter set changed since the first step");
    }
    ++step_;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor<T> t = params[i].tensor;
        if (t.numel() != m_[i].size()) {
            throw ShapeError("AdamW: moment buffer shape mismatch for " + params[i].name);
        }
        if (t.has_grad()) {
            adamw_update<T>(t.data(), t.grad(), m_[i], v_[i], step_, hyper_);
        } else {
            // No gradient reached this parameter: treat it as a zero gradient.
            const std::vector<T> zero(t.numel(), T(0));
            adamw_update<T>(t.data(), zero, m_[i], v_[i], step_, hyper_);
        }
    }
}

template <typename T>
double clip_grad_norm(ParameterStore<T>& store, double max_norm) {
    double ss = 0.0;
    for (const auto& p : store.parameters()) {
        for (T g : p.tensor.grad()) ss += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(ss);
    if (norm > max_norm && norm > 0.0) {
        const double factor = max_norm / norm;
        for (const auto& p : store.parameters()) {
            Tensor<T> t = p.tensor;
            if (!t.has_grad()) continue;
            for (T& g : t.mutable_grad()) g = static_cast<T>(g * factor);
        }
    }
    return norm;
}

template void adamw_update<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                                  std::uint64_t, const AdamWHyper&);
template void adamw_update<double>(std::span<double>, std::span<const double>, std::span<double>, std::span<double>,
                                   std::uint64_t, const AdamWHyper&);
template class AdamW<float>;
template class AdamW<double>;
template double clip_grad_norm(ParameterStore<float>&, double);
template double clip_grad_norm(ParameterStore<double>&, double);

}  // namespace ikrnet::nn
