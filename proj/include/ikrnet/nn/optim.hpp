#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ikrnet/nn/layers.hpp"

namespace ikrnet::nn {

struct AdamWHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// One decoupled-weight-decay Adam update of a flat buffer. `step` is the
// 1-based step count after increment.
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   theta <- theta - lr (m_hat / (sqrt(v_hat) + eps) + wd theta)
template <typename T>
void adamw_update(std::span<T> theta, std::span<const T> grad, std::span<T> m, std::span<T> v, std::uint64_t step,
                  const AdamWHyper& hyper);

template <typename T>
class AdamW {
public:
    explicit AdamW(AdamWHyper hyper = {}) : hyper_(hyper) {}

    // Updates every parameter of the store that has a gradient. Moment
    // buffers are created on the first call, in store order.
    void step(ParameterStore<T>& store);

    std::uint64_t steps() const { return step_; }
    const AdamWHyper& hyper() const { return hyper_; }
    void set_lr(double lr) { hyper_.lr = lr; }

private:
    AdamWHyper hyper_;
    std::uint64_t step_ = 0;
    std::vector<std::vector<T>> m_;
    std::vector<std::vector<T>> v_;
};

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(ParameterStore<T>& store, double max_norm);

}  // namespace ikrnet::nn
