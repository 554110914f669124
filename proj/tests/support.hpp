#pragma once

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ikrnet/nn/tensor.hpp"

namespace ikrnet::test {

inline std::pair<double, double> mean_std(const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return {m, std::sqrt(ss / static_cast<double>(x.size()))};
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("ikrnet_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

using DTensor = nn::Tensor<double>;
inline const std::optional<DTensor> kNoBias;

inline DTensor random_tensor(nn::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                             bool requires_grad = true) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(nn::numel(shape));
    for (auto& x : v) x = u(rng);
    return DTensor::from(std::move(shape), std::move(v), requires_grad);
}

// Mixed error |a - n| / max(|a|, |n|, floor): relative for ordinary gradients,
// absolute near zero where relative error is meaningless.
inline constexpr double kRelFloor = 1e-3;

inline double rel_err(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), kRelFloor}); }

// Central finite differences of L = <w, f(inputs)> against reverse mode, with
// w a fixed random projection so every output element is exercised. Returns
// the largest mixed relative error over all input elements.
inline double gradcheck(const std::function<DTensor(const std::vector<DTensor>&)>& f, std::vector<DTensor> inputs,
                        std::uint64_t seed, double h = 1e-5) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    auto out = f(inputs);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> w(out.numel());
    for (auto& x : w) x = u(rng);
    for (auto& in : inputs) in.zero_grad();
    out.backward(w);

    auto project = [&](const std::vector<DTensor>& ins) {
        nn::NoGradGuard guard;
        const auto o = f(ins);
        double s = 0.0;
        for (std::size_t i = 0; i < o.numel(); ++i) s += w[i] * o.data()[i];
        return s;
    };
    double worst = 0.0;
    for (auto& in : inputs) {
        if (!in.requires_grad()) continue;
        const std::vector<double> analytic = in.has_grad() ? std::vector<double>(in.grad().begin(), in.grad().end())
                                                           : std::vector<double>(in.numel(), 0.0);
        for (std::size_t i = 0; i < in.numel(); ++i) {
            const double orig = in.data()[i];
            in.data()[i] = orig + h;
            const double up = project(inputs);
            in.data()[i] = orig - h;
            const double down = project(inputs);
            in.data()[i] = orig;
            worst = std::max(worst, rel_err(analytic[i], (up - down) / (2 * h)));
        }
    }
    return worst;
}

}  // namespace ikrnet::test
