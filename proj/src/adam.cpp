#include "phong_splat/adam.hpp"

#include <cmath>

namespace phong_splat {

void Adam::step(ParamSet& params, std::span<const double> gradient, const GroupRates& rates,
                std::span<const double> mask) {
    const std::size_t n = params.size();
    if (gradient.size() != n) throw std::invalid_argument("adam: gradient length does not match parameters");
    if (!mask.empty() && mask.size() != n) throw std::invalid_argument("adam: mask length does not match parameters");
    if (m_.size() != n) {
        m_.assign(n, 0.0);
        v_.assign(n, 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask.empty() && mask[i] == 0.0) continue;
        if (!std::isfinite(gradient[i])) {
            throw NonFiniteGradientError("non-finite gradient for " + ParamSet::describe(i));
        }
    }
    ++step_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
    auto values = params.values();
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask.empty() && mask[i] == 0.0) continue;
        const double g = gradient[i];
        m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g;
        v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g * g;
        const double lr = rates[static_cast<std::size_t>(ParamSet::locate(i).attribute)];
        values[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEpsilon);
    }
}

void Adam::remap(const std::vector<std::size_t>& source_points) {
    std::vector<double> m(source_points.size() * kParamsPerPoint, 0.0);
    std::vector<double> v(m.size(), 0.0);
    const std::size_t old_points = m_.size() / kParamsPerPoint;
    for (std::size_t i = 0; i < source_points.size(); ++i) {
        const std::size_t s = source_points[i];
        if (s >= old_points) continue;
        for (std::size_t k = 0; k < kParamsPerPoint; ++k) {
            m[i * kParamsPerPoint + k] = m_[s * kParamsPerPoint + k];
            v[i * kParamsPerPoint + k] = v_[s * kParamsPerPoint + k];
        }
    }
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace phong_splat
