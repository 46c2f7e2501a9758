#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "phong_splat/param_set.hpp"

namespace phong_splat {

class NonFiniteGradientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Learning rate per attribute group, indexed by Attribute.
using GroupRates = std::array<double, kAttributeGroups>;

// Bias-corrected Adam over a flat ParamSet.
class Adam {
public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-15;

    Adam() = default;
    explicit Adam(std::size_t size) : m_(size, 0.0), v_(size, 0.0) {}

    // Updates coordinates whose mask entry is non-zero (empty mask = all).
    // Throws before touching anything if a masked-in gradient is non-finite.
    void step(ParamSet& params, std::span<const double> gradient, const GroupRates& rates,
              std::span<const double> mask = {});

    // Keeps moments of the surviving points, in order; appended points start at zero.
    void remap(const std::vector<std::size_t>& source_points);

    std::size_t step_count() const { return step_; }
    const std::vector<double>& first_moment() const { return m_; }
    const std::vector<double>& second_moment() const { return v_; }

private:
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t step_ = 0;
};

}  // namespace phong_splat
