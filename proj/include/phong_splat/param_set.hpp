#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "phong_splat/math.hpp"
#include "phong_splat/scene.hpp"

namespace phong_splat {

enum class Attribute : std::uint8_t {
    Position,
    Rotation,
    LogScale,
    OpacityLogit,
    Ambient,
    NormalResidualOut,
    NormalResidualIn,
    Diffuse,
    Specular,
    ShadowLogit,
};

inline constexpr std::size_t kAttributeGroups = 10;
inline constexpr std::size_t kParamsPerPoint = GaussianPoint::kAttributeCount;

struct AttributeLayout {
    std::size_t offset;
    std::size_t width;
    const char* name;
};

inline constexpr std::array<AttributeLayout, kAttributeGroups> kAttributeLayout{{
    {0, 3, "position"},
    {3, 4, "rotation"},
    {7, 3, "log_scale"},
    {10, 1, "opacity_logit"},
    {11, 3, "ambient_color"},
    {14, 3, "normal_residual_out"},
    {17, 3, "normal_residual_in"},
    {20, 3, "diffuse_color"},
    {23, 1, "specular_coeff"},
    {24, 1, "shadow_coeff_logit"},
}};

constexpr const AttributeLayout& layout(Attribute a) { return kAttributeLayout[static_cast<std::size_t>(a)]; }

// Selection of attribute groups, expanded to a flat 0/1 mask on demand.
class AttributeMask {
public:
    AttributeMask() = default;
    AttributeMask(std::initializer_list<Attribute> attrs) {
        for (Attribute a : attrs) set(a);
    }
    static AttributeMask all() {
        AttributeMask m;
        m.bits_.fill(true);
        return m;
    }
    AttributeMask& set(Attribute a, bool on = true) {
        bits_[static_cast<std::size_t>(a)] = on;
        return *this;
    }
    bool test(Attribute a) const { return bits_[static_cast<std::size_t>(a)]; }
    std::vector<double> expand(std::size_t point_count) const;

    bool operator==(const AttributeMask&) const = default;

private:
    std::array<bool, kAttributeGroups> bits_{};
};

// Flat double-precision vector of every learnable scalar, point-major.
class ParamSet {
public:
    ParamSet() = default;
    explicit ParamSet(const std::vector<GaussianPoint>& points);
    ParamSet(std::size_t point_count, std::vector<double> values);

    std::vector<GaussianPoint> to_points() const;

    std::size_t point_count() const { return values_.size() / kParamsPerPoint; }
    std::size_t size() const { return values_.size(); }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::vector<double>& storage() { return values_; }

    static constexpr std::size_t index(std::size_t point, Attribute a, std::size_t component = 0) {
        return point * kParamsPerPoint + layout(a).offset + component;
    }
    double& at(std::size_t point, Attribute a, std::size_t component = 0) {
        return values_[index(point, a, component)];
    }
    double at(std::size_t point, Attribute a, std::size_t component = 0) const {
        return values_[index(point, a, component)];
    }

    struct Location {
        std::size_t point;
        Attribute attribute;
        std::size_t component;
    };
    static Location locate(std::size_t flat_index);
    static std::string describe(std::size_t flat_index);

    bool operator==(const ParamSet&) const = default;

private:
    std::vector<double> values_;
};

// Typed view of one point's attributes over any scalar type.
template <class S>
struct PointParams {
    Vec3<S> position;
    std::array<S, 4> rotation;
    Vec3<S> log_scale;
    S opacity_logit;
    Vec3<S> ambient;
    Vec3<S> residual_out;
    Vec3<S> residual_in;
    Vec3<S> diffuse;
    S specular;
    S shadow_logit;
};

template <class S>
PointParams<S> point_params(std::span<const S> flat, std::size_t point) {
    const S* p = flat.data() + point * kParamsPerPoint;
    PointParams<S> out;
    out.position = {p[0], p[1], p[2]};
    out.rotation = {p[3], p[4], p[5], p[6]};
    out.log_scale = {p[7], p[8], p[9]};
    out.opacity_logit = p[10];
    out.ambient = {p[11], p[12], p[13]};
    out.residual_out = {p[14], p[15], p[16]};
    out.residual_in = {p[17], p[18], p[19]};
    out.diffuse = {p[20], p[21], p[22]};
    out.specular = p[23];
    out.shadow_logit = p[24];
    return out;
}

PointParams<double> point_params(const GaussianPoint& point);

}  // namespace phong_splat
