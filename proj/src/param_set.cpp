#include "phong_splat/param_set.hpp"

#include <stdexcept>

namespace phong_splat {

std::vector<double> AttributeMask::expand(std::size_t point_count) const {
    std::vector<double> mask(point_count * kParamsPerPoint, 0.0);
    for (std::size_t g = 0; g < kAttributeGroups; ++g) {
        if (!bits_[g]) continue;
        const AttributeLayout& l = kAttributeLayout[g];
        for (std::size_t p = 0; p < point_count; ++p) {
            for (std::size_t c = 0; c < l.width; ++c) mask[p * kParamsPerPoint + l.offset + c] = 1.0;
        }
    }
    return mask;
}

ParamSet::ParamSet(const std::vector<GaussianPoint>& points) {
    values_.reserve(points.size() * kParamsPerPoint);
    for (const GaussianPoint& p : points) {
        for (float v : p.flatten()) values_.push_back(static_cast<double>(v));
    }
}

ParamSet::ParamSet(std::size_t point_count, std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() != point_count * kParamsPerPoint) throw std::invalid_argument("ParamSet size mismatch");
}

std::vector<GaussianPoint> ParamSet::to_points() const {
    std::vector<GaussianPoint> points;
    points.reserve(point_count());
    std::array<float, kParamsPerPoint> record{};
    for (std::size_t i = 0; i < point_count(); ++i) {
        for (std::size_t k = 0; k < kParamsPerPoint; ++k) {
            record[k] = static_cast<float>(values_[i * kParamsPerPoint + k]);
        }
        points.push_back(GaussianPoint::unflatten(record));
    }
    return points;
}

ParamSet::Location ParamSet::locate(std::size_t flat_index) {
    const std::size_t point = flat_index / kParamsPerPoint;
    const std::size_t local = flat_index % kParamsPerPoint;
    for (std::size_t g = 0; g < kAttributeGroups; ++g) {
        const AttributeLayout& l = kAttributeLayout[g];
        if (local >= l.offset && local < l.offset + l.width) {
            return {point, static_cast<Attribute>(g), local - l.offset};
        }
    }
    throw std::logic_error("attribute layout does not cover every slot");
}

std::string ParamSet::describe(std::size_t flat_index) {
    const Location loc = locate(flat_index);
    std::string s = "point " + std::to_string(loc.point) + " " + layout(loc.attribute).name;
    if (layout(loc.attribute).width > 1) s += "[" + std::to_string(loc.component) + "]";
    return s;
}

PointParams<double> point_params(const GaussianPoint& point) {
    const auto flat = point.flatten();
    std::array<double, kParamsPerPoint> values{};
    for (std::size_t k = 0; k < kParamsPerPoint; ++k) values[k] = flat[k];
    return point_params<double>(std::span<const double>(values), 0);
}

}  // namespace phong_splat
