#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "phong_splat/math.hpp"
#include "phong_splat/param_set.hpp"
#include "phong_splat/scene.hpp"

namespace phong_splat {

inline constexpr double kNearPlane = 0.01;
inline constexpr double kScreenDilation = 0.3;
inline constexpr double kDefaultShininess = 32.0;

class ShadingError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

template <class S>
Mat3<S> gaussian_rotation(const std::array<S, 4>& q) {
    return rotation_from_quaternion(q[0], q[1], q[2], q[3]);
}

template <class S>
Vec3<S> squared_scale(const Vec3<S>& log_scale) {
    using std::exp;
    return {exp(2.0 * log_scale.x), exp(2.0 * log_scale.y), exp(2.0 * log_scale.z)};
}

// Index of the shortest axis; ties go to the lowest index.
inline int shortest_axis(const Vec3d& log_scale) {
    int k = 0;
    if (log_scale.y < log_scale[k]) k = 1;
    if (log_scale.z < log_scale[k]) k = 2;
    return k;
}

// Symmetric 3x3 stored as (00, 01, 02, 11, 12, 22).
template <class S>
using Sym3 = std::array<S, 6>;

template <class S>
Sym3<S> pack_symmetric(const Mat3<S>& m) {
    return {m(0, 0), m(0, 1), m(0, 2), m(1, 1), m(1, 2), m(2, 2)};
}

template <class S>
Vec3<S> sym_mul(const Sym3<S>& a, const Vec3<S>& v) {
    return {a[0] * v.x + a[1] * v.y + a[2] * v.z, a[1] * v.x + a[3] * v.y + a[4] * v.z,
            a[2] * v.x + a[4] * v.y + a[5] * v.z};
}

// Σ⁻¹ = R diag(s⁻²) Rᵀ, exact for the log-scale parameterization.
template <class S>
Sym3<S> inverse_covariance(const Mat3<S>& rotation, const Vec3<S>& log_scale) {
    using std::exp;
    const Vec3<S> inv{exp(-2.0 * log_scale.x), exp(-2.0 * log_scale.y), exp(-2.0 * log_scale.z)};
    return pack_symmetric(rotate_diagonal(rotation, inv));
}

template <class S>
struct ProjectedGaussian {
    bool culled = true;
    Vec3<S> camera_position;
    S mean_x{}, mean_y{};
    std::array<S, 3> cov{};    // Σ′ as (00, 01, 11), before dilation
    std::array<S, 3> conic{};  // (Σ′ + 0.3 I)⁻¹ as (00, 01, 11)
};

template <class S>
ProjectedGaussian<S> project(const Vec3<S>& mean, const Mat3<S>& sigma, const Camera& camera) {
    ProjectedGaussian<S> out;
    const Mat3d wr = camera.rotation();
    const Vec3d wt = camera.translation();
    Mat3<S> w;
    for (std::size_t i = 0; i < 9; ++i) w.m[i] = S(wr.m[i]);
    const Vec3<S> p = w * mean + Vec3<S>::from(wt);
    out.camera_position = p;
    if (!(primal(p.z) > kNearPlane)) return out;
    out.culled = false;
    const S inv_z = 1.0 / p.z;
    out.mean_x = camera.fx * p.x * inv_z + camera.cx;
    out.mean_y = camera.fy * p.y * inv_z + camera.cy;

    // Rows of J W, where J is the local affine Jacobian of the projection.
    const S j00 = camera.fx * inv_z;
    const S j02 = -camera.fx * p.x * inv_z * inv_z;
    const S j11 = camera.fy * inv_z;
    const S j12 = -camera.fy * p.y * inv_z * inv_z;
    const Vec3<S> t0 = w.row(0) * j00 + w.row(2) * j02;
    const Vec3<S> t1 = w.row(1) * j11 + w.row(2) * j12;
    const Vec3<S> s0 = sigma * t0;
    const Vec3<S> s1 = sigma * t1;
    out.cov = {dot(t0, s0), dot(t0, s1), dot(t1, s1)};

    const S a = out.cov[0] + kScreenDilation;
    const S b = out.cov[1];
    const S c = out.cov[2] + kScreenDilation;
    const S det = a * c - b * b;
    if (!(primal(det) > 0.0)) throw std::domain_error("singular projected covariance");
    const S inv_det = 1.0 / det;
    out.conic = {c * inv_det, -b * inv_det, a * inv_det};
    return out;
}

// Shading normal: the shortest axis, offset by the residual of the side facing
// the viewer. `view_dir` points from the Gaussian toward the camera.
template <class S>
Vec3<S> gaussian_normal(const Mat3<S>& rotation, const Vec3d& log_scale, const Vec3<S>& residual_out,
                        const Vec3<S>& residual_in, const Vec3<S>& view_dir) {
    const Vec3<S> v = rotation.column(shortest_axis(log_scale));
    const bool outward = primal(dot(view_dir, v)) > 0.0;
    const Vec3<S> raw = outward ? v + residual_out : -(v + residual_in);
    const double len = primal(norm(raw));
    if (!(len > 1e-12)) throw ShadingError("degenerate shading normal: axis and residual cancel");
    return normalize(raw);
}

template <class S>
Vec3<S> gaussian_normal(const PointParams<S>& p, const Vec3<S>& view_dir) {
    return gaussian_normal(gaussian_rotation(p.rotation), primal(p.log_scale), p.residual_out, p.residual_in,
                           view_dir);
}

inline Vec3d gaussian_normal(const GaussianPoint& point, const Vec3d& view_dir) {
    return gaussian_normal(point_params(point), view_dir);
}

// max(0, n·l) / r² with unit emitted intensity.
template <class S>
S diffuse_intensity(const Vec3<S>& n, const Vec3<S>& point_pos, const Vec3d& light_pos) {
    const Vec3<S> to_light = Vec3<S>::from(light_pos) - point_pos;
    const S r2 = dot(to_light, to_light);
    if (!(primal(r2) >= 1e-12)) throw ShadingError("light coincides with shaded point");
    using std::sqrt;
    const S r = sqrt(r2);
    return max0(dot(n, to_light) / r) / r2;
}

// max(0, n·h)^p / r², h the half vector of view and light directions.
template <class S>
S specular_intensity(const Vec3<S>& n, const Vec3<S>& point_pos, const Vec3d& camera_pos, const Vec3d& light_pos,
                     double shininess) {
    const Vec3<S> to_light = Vec3<S>::from(light_pos) - point_pos;
    const S r2 = dot(to_light, to_light);
    if (!(primal(r2) >= 1e-12)) throw ShadingError("light coincides with shaded point");
    const Vec3<S> v = normalize(Vec3<S>::from(camera_pos) - point_pos);
    const Vec3<S> l = normalize(to_light);
    const Vec3<S> sum = v + l;
    const S len = norm(sum);
    if (!(primal(len) >= 1e-8)) return S(0.0);
    using std::pow;
    const S cos_h = max0(dot(n, sum) / len);
    if (!(primal(cos_h) > 0.0)) return S(0.0);
    return pow(cos_h, shininess) / r2;
}

template <class S>
struct ShadedColor {
    Vec3<S> ambient;
    Vec3<S> diffuse;
    Vec3<S> specular;
    Vec3<S> total;
};

struct ShadingOptions {
    double shininess = kDefaultShininess;
    bool colored_diffuse = false;  // also tint the diffuse term by the light color
};

template <class S>
ShadedColor<S> shade(const PointParams<S>& p, const Vec3<S>& normal, const Vec3d& camera_pos,
                     const PointLight& light, const S& visibility, const ShadingOptions& options) {
    const S id = diffuse_intensity(normal, p.position, light.position);
    const S is = specular_intensity(normal, p.position, camera_pos, light.position, options.shininess);
    ShadedColor<S> out;
    out.ambient = p.ambient;
    const S kd = visibility * id;
    out.diffuse = p.diffuse * kd;
    if (options.colored_diffuse) out.diffuse = hadamard(out.diffuse, Vec3<S>::from(light.color));
    const S ks = visibility * p.specular * is;
    out.specular = Vec3<S>{ks * light.color.x, ks * light.color.y, ks * light.color.z};
    out.total = out.ambient + out.diffuse + out.specular;
    return out;
}

struct Splat2D {
    std::array<double, 2> mean{};
    std::array<double, 3> cov{};  // (00, 01, 11)
    double depth = 0.0;
    std::uint32_t id = 0;
    double opacity = 0.0;
};

std::optional<Splat2D> project_gaussian(const GaussianPoint& point, const Camera& camera, std::uint32_t id = 0);

ShadedColor<double> shade(const GaussianPoint& point, const Camera& camera, const PointLight& light,
                          double visibility, double shininess = kDefaultShininess);

}  // namespace phong_splat
