#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "phong_splat/image.hpp"
#include "phong_splat/math.hpp"

namespace phong_splat {

// One scene primitive. Attributes are stored in single precision, which is
// also the checkpoint precision; training works on a double copy (ParamSet).
struct GaussianPoint {
    static constexpr std::size_t kAttributeCount = 25;

    std::array<float, 3> position{};
    std::array<float, 4> rotation{1.0F, 0.0F, 0.0F, 0.0F};  // (w, x, y, z)
    std::array<float, 3> log_scale{};
    float opacity_logit = 0.0F;
    std::array<float, 3> ambient_color{};
    std::array<float, 3> normal_residual_out{};
    std::array<float, 3> normal_residual_in{};
    std::array<float, 3> diffuse_color{};
    float specular_coeff = 0.0F;
    float shadow_coeff_logit = 0.0F;

    std::array<float, kAttributeCount> flatten() const;
    static GaussianPoint unflatten(std::span<const float, kAttributeCount> values);

    double opacity() const;
    double shadow_coefficient() const;

    bool operator==(const GaussianPoint&) const = default;
};

// Pinhole camera; x right, y down, z forward (points in front have z > 0).
struct Camera {
    std::array<double, 16> world_to_camera{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};  // row-major
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;

    Mat3d rotation() const;
    Vec3d translation() const;
    Vec3d center() const;

    static Camera from_camera_to_world(const std::array<double, 16>& c2w, double fx, double fy, double cx, double cy,
                                       int width, int height);
    std::array<double, 16> camera_to_world() const;

    // Camera at `eye` looking at `target`; `up` fixes the roll (image y runs opposite to it).
    static Camera look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up, double focal, int width,
                          int height);

    // Throws if the rotation block is not orthonormal with det +1 or the size is empty.
    void validate() const;

    bool operator==(const Camera&) const = default;
};

struct PointLight {
    Vec3d position;
    Vec3d color{1.0, 1.0, 1.0};

    void validate() const;
};

struct OLATCapture {
    Image image;
    Camera camera;
    PointLight light;
    std::string split;  // optional label carried through the manifest
};

struct Dataset {
    std::string name;
    std::vector<OLATCapture> captures;

    std::size_t size() const { return captures.size(); }
};

// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
Mat3d covariance(const std::array<double, 4>& rotation, const Vec3d& log_scale);

}  // namespace phong_splat
