#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phong_splat/image.hpp"
#include "phong_splat/math.hpp"
#include "phong_splat/render.hpp"
#include "phong_splat/scene.hpp"

namespace phong_splat {

struct Material {
    Vec3d ambient{0.1, 0.1, 0.1};
    Vec3d diffuse{0.5, 0.5, 0.5};
    double specular = 0.2;
    double shininess = kDefaultShininess;
};

struct Sphere {
    Vec3d center;
    double radius = 1.0;
    Material material;
};

// Square patch of half-width `extent` around `point`, visible from both sides.
struct Plane {
    Vec3d point;
    Vec3d normal{0.0, 0.0, 1.0};
    double extent = 1.0;
    Material material;
};

struct AnalyticScene {
    std::vector<Sphere> spheres;
    std::vector<Plane> planes;

    void validate() const;
};

struct RayHit {
    double t = 0.0;
    Vec3d position;
    Vec3d normal;  // unit, facing the ray origin
    const Material* material = nullptr;
};

// Nearest intersection with t in (t_min, t_max).
std::optional<RayHit> intersect(const AnalyticScene& scene, const Vec3d& origin, const Vec3d& dir, double t_min,
                                double t_max);

// Shading of one surface point with a binary shadow test.
Vec3d shade_surface(const AnalyticScene& scene, const RayHit& hit, const Vec3d& eye, const PointLight& light);

// 2x2 supersampled ground truth; background is black.
Image render_ground_truth(const AnalyticScene& scene, const Camera& camera, const PointLight& light);

// Built-in scenes: "sphere" (one sphere) and "sphere_plane" (a sphere casting
// a shadow on a ground patch).
AnalyticScene make_scene(const std::string& name);

struct OlatOptions {
    std::size_t train_count = 32;
    std::size_t test_count = 8;  // novel view and novel light, same light region as training
    std::size_t ood_count = 0;   // lights on the far side of `ood_normal`
    double camera_radius = 3.0;
    double light_radius = 2.0;
    double min_camera_elevation = -1.0;  // lower bound on the z of the unit direction
    double min_light_elevation = -1.0;
    std::optional<Vec3d> ood_normal;  // training lights satisfy dot(normal, light) > 0
    int width = 64;
    int height = 64;
    double focal = 0.0;  // 0 means 1.2 * width
    std::uint64_t seed = 0;

    void validate() const;
};

struct OlatViews {
    std::vector<Camera> cameras;
    std::vector<PointLight> lights;
    std::vector<std::string> splits;  // "train", "test" or "ood"
};

// Camera and light sampling shared by both dataset generators.
OlatViews sample_olat_views(const OlatOptions& options);

struct OlatSplit {
    Dataset train;
    Dataset test;
};

OlatSplit generate_olat_dataset(const AnalyticScene& scene, const OlatOptions& options);

// The same capture layout rendered by the splatting model itself.
OlatSplit generate_model_dataset(const std::vector<GaussianPoint>& points, const OlatOptions& options,
                                 const RenderOptions& render_options = {});

// Flat surfels sampled on the scene surfaces, area weighted.
std::vector<GaussianPoint> sample_initial_points(const AnalyticScene& scene, std::size_t count, std::uint64_t seed);

// Quaternion (w, x, y, z) rotating +z onto `n`.
std::array<double, 4> quaternion_from_z(const Vec3d& n);

// Random few-point scene with random target images, used by gradient checks.
struct MicroScene {
    std::vector<GaussianPoint> points;
    std::vector<double> params;
    OLATCapture capture;  // query view
    OLATCapture support;  // second view and light
};

MicroScene make_micro_scene(std::size_t count, std::uint64_t seed, int size = 16);

}  // namespace phong_splat
