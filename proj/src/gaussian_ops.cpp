#include "phong_splat/gaussian_ops.hpp"

namespace phong_splat {

std::optional<Splat2D> project_gaussian(const GaussianPoint& point, const Camera& camera, std::uint32_t id) {
    const PointParams<double> p = point_params(point);
    const Mat3d r = gaussian_rotation(p.rotation);
    const auto proj = project(p.position, rotate_diagonal(r, squared_scale(p.log_scale)), camera);
    if (proj.culled) return std::nullopt;
    Splat2D s;
    s.mean = {proj.mean_x, proj.mean_y};
    s.cov = proj.cov;
    s.depth = proj.camera_position.z;
    s.id = id;
    s.opacity = point.opacity();
    return s;
}

ShadedColor<double> shade(const GaussianPoint& point, const Camera& camera, const PointLight& light,
                          double visibility, double shininess) {
    if (!(visibility >= 0.0 && visibility <= 1.0)) throw ShadingError("visibility outside [0, 1]");
    const PointParams<double> p = point_params(point);
    const Vec3d eye = camera.center();
    const Vec3d n = gaussian_normal(p, normalize(eye - p.position));
    ShadingOptions options;
    options.shininess = shininess;
    return shade(p, n, eye, light, visibility, options);
}

}  // namespace phong_splat
