#include "phong_splat/scene.hpp"

#include <cmath>
#include <stdexcept>

namespace phong_splat {

std::array<float, GaussianPoint::kAttributeCount> GaussianPoint::flatten() const {
    std::array<float, kAttributeCount> out{};
    std::size_t k = 0;
    auto put = [&](std::span<const float> v) {
        for (float x : v) out[k++] = x;
    };
    put(position);
    put(rotation);
    put(log_scale);
    out[k++] = opacity_logit;
    put(ambient_color);
    put(normal_residual_out);
    put(normal_residual_in);
    put(diffuse_color);
    out[k++] = specular_coeff;
    out[k++] = shadow_coeff_logit;
    return out;
}

GaussianPoint GaussianPoint::unflatten(std::span<const float, kAttributeCount> values) {
    GaussianPoint p;
    std::size_t k = 0;
    auto take = [&](std::span<float> v) {
        for (float& x : v) x = values[k++];
    };
    take(p.position);
    take(p.rotation);
    take(p.log_scale);
    p.opacity_logit = values[k++];
    take(p.ambient_color);
    take(p.normal_residual_out);
    take(p.normal_residual_in);
    take(p.diffuse_color);
    p.specular_coeff = values[k++];
    p.shadow_coeff_logit = values[k++];
    return p;
}

double GaussianPoint::opacity() const { return sigmoid(static_cast<double>(opacity_logit)); }
double GaussianPoint::shadow_coefficient() const { return sigmoid(static_cast<double>(shadow_coeff_logit)); }

Mat3d Camera::rotation() const {
    Mat3d r;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) r(i, j) = world_to_camera[static_cast<std::size_t>(i * 4 + j)];
    }
    return r;
}

Vec3d Camera::translation() const { return {world_to_camera[3], world_to_camera[7], world_to_camera[11]}; }

Vec3d Camera::center() const {
    // c = -R^T t
    return -(transpose(rotation()) * translation());
}

std::array<double, 16> Camera::camera_to_world() const {
    const Mat3d rt = transpose(rotation());
    const Vec3d c = center();
    return {rt(0, 0), rt(0, 1), rt(0, 2), c.x, rt(1, 0), rt(1, 1), rt(1, 2), c.y,
            rt(2, 0), rt(2, 1), rt(2, 2), c.z, 0.0,      0.0,      0.0,      1.0};
}

Camera Camera::from_camera_to_world(const std::array<double, 16>& c2w, double fx, double fy, double cx, double cy,
                                    int width, int height) {
    Mat3d r;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) r(i, j) = c2w[static_cast<std::size_t>(i * 4 + j)];
    }
    const Vec3d c{c2w[3], c2w[7], c2w[11]};
    const Mat3d rt = transpose(r);
    const Vec3d t = -(rt * c);
    Camera cam;
    cam.world_to_camera = {rt(0, 0), rt(0, 1), rt(0, 2), t.x, rt(1, 0), rt(1, 1), rt(1, 2), t.y,
                           rt(2, 0), rt(2, 1), rt(2, 2), t.z, 0.0,      0.0,      0.0,      1.0};
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = cx;
    cam.cy = cy;
    cam.width = width;
    cam.height = height;
    return cam;
}

Camera Camera::look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up, double focal, int width,
                       int height) {
    const Vec3d forward = normalize(target - eye);
    Vec3d right = cross(forward, up);
    if (norm(right) < 1e-9) {
        // Looking along `up`: pick any perpendicular axis.
        right = cross(forward, std::abs(forward.x) < 0.9 ? Vec3d{1, 0, 0} : Vec3d{0, 1, 0});
    }
    right = normalize(right);
    const Vec3d down = cross(forward, right);
    std::array<double, 16> c2w{right.x, down.x, forward.x, eye.x, right.y, down.y, forward.y, eye.y,
                               right.z, down.z, forward.z, eye.z, 0.0,     0.0,    0.0,       1.0};
    return from_camera_to_world(c2w, focal, focal, 0.5 * width, 0.5 * height, width, height);
}

void Camera::validate() const {
    if (width < 1 || height < 1) throw std::invalid_argument("camera width and height must be >= 1");
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("camera focal lengths must be > 0");
    const Mat3d r = rotation();
    const Mat3d rrt = r * transpose(r);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (std::abs(rrt(i, j) - (i == j ? 1.0 : 0.0)) > 1e-6) {
                throw std::invalid_argument("camera rotation is not orthonormal");
            }
        }
    }
    if (dot(cross(r.row(0), r.row(1)), r.row(2)) < 0.0) {
        throw std::invalid_argument("camera rotation has determinant -1");
    }
}

void PointLight::validate() const {
    for (int i = 0; i < 3; ++i) {
        if (!std::isfinite(position[i]) || !std::isfinite(color[i])) {
            throw std::invalid_argument("point light has non-finite position or color");
        }
        if (color[i] < 0.0) throw std::invalid_argument("point light color must be >= 0");
    }
}

Mat3d covariance(const std::array<double, 4>& rotation, const Vec3d& log_scale) {
    const Mat3d r = rotation_from_quaternion(rotation[0], rotation[1], rotation[2], rotation[3]);
    const Vec3d s2{std::exp(2.0 * log_scale.x), std::exp(2.0 * log_scale.y), std::exp(2.0 * log_scale.z)};
    return rotate_diagonal(r, s2);
}

}  // namespace phong_splat
