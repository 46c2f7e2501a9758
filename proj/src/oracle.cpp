#include "phong_splat/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "phong_splat/gaussian_ops.hpp"
#include "phong_splat/parallel.hpp"
#include "phong_splat/rng.hpp"

namespace phong_splat {

namespace {

constexpr double kShadowBias = 1e-5;

void validate_material(const Material& m) {
    for (int k = 0; k < 3; ++k) {
        if (!(m.ambient[k] >= 0.0) || !(m.diffuse[k] >= 0.0)) throw std::invalid_argument("material colors must be >= 0");
    }
    if (!(m.specular >= 0.0)) throw std::invalid_argument("material specular must be >= 0");
    if (!(m.shininess > 0.0)) throw std::invalid_argument("material shininess must be > 0");
}

// Two unit vectors spanning the plane orthogonal to n.
void tangent_frame(const Vec3d& n, Vec3d& u, Vec3d& v) {
    u = normalize(cross(n, std::abs(n.x) < 0.9 ? Vec3d{1, 0, 0} : Vec3d{0, 1, 0}));
    v = cross(n, u);
}

Vec3d random_direction(Rng& rng) {
    for (;;) {
        const Vec3d d{rng.normal(), rng.normal(), rng.normal()};
        const double len = norm(d);
        if (len > 1e-9) return d * (1.0 / len);
    }
}

// Uniform direction with z >= min_z, on the positive side of `side` when given.
Vec3d sample_direction(Rng& rng, double min_z, const Vec3d* side, bool positive) {
    for (int attempt = 0; attempt < 100000; ++attempt) {
        Vec3d d = random_direction(rng);
        if (side != nullptr) {
            const double s = dot(d, *side);
            if ((s > 0.0) != positive) d = d - 2.0 * s * (*side);  // reflect to the requested side
            if (positive && !(dot(d, *side) > 0.0)) continue;
        }
        if (d.z >= min_z) return d;
    }
    throw std::invalid_argument("direction constraints leave no admissible region");
}

Camera camera_on_sphere(const Vec3d& dir, const OlatOptions& o) {
    const double focal = o.focal > 0.0 ? o.focal : 1.2 * o.width;
    const Vec3d up = std::abs(dir.z) > 0.99 ? Vec3d{0, 1, 0} : Vec3d{0, 0, 1};
    return Camera::look_at(dir * o.camera_radius, {0, 0, 0}, up, focal, o.width, o.height);
}

template <class RenderFn>
OlatSplit render_views(const OlatViews& views, const std::string& name, RenderFn&& render_fn) {
    OlatSplit out;
    out.train.name = name + "_train";
    out.test.name = name + "_test";
    const std::size_t n = views.cameras.size();
    std::vector<Image> images(n);
    for (std::size_t i = 0; i < n; ++i) images[i] = render_fn(views.cameras[i], views.lights[i]);
    for (std::size_t i = 0; i < n; ++i) {
        OLATCapture c{std::move(images[i]), views.cameras[i], views.lights[i], views.splits[i]};
        (views.splits[i] == "train" ? out.train : out.test).captures.push_back(std::move(c));
    }
    return out;
}

}  // namespace

void AnalyticScene::validate() const {
    for (const Sphere& s : spheres) {
        if (!(s.radius > 0.0)) throw std::invalid_argument("sphere radius must be > 0");
        validate_material(s.material);
    }
    for (const Plane& p : planes) {
        if (std::abs(norm(p.normal) - 1.0) > 1e-9) throw std::invalid_argument("plane normal must be unit length");
        if (!(p.extent > 0.0)) throw std::invalid_argument("plane extent must be > 0");
        validate_material(p.material);
    }
}

std::optional<RayHit> intersect(const AnalyticScene& scene, const Vec3d& origin, const Vec3d& dir, double t_min,
                                double t_max) {
    std::optional<RayHit> best;
    double best_t = t_max;
    for (const Sphere& s : scene.spheres) {
        const Vec3d oc = origin - s.center;
        const double a = dot(dir, dir);
        const double b = dot(oc, dir);
        const double c = dot(oc, oc) - s.radius * s.radius;
        const double disc = b * b - a * c;
        if (disc < 0.0) continue;
        const double root = std::sqrt(disc);
        for (double t : {(-b - root) / a, (-b + root) / a}) {
            if (t > t_min && t < best_t) {
                best_t = t;
                RayHit h;
                h.t = t;
                h.position = origin + dir * t;
                h.normal = (h.position - s.center) * (1.0 / s.radius);
                h.material = &s.material;
                best = h;
                break;
            }
        }
    }
    for (const Plane& p : scene.planes) {
        const double denom = dot(p.normal, dir);
        if (std::abs(denom) < 1e-12) continue;
        const double t = dot(p.point - origin, p.normal) / denom;
        if (!(t > t_min && t < best_t)) continue;
        const Vec3d x = origin + dir * t;
        Vec3d u, v;
        tangent_frame(p.normal, u, v);
        const Vec3d rel = x - p.point;
        if (std::abs(dot(rel, u)) > p.extent || std::abs(dot(rel, v)) > p.extent) continue;
        best_t = t;
        RayHit h;
        h.t = t;
        h.position = x;
        h.normal = p.normal;
        h.material = &p.material;
        best = h;
    }
    if (best && dot(best->normal, dir) > 0.0) best->normal = -best->normal;
    return best;
}

Vec3d shade_surface(const AnalyticScene& scene, const RayHit& hit, const Vec3d& eye, const PointLight& light) {
    const Material& m = *hit.material;
    const Vec3d origin = hit.position + hit.normal * kShadowBias;
    const Vec3d to_light = light.position - origin;
    const double dist = norm(to_light);
    const bool lit = !intersect(scene, origin, to_light * (1.0 / dist), 0.0, dist);
    Vec3d color = m.ambient;
    if (lit) {
        const double id = diffuse_intensity(hit.normal, hit.position, light.position);
        const double is = specular_intensity(hit.normal, hit.position, eye, light.position, m.shininess);
        color = color + m.diffuse * id + light.color * (m.specular * is);
    }
    return color;
}

Image render_ground_truth(const AnalyticScene& scene, const Camera& camera, const PointLight& light) {
    camera.validate();
    const int w = camera.width;
    const int h = camera.height;
    Image img(w, h, 3);
    const Mat3d rt = transpose(camera.rotation());
    const Vec3d eye = camera.center();
    constexpr double kOffsets[2] = {0.25, 0.75};
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
        const int y = static_cast<int>(row);
        for (int x = 0; x < w; ++x) {
            Vec3d sum{0.0, 0.0, 0.0};
            for (double oy : kOffsets) {
                for (double ox : kOffsets) {
                    const Vec3d dc{(x + ox - camera.cx) / camera.fx, (y + oy - camera.cy) / camera.fy, 1.0};
                    const Vec3d dir = normalize(rt * dc);
                    const auto hit = intersect(scene, eye, dir, 0.0, std::numeric_limits<double>::infinity());
                    if (hit) sum = sum + shade_surface(scene, *hit, eye, light);
                }
            }
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = 0.25 * sum[c];
        }
    });
    return img;
}

AnalyticScene make_scene(const std::string& name) {
    AnalyticScene scene;
    if (name == "sphere") {
        Sphere s;
        s.center = {0.0, 0.0, 0.0};
        s.radius = 0.25;
        s.material.ambient = {0.06, 0.05, 0.04};
        s.material.diffuse = {0.35, 0.2, 0.125};
        s.material.specular = 0.15;
        s.material.shininess = kDefaultShininess;
        scene.spheres.push_back(s);
    } else if (name == "sphere_plane") {
        Sphere s;
        s.center = {0.0, 0.0, 0.18};
        s.radius = 0.15;
        s.material.ambient = {0.05, 0.05, 0.07};
        s.material.diffuse = {0.15, 0.25, 0.35};
        s.material.specular = 0.125;
        s.material.shininess = kDefaultShininess;
        scene.spheres.push_back(s);
        Plane p;
        p.point = {0.0, 0.0, 0.0};
        p.normal = {0.0, 0.0, 1.0};
        p.extent = 0.4;
        p.material.ambient = {0.06, 0.05, 0.04};
        p.material.diffuse = {0.325, 0.275, 0.2};
        p.material.specular = 0.025;
        p.material.shininess = kDefaultShininess;
        scene.planes.push_back(p);
    } else {
        throw std::invalid_argument("unknown scene '" + name + "' (expected sphere or sphere_plane)");
    }
    return scene;
}

void OlatOptions::validate() const {
    if (train_count < 1) throw std::invalid_argument("need at least one training capture");
    if (train_count + test_count + ood_count < 2) throw std::invalid_argument("need at least two captures");
    if (!(camera_radius > 0.0) || !(light_radius > 0.0)) throw std::invalid_argument("radii must be > 0");
    if (width < 1 || height < 1) throw std::invalid_argument("image size must be >= 1");
    if (!(min_camera_elevation < 1.0) || !(min_light_elevation < 1.0)) {
        throw std::invalid_argument("minimum elevation must be < 1");
    }
    if (ood_normal && !(norm(*ood_normal) > 1e-9)) throw std::invalid_argument("degenerate OOD plane normal");
    if (ood_count > 0 && !ood_normal) throw std::invalid_argument("OOD captures need an OOD plane normal");
}

OlatViews sample_olat_views(const OlatOptions& o) {
    o.validate();
    Rng rng(o.seed);
    std::optional<Vec3d> side;
    if (o.ood_normal) side = normalize(*o.ood_normal);
    OlatViews views;
    auto add = [&](std::size_t count, const char* split, bool positive) {
        for (std::size_t i = 0; i < count; ++i) {
            const Vec3d cam_dir = sample_direction(rng, o.min_camera_elevation, nullptr, true);
            const Vec3d light_dir = sample_direction(rng, o.min_light_elevation, side ? &*side : nullptr, positive);
            views.cameras.push_back(camera_on_sphere(cam_dir, o));
            views.lights.push_back(PointLight{light_dir * o.light_radius, {1.0, 1.0, 1.0}});
            views.splits.emplace_back(split);
        }
    };
    add(o.train_count, "train", true);
    add(o.test_count, "test", true);
    add(o.ood_count, "ood", false);
    return views;
}

OlatSplit generate_olat_dataset(const AnalyticScene& scene, const OlatOptions& options) {
    scene.validate();
    const OlatViews views = sample_olat_views(options);
    return render_views(views, "oracle", [&](const Camera& cam, const PointLight& light) {
        return render_ground_truth(scene, cam, light);
    });
}

OlatSplit generate_model_dataset(const std::vector<GaussianPoint>& points, const OlatOptions& options,
                                 const RenderOptions& render_options) {
    const OlatViews views = sample_olat_views(options);
    return render_views(views, "model", [&](const Camera& cam, const PointLight& light) {
        return render(points, cam, light, render_options).composite;
    });
}

std::array<double, 4> quaternion_from_z(const Vec3d& n_in) {
    const Vec3d n = normalize(n_in);
    const Vec3d z{0.0, 0.0, 1.0};
    const double c = dot(z, n);
    if (c < -1.0 + 1e-12) return {0.0, 1.0, 0.0, 0.0};
    const Vec3d axis = cross(z, n);
    const double w = 1.0 + c;
    const double len = std::sqrt(w * w + dot(axis, axis));
    return {w / len, axis.x / len, axis.y / len, axis.z / len};
}

std::vector<GaussianPoint> sample_initial_points(const AnalyticScene& scene, std::size_t count, std::uint64_t seed) {
    scene.validate();
    std::vector<double> areas;
    for (const Sphere& s : scene.spheres) areas.push_back(4.0 * std::numbers::pi * s.radius * s.radius);
    for (const Plane& p : scene.planes) areas.push_back(4.0 * p.extent * p.extent);
    double total = 0.0;
    for (double a : areas) total += a;
    if (count == 0 || total <= 0.0) return {};

    // Area-proportional counts, largest remainder first.
    std::vector<std::size_t> counts(areas.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < areas.size(); ++k) {
        const double exact = static_cast<double>(count) * areas[k] / total;
        counts[k] = static_cast<std::size_t>(exact);
        assigned += counts[k];
        remainders.emplace_back(-(exact - static_cast<double>(counts[k])), k);
    }
    std::sort(remainders.begin(), remainders.end());
    for (std::size_t i = 0; assigned < count; ++i, ++assigned) ++counts[remainders[i % remainders.size()].second];

    Rng rng(seed);
    std::vector<GaussianPoint> out;
    out.reserve(count);
    auto emit = [&](const Vec3d& pos, const Vec3d& normal, double spacing, const Material& mat) {
        GaussianPoint g;
        const auto q = quaternion_from_z(normal);
        for (int c = 0; c < 3; ++c) g.position[c] = static_cast<float>(pos[c]);
        for (int c = 0; c < 4; ++c) g.rotation[c] = static_cast<float>(q[c]);
        g.log_scale = {static_cast<float>(std::log(0.6 * spacing)), static_cast<float>(std::log(0.6 * spacing)),
                       static_cast<float>(std::log(0.005 * spacing))};
        g.opacity_logit = 2.0F;
        for (int c = 0; c < 3; ++c) g.ambient_color[c] = static_cast<float>(mat.ambient[c] + 0.25 * mat.diffuse[c]);
        out.push_back(g);
    };
    for (std::size_t k = 0; k < areas.size(); ++k) {
        const std::size_t n = counts[k];
        if (n == 0) continue;
        const double spacing = std::sqrt(areas[k] / static_cast<double>(n));
        if (k < scene.spheres.size()) {
            // Fibonacci lattice with a random twist.
            const Sphere& s = scene.spheres[k];
            const double twist = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
            for (std::size_t i = 0; i < n; ++i) {
                const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
                const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
                const double phi = twist + golden * static_cast<double>(i);
                const Vec3d d{r * std::cos(phi), r * std::sin(phi), z};
                emit(s.center + d * s.radius, d, spacing, s.material);
            }
        } else {
            // Jittered grid; the last row may be partial.
            const Plane& p = scene.planes[k - scene.spheres.size()];
            Vec3d u, v;
            tangent_frame(p.normal, u, v);
            const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
            const std::size_t rows = (n + cols - 1) / cols;
            const double du = 2.0 * p.extent / static_cast<double>(cols);
            const double dv = 2.0 * p.extent / static_cast<double>(rows);
            for (std::size_t i = 0; i < n; ++i) {
                const double a = -p.extent + du * (static_cast<double>(i % cols) + 0.5 + rng.uniform(-0.25, 0.25));
                const double b = -p.extent + dv * (static_cast<double>(i / cols) + 0.5 + rng.uniform(-0.25, 0.25));
                emit(p.point + u * a + v * b, p.normal, spacing, p.material);
            }
        }
    }
    return out;
}

MicroScene make_micro_scene(std::size_t count, std::uint64_t seed, int size) {
    const Vec3d eye{0.3, -2.2, 1.0};
    const Vec3d light{0.8, -0.6, 1.4};
    Rng rng(seed);
    MicroScene m;
    for (std::size_t i = 0; i < count; ++i) {
        GaussianPoint g;
        g.position = {float(rng.uniform(-0.4, 0.4)), float(rng.uniform(-0.4, 0.4)), float(rng.uniform(-0.3, 0.3))};
        // Surfels face roughly along the half vector so the highlight term
        // moves the loss by more than finite-difference noise.
        const Vec3d p{g.position[0], g.position[1], g.position[2]};
        const Vec3d h = normalize(normalize(eye - p) + normalize(light - p));
        const Vec3d jitter{rng.normal(), rng.normal(), rng.normal()};
        const double spin = rng.uniform(-std::numbers::pi, std::numbers::pi);
        const auto q = quaternion_from_z(h + jitter * 0.15);
        // Twist about the normal so the in-plane axes stay random.
        const double c = std::cos(0.5 * spin), s = std::sin(0.5 * spin);
        g.rotation = {float(q[0] * c - q[3] * s), float(q[1] * c + q[2] * s), float(q[2] * c - q[1] * s),
                      float(q[3] * c + q[0] * s)};
        g.log_scale = {float(rng.uniform(-2.0, -1.2)), float(rng.uniform(-2.0, -1.2)), float(rng.uniform(-3.5, -2.5))};
        g.opacity_logit = float(rng.uniform(-0.5, 1.5));
        g.shadow_coeff_logit = float(rng.uniform(-1.0, 1.0));
        for (int k = 0; k < 3; ++k) {
            g.ambient_color[k] = float(rng.uniform(0.05, 0.3));
            g.diffuse_color[k] = float(rng.uniform(0.2, 0.8));
            g.normal_residual_out[k] = float(rng.uniform(-0.1, 0.1));
            g.normal_residual_in[k] = float(rng.uniform(-0.1, 0.1));
        }
        g.specular_coeff = float(rng.uniform(0.1, 0.5));
        m.points.push_back(g);
        for (float v : g.flatten()) m.params.push_back(v);
    }
    const double focal = size * 1.2;
    m.capture.camera = Camera::look_at(eye, {0, 0, 0}, {0, 0, 1}, focal, size, size);
    m.capture.light.position = light;
    m.capture.image = Image(size, size, 3);
    for (double& v : m.capture.image.data) v = rng.uniform(0.0, 0.6);
    m.support.camera = Camera::look_at({-1.2, -1.9, 1.3}, {0, 0, 0}, {0, 0, 1}, focal, size, size);
    m.support.light.position = {-0.9, -0.7, 1.5};
    m.support.image = Image(size, size, 3);
    for (double& v : m.support.image.data) v = rng.uniform(0.0, 0.6);
    return m;
}

}  // namespace phong_splat
