#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "phong_splat/autodiff.hpp"
#include "phong_splat/render.hpp"
#include "phong_splat/rng.hpp"

using namespace phong_splat;

namespace {

Camera axis_camera(double focal, int w, int h) {
    Camera c;  // identity pose: looking down +z from the origin
    c.fx = c.fy = focal;
    c.cx = 0.5 * w;
    c.cy = 0.5 * h;
    c.width = w;
    c.height = h;
    return c;
}

GaussianPoint point_at(double x, double y, double z, Vec3d log_scale = {0, 0, 0}) {
    GaussianPoint g;
    g.position = {float(x), float(y), float(z)};
    g.log_scale = {float(log_scale.x), float(log_scale.y), float(log_scale.z)};
    return g;
}

Splat2D splat(double x, double y, double depth, std::uint32_t id, double opacity, double var = 0.5) {
    Splat2D s;
    s.mean = {x, y};
    s.cov = {var, 0.0, var};
    s.depth = depth;
    s.id = id;
    s.opacity = opacity;
    return s;
}

std::vector<Splat2D> random_splats(std::size_t n, int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Splat2D> out;
    for (std::size_t i = 0; i < n; ++i) {
        Splat2D s;
        s.mean = {rng.uniform(0, w), rng.uniform(0, h)};
        const double a = rng.uniform(0.5, 6.0);
        const double c = rng.uniform(0.5, 6.0);
        s.cov = {a, rng.uniform(-0.4, 0.4) * std::sqrt(a * c), c};
        s.depth = std::floor(rng.uniform(1.0, 4.0) * 4.0) / 4.0;  // coarse, so ties occur
        s.id = static_cast<std::uint32_t>(i);
        s.opacity = rng.uniform(0.1, 1.0);
        out.push_back(s);
    }
    return out;
}

std::vector<SplatShading> random_shading(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<SplatShading> out(n);
    for (auto& s : out) {
        s.ambient = {rng.uniform(), rng.uniform(), rng.uniform()};
        s.diffuse = {rng.uniform(), rng.uniform(), rng.uniform()};
        s.specular = {rng.uniform(), rng.uniform(), rng.uniform()};
        s.normal = normalize(Vec3d{rng.normal(), rng.normal(), rng.normal()});
    }
    return out;
}

}  // namespace

TEST_CASE("isotropic Gaussian on the optical axis projects to (f/z)^2 I") {
    const double f = 20.0;
    const double z = 4.0;
    const auto s = project_gaussian(point_at(0, 0, z), axis_camera(f, 32, 32));
    REQUIRE(s.has_value());
    const double expect = (f / z) * (f / z);
    CHECK(s->cov[0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(s->cov[2] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(s->cov[1]) < 1e-12);
    CHECK(s->mean[0] == doctest::Approx(16.0));
    CHECK(s->depth == doctest::Approx(z));
}

TEST_CASE("points at or behind the near plane are culled") {
    const Camera cam = axis_camera(20, 32, 32);
    CHECK_FALSE(project_gaussian(point_at(0, 0, -1), cam).has_value());
    CHECK_FALSE(project_gaussian(point_at(0, 0, 0), cam).has_value());
    CHECK_FALSE(project_gaussian(point_at(0, 0, 0.01), cam).has_value());
    CHECK(project_gaussian(point_at(0, 0, 0.02), cam).has_value());
}

TEST_CASE("doubling the focal length doubles the offset from the principal point") {
    const GaussianPoint g = point_at(0.5, -0.25, 2.0);
    const auto a = project_gaussian(g, axis_camera(10, 32, 32));
    const auto b = project_gaussian(g, axis_camera(20, 32, 32));
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(b->mean[0] - 16.0 == doctest::Approx(2.0 * (a->mean[0] - 16.0)));
    CHECK(b->mean[1] - 16.0 == doctest::Approx(2.0 * (a->mean[1] - 16.0)));
}

TEST_CASE("single saturated splat gives 0.999 of its color") {
    const Camera cam = axis_camera(10, 8, 8);
    const std::vector<Splat2D> s{splat(3.5, 4.5, 2.0, 0, 1.0)};
    const std::vector<Vec3d> c{{0.2, 0.4, 0.8}};
    const FrameBuffers fb = rasterize(s, c, cam);
    CHECK(fb.composite.at(3, 4, 0) == doctest::Approx(0.999 * 0.2).epsilon(1e-12));
    CHECK(fb.composite.at(3, 4, 2) == doctest::Approx(0.999 * 0.8).epsilon(1e-12));
    CHECK(fb.alpha.at(3, 4) == doctest::Approx(0.999).epsilon(1e-12));
}

TEST_CASE("two splats blend front to back") {
    const Camera cam = axis_camera(10, 8, 8);
    // Given in back-to-front order to exercise the sort.
    const std::vector<Splat2D> s{splat(3.5, 4.5, 3.0, 0, 1.0), splat(3.5, 4.5, 1.0, 1, 0.5)};
    const Vec3d c_back{0.0, 1.0, 0.5};
    const Vec3d c_front{1.0, 0.0, 0.5};
    const std::vector<Vec3d> c{c_back, c_front};
    const FrameBuffers fb = rasterize(s, c, cam);
    for (int k = 0; k < 3; ++k) {
        CHECK(fb.composite.at(3, 4, k) == doctest::Approx(0.5 * c_front[k] + 0.5 * 0.999 * c_back[k]).epsilon(1e-12));
    }
}

TEST_CASE("no splats leaves the background") {
    const Camera cam = axis_camera(10, 5, 4);
    const FrameBuffers fb = rasterize(std::span<const Splat2D>{}, std::span<const Vec3d>{}, cam, {0.1, 0.2, 0.3});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x) {
            CHECK(fb.alpha.at(x, y) == 0.0);
            CHECK(fb.composite.at(x, y, 1) == 0.2);
        }
}

TEST_CASE("accumulated alpha and final transmittance sum to one") {
    const Camera cam = axis_camera(10, 40, 36);
    const auto s = random_splats(120, 40, 36, 3);
    const auto sh = random_shading(s.size(), 4);
    const FrameBuffers fb = rasterize(s, sh, cam);
    double worst = 0.0;
    for (std::size_t p = 0; p < fb.alpha.pixel_count(); ++p) {
        worst = std::max(worst, std::abs(fb.alpha.data[p] + fb.transmittance.data[p] - 1.0));
        CHECK(fb.alpha.data[p] >= 0.0);
        CHECK(fb.alpha.data[p] <= 1.0);
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("composite equals the sum of the component buffers") {
    const Camera cam = axis_camera(10, 40, 36);
    const auto s = random_splats(80, 40, 36, 5);
    const auto sh = random_shading(s.size(), 6);
    const FrameBuffers fb = rasterize(s, sh, cam);
    double worst = 0.0;
    for (std::size_t i = 0; i < fb.composite.size(); ++i) {
        worst = std::max(worst, std::abs(fb.composite.data[i] -
                                         (fb.ambient.data[i] + fb.diffuse.data[i] + fb.specular.data[i])));
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("permuting the input splats changes nothing") {
    const Camera cam = axis_camera(10, 40, 36);
    auto s = random_splats(100, 40, 36, 7);
    auto sh = random_shading(s.size(), 8);
    const FrameBuffers a = rasterize(s, sh, cam);
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(9);
    rng.shuffle(order);
    std::vector<Splat2D> s2;
    std::vector<SplatShading> sh2;
    for (std::size_t i : order) {
        s2.push_back(s[i]);
        sh2.push_back(sh[i]);
    }
    const FrameBuffers b = rasterize(s2, sh2, cam);
    CHECK(a.composite == b.composite);
    CHECK(a.normal == b.normal);
    CHECK(a.depth == b.depth);
    CHECK(a.alpha == b.alpha);
}

TEST_CASE("singular screen covariance names the point") {
    const Camera cam = axis_camera(10, 8, 8);
    Splat2D s = splat(3.5, 3.5, 1.0, 42, 0.5);
    s.cov = {-0.3, 0.0, 1.0};
    const std::vector<Splat2D> v{s};
    const std::vector<Vec3d> c{{1, 1, 1}};
    try {
        rasterize(v, c, cam);
        FAIL("expected an error");
    } catch (const std::domain_error& e) {
        CHECK(std::string(e.what()).find("42") != std::string::npos);
    }
}

TEST_CASE("rasterization gradients match finite differences on two Gaussians") {
    const Camera cam = Camera::look_at({0.2, -3.0, 0.6}, {0, 0, 0}, {0, 0, 1}, 9.6, 8, 8);
    PointLight light;
    light.position = {1.0, -1.5, 2.0};
    std::vector<double> params;
    Rng rng(21);
    for (int i = 0; i < 2; ++i) {
        GaussianPoint g = point_at(0.25 * (i == 0 ? -1 : 1), 0.1 * i, 0.1, {-1.2, -1.4, -2.5});
        g.rotation = {0.9F, 0.2F, float(-0.1 * i), 0.3F};
        g.opacity_logit = float(0.3 + i);
        for (int k = 0; k < 3; ++k) {
            g.ambient_color[k] = float(rng.uniform(0.1, 0.4));
            g.diffuse_color[k] = float(rng.uniform(0.2, 0.8));
        }
        g.specular_coeff = 0.3F;
        for (float v : g.flatten()) params.push_back(v);
    }
    std::vector<double> weights(8 * 8 * 4);
    for (double& w : weights) w = rng.uniform(-1.0, 1.0);
    RenderOptions opts;
    opts.mode = ShadingMode::Unshadowed;
    auto loss = make_objective([&](auto& tape, auto p) {
        const auto frame = render_tape(tape, p, cam, light, opts, nullptr);
        auto acc = frame.alpha.data[0] * weights[0];
        for (std::size_t i = 1; i < frame.alpha.data.size(); ++i) acc = acc + frame.alpha.data[i] * weights[i];
        for (std::size_t i = 0; i < frame.composite.data.size(); ++i) {
            acc = acc + frame.composite.data[i] * weights[64 + i];
        }
        return acc;
    });
    const auto report = finite_diff_check(loss, params, 1e-6, params.size(), 1);
    MESSAGE("checked " << report.checked << ", flagged " << report.flagged.size() << ", worst "
                       << report.max_rel_error);
    CHECK(report.checked >= params.size() - 4);
    CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("fronto-parallel plane gives normals facing the camera") {
    const Camera cam = axis_camera(20, 16, 16);
    const Image depth(16, 16, 1, 3.0);
    const Image alpha(16, 16, 1, 1.0);
    const PseudoNormals pn = depth_to_pseudo_normal(depth, alpha, cam);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            CHECK(pn.valid[y * 16 + x]);
            CHECK(pn.normal.at(x, y, 2) == doctest::Approx(-1.0));
        }
}

TEST_CASE("tilted plane gives the analytic normal") {
    const Camera cam = axis_camera(20, 16, 16);
    // Plane through (0, 0, 3) with camera-space normal (0, -1, -1) / sqrt(2).
    Image depth(16, 16, 1);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) depth.at(x, y) = 3.0 / (1.0 + (y + 0.5 - cam.cy) / cam.fy);
    const Image alpha(16, 16, 1, 1.0);
    const PseudoNormals pn = depth_to_pseudo_normal(depth, alpha, cam);
    const Vec3d expect = normalize(Vec3d{0, -1, -1});
    double worst_deg = 0.0;
    for (int y = 1; y < 15; ++y)
        for (int x = 1; x < 15; ++x) {
            REQUIRE(pn.valid[y * 16 + x]);
            const Vec3d n{pn.normal.at(x, y, 0), pn.normal.at(x, y, 1), pn.normal.at(x, y, 2)};
            worst_deg = std::max(worst_deg, std::acos(std::clamp(dot(n, expect), -1.0, 1.0)) * 180.0 / M_PI);
        }
    CHECK(worst_deg < 1.0);
}

TEST_CASE("empty depth map has no valid pseudo-normals") {
    const Camera cam = axis_camera(20, 8, 8);
    const PseudoNormals pn = depth_to_pseudo_normal(Image(8, 8, 1), Image(8, 8, 1), cam);
    CHECK(std::none_of(pn.valid.begin(), pn.valid.end(), [](bool v) { return v; }));
}

TEST_CASE("shading normal follows the shortest axis and the viewer side") {
    GaussianPoint g = point_at(0, 0, 0, {1.0, 0.5, 0.0});
    Vec3d n = gaussian_normal(g, {0, 0, 1});
    CHECK(n.z == doctest::Approx(1.0));
    n = gaussian_normal(g, {0, 0, -1});
    CHECK(n.z == doctest::Approx(-1.0));
    g.normal_residual_out = {0.1F, 0.0F, 0.0F};
    n = gaussian_normal(g, {0, 0, 1});
    const double len = std::sqrt(1.0 + double(0.1F) * double(0.1F));
    CHECK(n.x == doctest::Approx(double(0.1F) / len).epsilon(1e-12));
    CHECK(n.z == doctest::Approx(1.0 / len).epsilon(1e-12));
}

TEST_CASE("equal scales resolve to the lowest axis") {
    const GaussianPoint g = point_at(0, 0, 0, {0.0, 0.0, 0.0});
    const Vec3d n = gaussian_normal(g, {1, 0, 0});
    CHECK(n.x == doctest::Approx(1.0));
}

TEST_CASE("degenerate residual is reported") {
    GaussianPoint g = point_at(0, 0, 0, {1.0, 0.5, 0.0});
    g.normal_residual_out = {0.0F, 0.0F, -1.0F};
    CHECK_THROWS_AS(gaussian_normal(g, {0, 0, 1}), ShadingError);
}

TEST_CASE("shading normals are unit length for random attributes") {
    Rng rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        GaussianPoint g;
        g.rotation = {float(rng.normal()), float(rng.normal()), float(rng.normal()), float(rng.normal())};
        g.log_scale = {float(rng.uniform(-3, 0)), float(rng.uniform(-3, 0)), float(rng.uniform(-3, 0))};
        for (int k = 0; k < 3; ++k) {
            g.normal_residual_out[k] = float(rng.uniform(-0.3, 0.3));
            g.normal_residual_in[k] = float(rng.uniform(-0.3, 0.3));
        }
        const Vec3d view{rng.normal(), rng.normal(), rng.normal()};
        CHECK(norm(gaussian_normal(g, view)) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("light falloff follows the inverse square of distance") {
    Rng rng(18);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec3d n = normalize(Vec3d{rng.normal(), rng.normal(), rng.normal()});
        const Vec3d p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        Vec3d dir = normalize(Vec3d{rng.normal(), rng.normal(), rng.normal()});
        if (dot(dir, n) < 0.1) dir = dir - n * (2.0 * dot(dir, n)) + n * 0.2;
        dir = normalize(dir);
        const Vec3d eye = p + n * 2.0;
        const double t = rng.uniform(0.5, 3.0);
        const double d1 = diffuse_intensity(n, p, p + dir);
        const double s1 = specular_intensity(n, p, eye, p + dir, kDefaultShininess);
        CHECK(diffuse_intensity(n, p, p + dir * t) * t * t == doctest::Approx(d1).epsilon(1e-12));
        CHECK(specular_intensity(n, p, eye, p + dir * t, kDefaultShininess) * t * t == doctest::Approx(s1).epsilon(1e-12));
    }
}

TEST_CASE("diffuse intensity") {
    const Vec3d o{0, 0, 0};
    CHECK(diffuse_intensity(Vec3d{0, 0, 1}, o, Vec3d{0, 0, 1}) == doctest::Approx(1.0));
    CHECK(diffuse_intensity(Vec3d{0, 0, 1}, o, Vec3d{0, 0, -2}) == 0.0);
    CHECK(diffuse_intensity(Vec3d{0, 0, 1}, o, Vec3d{0, 3, 4}) == doctest::Approx(0.032).epsilon(1e-12));
    CHECK_THROWS(diffuse_intensity(Vec3d{0, 0, 1}, o, Vec3d{0, 0, 1e-8}));
}

TEST_CASE("specular intensity") {
    const Vec3d o{0, 0, 0};
    const Vec3d n{0, 0, 1};
    for (double p : {1.0, 8.0, 64.0}) CHECK(specular_intensity(n, o, Vec3d{0, 0, 5}, Vec3d{0, 0, 1}, p) == doctest::Approx(1.0));
    // l = v at 60 degrees from n, so h = l and n.h = 0.5.
    const Vec3d dir{std::sqrt(3.0) / 2.0, 0.0, 0.5};
    CHECK(specular_intensity(n, o, dir * 3.0, dir, 2.0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(specular_intensity(n, o, Vec3d{0, 0, -3}, Vec3d{0, 0, -1}, 2.0) == 0.0);
    CHECK(specular_intensity(n, o, Vec3d{1, 0, 0}, Vec3d{-1, 0, 0}, 2.0) == 0.0);
}

TEST_CASE("shade composes the visibility-weighted terms") {
    const Camera cam = Camera::look_at({0, 0, 3}, {0, 0, 0}, {0, 1, 0}, 20, 16, 16);
    GaussianPoint g = point_at(0, 0, 0, {-1, -1, -3});
    g.diffuse_color = {0.4F, 0.2F, 0.0F};
    PointLight light;
    light.position = {0, 0, std::sqrt(2.0)};  // r^2 = 2, n = l, so I_d = 0.5

    auto c = shade(g, cam, light, 0.5);
    CHECK(c.total.x == doctest::Approx(double(0.4F) * 0.25).epsilon(1e-12));
    CHECK(c.total.y == doctest::Approx(double(0.2F) * 0.25).epsilon(1e-12));
    CHECK(c.total.z == 0.0);

    g.ambient_color = {0.1F, 0.2F, 0.3F};
    g.specular_coeff = 0.5F;
    c = shade(g, cam, light, 0.0);
    for (int k = 0; k < 3; ++k) CHECK(c.total[k] == double(g.ambient_color[k]));

    light.position = {0, 0, -2};
    c = shade(g, cam, light, 1.0);
    for (int k = 0; k < 3; ++k) CHECK(c.total[k] == double(g.ambient_color[k]));

    light.position = {0.3, 0.2, 1.5};
    light.color = {1.0, 0.5, 0.25};
    c = shade(g, cam, light, 1.0);
    for (int k = 0; k < 3; ++k) {
        CHECK(c.total[k] == c.ambient[k] + c.diffuse[k] + c.specular[k]);
        CHECK(c.specular[k] >= 0.0);
    }
    CHECK(c.specular.y == doctest::Approx(0.5 * c.specular.x));
    double prev = -1.0;
    for (double v = 0.0; v <= 1.0; v += 0.125) {
        const double t = shade(g, cam, light, v).total.x;
        CHECK(t >= prev);
        prev = t;
    }
}
