#include "phong_splat/rasterizer.hpp"

#include <stdexcept>
#include <string>

namespace phong_splat {

bool splat_bounds(const std::array<double, 2>& mean, const std::array<double, 3>& dilated_cov, int width, int height,
                  int& x0, int& y0, int& x1, int& y1) {
    // The 3 sigma ellipse spans 3 sqrt(cov_kk) along each image axis.
    const double rx = 3.0 * std::sqrt(dilated_cov[0]);
    const double ry = 3.0 * std::sqrt(dilated_cov[2]);
    const double lo_x = std::floor(mean[0] - rx - 0.5);
    const double hi_x = std::ceil(mean[0] + rx - 0.5) + 1.0;
    const double lo_y = std::floor(mean[1] - ry - 0.5);
    const double hi_y = std::ceil(mean[1] + ry - 0.5) + 1.0;
    x0 = static_cast<int>(std::clamp(lo_x, 0.0, static_cast<double>(width)));
    x1 = static_cast<int>(std::clamp(hi_x, 0.0, static_cast<double>(width)));
    y0 = static_cast<int>(std::clamp(lo_y, 0.0, static_cast<double>(height)));
    y1 = static_cast<int>(std::clamp(hi_y, 0.0, static_cast<double>(height)));
    return x0 < x1 && y0 < y1;
}

FrameBuffers assemble_buffers(const BlendResult<double>& blend, const Vec3d& background) {
    const int w = blend.width;
    const int h = blend.height;
    FrameBuffers fb;
    fb.composite = Image(w, h, 3);
    fb.ambient = Image(w, h, 3);
    fb.diffuse = Image(w, h, 3);
    fb.specular = Image(w, h, 3);
    fb.normal = Image(w, h, 3);
    fb.depth = Image(w, h, 1);
    fb.alpha = Image(w, h, 1);
    fb.transmittance = Image(w, h, 1);
    const std::size_t pixels = static_cast<std::size_t>(w) * h;
    for (std::size_t p = 0; p < pixels; ++p) {
        const double* f = &blend.features[p * kBlendFeatures];
        const double a = blend.alpha[p];
        for (int c = 0; c < 3; ++c) {
            fb.ambient.data[p * 3 + c] = f[c];
            fb.diffuse.data[p * 3 + c] = f[3 + c];
            fb.specular.data[p * 3 + c] = f[6 + c];
            fb.normal.data[p * 3 + c] = f[9 + c];
            fb.composite.data[p * 3 + c] = f[c] + f[3 + c] + f[6 + c] + (1.0 - a) * background[c];
        }
        fb.alpha.data[p] = a;
        fb.depth.data[p] = blend.depth_sum[p] / std::max(a, 1e-8);
        fb.transmittance.data[p] = blend.transmittance[p];
    }
    return fb;
}

FrameBuffers rasterize(std::span<const Splat2D> splats, std::span<const SplatShading> shading, const Camera& camera,
                       const Vec3d& background) {
    if (splats.size() != shading.size()) throw std::invalid_argument("rasterize: one shading entry per splat required");
    std::vector<BlendSplat<double>> blend;
    blend.reserve(splats.size());
    for (std::size_t i = 0; i < splats.size(); ++i) {
        const Splat2D& s = splats[i];
        const double a = s.cov[0] + kScreenDilation;
        const double b = s.cov[1];
        const double c = s.cov[2] + kScreenDilation;
        const double det = a * c - b * b;
        if (!(det > 0.0) || !std::isfinite(det)) {
            throw std::domain_error("singular screen covariance for point " + std::to_string(s.id));
        }
        BlendSplat<double> bs;
        bs.mean = s.mean;
        bs.conic = {c / det, -b / det, a / det};
        bs.opacity = s.opacity;
        bs.depth = s.depth;
        bs.id = s.id;
        const SplatShading& sh = shading[i];
        for (int k = 0; k < 3; ++k) {
            bs.feature[k] = sh.ambient[k];
            bs.feature[3 + k] = sh.diffuse[k];
            bs.feature[6 + k] = sh.specular[k];
            bs.feature[9 + k] = sh.normal[k];
        }
        if (!splat_bounds(s.mean, {a, b, c}, camera.width, camera.height, bs.x0, bs.y0, bs.x1, bs.y1)) continue;
        blend.push_back(bs);
    }
    sort_splats(blend);
    return assemble_buffers(blend_forward(blend, camera.width, camera.height), background);
}

FrameBuffers rasterize(std::span<const Splat2D> splats, std::span<const Vec3d> colors, const Camera& camera,
                       const Vec3d& background) {
    if (splats.size() != colors.size()) throw std::invalid_argument("rasterize: one color per splat required");
    std::vector<SplatShading> shading(colors.size());
    for (std::size_t i = 0; i < colors.size(); ++i) shading[i].ambient = colors[i];
    return rasterize(splats, shading, camera, background);
}

PseudoNormals depth_to_pseudo_normal(const Image& depth, const Image& alpha, const Camera& camera) {
    const int w = depth.width;
    const int h = depth.height;
    PseudoNormals out;
    out.normal = Image(w, h, 3);
    out.valid.assign(static_cast<std::size_t>(w) * h, false);
    auto ok = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && alpha.at(x, y) > kValidAlpha; };
    auto point = [&](int x, int y) {
        const double z = depth.at(x, y);
        return Vec3d{(x + 0.5 - camera.cx) * z / camera.fx, (y + 0.5 - camera.cy) * z / camera.fy, z};
    };
    // Central difference when both neighbours are valid, otherwise one-sided.
    auto diff = [&](int x, int y, int sx, int sy, Vec3d& d) {
        const bool fwd = ok(x + sx, y + sy);
        const bool bwd = ok(x - sx, y - sy);
        if (fwd && bwd) {
            d = point(x + sx, y + sy) - point(x - sx, y - sy);
        } else if (fwd) {
            d = point(x + sx, y + sy) - point(x, y);
        } else if (bwd) {
            d = point(x, y) - point(x - sx, y - sy);
        } else {
            return false;
        }
        return true;
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!ok(x, y)) continue;
            Vec3d dx;
            Vec3d dy;
            if (!diff(x, y, 1, 0, dx) || !diff(x, y, 0, 1, dy)) continue;
            Vec3d n = cross(dx, dy);
            const double len = norm(n);
            if (!(len > 1e-12) || !std::isfinite(len)) continue;
            n = n / len;
            if (dot(n, point(x, y)) > 0.0) n = -n;
            out.valid[static_cast<std::size_t>(y) * w + x] = true;
            for (int c = 0; c < 3; ++c) out.normal.at(x, y, c) = n[c];
        }
    }
    return out;
}

void write_buffers(const std::filesystem::path& dir, const FrameBuffers& buffers, bool srgb) {
    std::filesystem::create_directories(dir);
    write_png(dir / "composite.png", buffers.composite, srgb);
    write_png(dir / "ambient.png", buffers.ambient, srgb);
    write_png(dir / "diffuse.png", buffers.diffuse, srgb);
    write_png(dir / "specular.png", buffers.specular, srgb);
    Image normal = buffers.normal;
    for (double& v : normal.data) v = 0.5 * v + 0.5;
    write_png(dir / "normal.png", normal, false);
    write_pfm(dir / "depth.pfm", buffers.depth);
}

}  // namespace phong_splat
