#pragma once

#include <array>
#include <memory>
#include <span>
#include <vector>

#include "phong_splat/gaussian_ops.hpp"
#include "phong_splat/param_set.hpp"
#include "phong_splat/rasterizer.hpp"
#include "phong_splat/scene.hpp"
#include "phong_splat/tape.hpp"
#include "phong_splat/visibility.hpp"

namespace phong_splat {

enum class ShadingMode {
    AmbientOnly,  // diffuse and specular terms off
    Unshadowed,   // visibility 1
    Shadowed,     // visibility = light transmittance
};

struct RenderOptions {
    ShadingMode mode = ShadingMode::Shadowed;
    double shininess = kDefaultShininess;
    bool colored_diffuse = false;
    Vec3d background{0.0, 0.0, 0.0};
};

// Builds the rasterizer inputs of one point: mean (2), conic (3), opacity,
// then ambient, diffuse, specular and the camera-space normal. Returns false
// for culled or off-screen points.
template <class S>
bool prepare_splat(const PointParams<S>& p, const Camera& camera, const PointLight& light, const S& visibility,
                   ShadingMode mode, const ShadingOptions& shading, std::array<S, kSplatInputs>& in, double& depth,
                   std::array<int, 4>& bounds) {
    const Mat3<S> r = gaussian_rotation(p.rotation);
    const Mat3<S> sigma = rotate_diagonal(r, squared_scale(p.log_scale));
    const ProjectedGaussian<S> proj = project(p.position, sigma, camera);
    if (proj.culled) return false;
    const std::array<double, 2> mean{primal(proj.mean_x), primal(proj.mean_y)};
    const std::array<double, 3> dilated{primal(proj.cov[0]) + kScreenDilation, primal(proj.cov[1]),
                                        primal(proj.cov[2]) + kScreenDilation};
    if (!splat_bounds(mean, dilated, camera.width, camera.height, bounds[0], bounds[1], bounds[2], bounds[3])) {
        return false;
    }
    depth = primal(proj.camera_position.z);
    in[0] = proj.mean_x;
    in[1] = proj.mean_y;
    in[2] = proj.conic[0];
    in[3] = proj.conic[1];
    in[4] = proj.conic[2];
    in[5] = sigmoid(p.opacity_logit);

    const Vec3d eye = camera.center();
    const Vec3<S> view = normalize(Vec3<S>::from(eye) - p.position);
    const Vec3<S> n = gaussian_normal(r, primal(p.log_scale), p.residual_out, p.residual_in, view);
    Vec3<S> diffuse{S(0.0), S(0.0), S(0.0)};
    Vec3<S> specular{S(0.0), S(0.0), S(0.0)};
    if (mode != ShadingMode::AmbientOnly) {
        const ShadedColor<S> c = shade(p, n, eye, light, visibility, shading);
        diffuse = c.diffuse;
        specular = c.specular;
    }
    const Mat3d wr = camera.rotation();
    for (int k = 0; k < 3; ++k) {
        in[6 + k] = p.ambient[k];
        in[9 + k] = diffuse[k];
        in[12 + k] = specular[k];
        in[15 + k] = wr(k, 0) * n.x + wr(k, 1) * n.y + wr(k, 2) * n.z;
    }
    return true;
}

// Renders every buffer. In Shadowed mode a BVH over `params` is built unless
// one is supplied.
FrameBuffers render(std::span<const double> params, const Camera& camera, const PointLight& light,
                    const RenderOptions& options, const Bvh* bvh = nullptr);
FrameBuffers render(const std::vector<GaussianPoint>& points, const Camera& camera, const PointLight& light,
                    const RenderOptions& options = {});

// Renders with caller-supplied per-point visibility (mode must not be AmbientOnly).
FrameBuffers render_with_visibility(std::span<const double> params, const Camera& camera, const PointLight& light,
                                    std::span<const double> visibility, const RenderOptions& options);

template <class T>
struct TapeImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<Var<T>> data;

    TapeImage() = default;
    TapeImage(int w, int h, int c) : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c) {}
};

template <class T>
Image values(const TapeImage<T>& img) {
    Image out(img.width, img.height, img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i].primal_value();
    return out;
}

template <class T>
struct TapeFrame {
    TapeImage<T> composite;
    TapeImage<T> ambient;
    TapeImage<T> diffuse;
    TapeImage<T> specular;
    TapeImage<T> normal;
    TapeImage<T> alpha;
    Image depth;        // expected depth, values only
    Image alpha_value;  // accumulated alpha, values only
    std::vector<Var<T>> opacity;     // per point
    std::vector<Var<T>> visibility;  // per point; empty unless Shadowed
};

// Records a render on the tape. The blend is one fused node whose backward is
// the analytic reverse pass of the compositing loop.
template <class T>
TapeFrame<T> render_tape(Tape<T>& tape, std::span<const Var<T>> params, const Camera& camera, const PointLight& light,
                         const RenderOptions& options, const Bvh* bvh) {
    const std::size_t n = params.size() / kParamsPerPoint;
    const int w = camera.width;
    const int h = camera.height;
    TapeFrame<T> frame;
    if (options.mode == ShadingMode::Shadowed) {
        if (bvh == nullptr) throw std::invalid_argument("render_tape: shadowed mode needs a BVH");
        frame.visibility = light_transmittance_tape(tape, params, *bvh, light);
    }
    ShadingOptions shading;
    shading.shininess = options.shininess;
    shading.colored_diffuse = options.colored_diffuse;

    auto splats = std::make_shared<std::vector<BlendSplat<T>>>();
    auto ids = std::make_shared<std::vector<std::array<std::uint32_t, kSplatInputs>>>(n);
    frame.opacity.resize(n);
    std::array<Var<T>, kSplatInputs> in;
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = point_params<Var<T>>(params, i);
        const Var<T> vis = options.mode == ShadingMode::Shadowed ? frame.visibility[i] : Var<T>(1.0);
        double depth = 0.0;
        std::array<int, 4> b{};
        if (!prepare_splat(p, camera, light, vis, options.mode, shading, in, depth, b)) {
            frame.opacity[i] = sigmoid(p.opacity_logit);
            continue;
        }
        frame.opacity[i] = in[5];
        BlendSplat<T> s;
        s.mean = {in[0].value(), in[1].value()};
        s.conic = {in[2].value(), in[3].value(), in[4].value()};
        s.opacity = in[5].value();
        for (int k = 0; k < kBlendFeatures; ++k) s.feature[k] = in[6 + k].value();
        s.depth = depth;
        s.id = static_cast<std::uint32_t>(i);
        s.x0 = b[0];
        s.y0 = b[1];
        s.x1 = b[2];
        s.y1 = b[3];
        splats->push_back(s);
        for (int k = 0; k < kSplatInputs; ++k) (*ids)[i][k] = in[k].is_constant() ? Var<T>::kConstant : in[k].id();
    }
    sort_splats(*splats);
    const BlendResult<T> blend = blend_forward(*splats, w, h);

    constexpr int kOut = kBlendFeatures + 1;
    const std::size_t pixels = static_cast<std::size_t>(w) * h;
    std::vector<T> outputs(pixels * kOut);
    for (std::size_t p = 0; p < pixels; ++p) {
        for (int k = 0; k < kBlendFeatures; ++k) outputs[p * kOut + k] = blend.features[p * kBlendFeatures + k];
        outputs[p * kOut + kBlendFeatures] = blend.alpha[p];
    }
    const auto first = static_cast<std::uint32_t>(tape.node_count());
    auto vars = tape.custom("rasterize", outputs, [splats, ids, first, w, h, pixels](std::span<T> adj) {
        std::vector<T> d_features(pixels * kBlendFeatures);
        std::vector<T> d_alpha(pixels);
        for (std::size_t p = 0; p < pixels; ++p) {
            for (int k = 0; k < kBlendFeatures; ++k) d_features[p * kBlendFeatures + k] = adj[first + p * kOut + k];
            d_alpha[p] = adj[first + p * kOut + kBlendFeatures];
        }
        const auto grads = blend_backward<T>(*splats, w, h, d_features, d_alpha);
        for (std::size_t s = 0; s < splats->size(); ++s) {
            const auto& in_ids = (*ids)[(*splats)[s].id];
            for (int k = 0; k < kSplatInputs; ++k) {
                if (in_ids[k] != Var<T>::kConstant) adj[in_ids[k]] += grads[s][k];
            }
        }
    });

    frame.ambient = TapeImage<T>(w, h, 3);
    frame.diffuse = TapeImage<T>(w, h, 3);
    frame.specular = TapeImage<T>(w, h, 3);
    frame.normal = TapeImage<T>(w, h, 3);
    frame.composite = TapeImage<T>(w, h, 3);
    frame.alpha = TapeImage<T>(w, h, 1);
    frame.depth = Image(w, h, 1);
    frame.alpha_value = Image(w, h, 1);
    const bool has_background = options.background.x != 0.0 || options.background.y != 0.0 ||
                                options.background.z != 0.0;
    for (std::size_t p = 0; p < pixels; ++p) {
        const Var<T>* v = &vars[p * kOut];
        const Var<T>& a = v[kBlendFeatures];
        frame.alpha.data[p] = a;
        for (int c = 0; c < 3; ++c) {
            frame.ambient.data[p * 3 + c] = v[c];
            frame.diffuse.data[p * 3 + c] = v[3 + c];
            frame.specular.data[p * 3 + c] = v[6 + c];
            frame.normal.data[p * 3 + c] = v[9 + c];
            Var<T> total = v[c] + v[3 + c] + v[6 + c];
            if (has_background) total = total + (1.0 - a) * options.background[c];
            frame.composite.data[p * 3 + c] = total;
        }
        const double av = a.primal_value();
        frame.alpha_value.data[p] = av;
        frame.depth.data[p] = blend.depth_sum[p] / std::max(av, 1e-8);
    }
    return frame;
}

}  // namespace phong_splat
