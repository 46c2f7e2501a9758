#include "phong_splat/render.hpp"

#include <stdexcept>

namespace phong_splat {

FrameBuffers render_with_visibility(std::span<const double> params, const Camera& camera, const PointLight& light,
                                    std::span<const double> visibility, const RenderOptions& options) {
    const std::size_t n = params.size() / kParamsPerPoint;
    if (options.mode != ShadingMode::AmbientOnly && visibility.size() != n) {
        throw std::invalid_argument("render: one visibility value per point required");
    }
    ShadingOptions shading;
    shading.shininess = options.shininess;
    shading.colored_diffuse = options.colored_diffuse;
    std::vector<BlendSplat<double>> splats;
    splats.reserve(n);
    std::array<double, kSplatInputs> in{};
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = point_params<double>(params, i);
        const double vis = options.mode == ShadingMode::AmbientOnly ? 1.0 : visibility[i];
        double depth = 0.0;
        std::array<int, 4> b{};
        if (!prepare_splat(p, camera, light, vis, options.mode, shading, in, depth, b)) continue;
        BlendSplat<double> s;
        s.mean = {in[0], in[1]};
        s.conic = {in[2], in[3], in[4]};
        s.opacity = in[5];
        for (int k = 0; k < kBlendFeatures; ++k) s.feature[k] = in[6 + k];
        s.depth = depth;
        s.id = static_cast<std::uint32_t>(i);
        s.x0 = b[0];
        s.y0 = b[1];
        s.x1 = b[2];
        s.y1 = b[3];
        splats.push_back(s);
    }
    sort_splats(splats);
    return assemble_buffers(blend_forward(splats, camera.width, camera.height), options.background);
}

FrameBuffers render(std::span<const double> params, const Camera& camera, const PointLight& light,
                    const RenderOptions& options, const Bvh* bvh) {
    const std::size_t n = params.size() / kParamsPerPoint;
    std::vector<double> visibility(n, 1.0);
    if (options.mode == ShadingMode::Shadowed && n > 0) {
        Bvh local;
        if (bvh == nullptr) {
            local = build_bvh(params);
            bvh = &local;
        }
        visibility = light_transmittances(*bvh, make_occluders(params), light);
    }
    return render_with_visibility(params, camera, light, visibility, options);
}

FrameBuffers render(const std::vector<GaussianPoint>& points, const Camera& camera, const PointLight& light,
                    const RenderOptions& options) {
    const ParamSet params(points);
    return render(params.values(), camera, light, options);
}

}  // namespace phong_splat
