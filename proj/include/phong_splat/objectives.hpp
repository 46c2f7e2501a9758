#pragma once

#include <span>
#include <stdexcept>
#include <string>

#include "phong_splat/autodiff.hpp"
#include "phong_splat/losses.hpp"
#include "phong_splat/render.hpp"
#include "phong_splat/scene.hpp"

namespace phong_splat {

// Which objective of the three-stage schedule to evaluate. Stage 3 has two
// variants: Phong (visibility 1) and Shadow (light transmittance).
enum class LossKind { Stage1, Stage2, Phong, Shadow };

const char* loss_kind_name(LossKind kind);

struct StageContext {
    const OLATCapture* capture = nullptr;
    LossKind kind = LossKind::Stage1;
    LossWeights weights;
    int iteration = 0;              // drives the diffuse prior decay in stage 3
    RenderOptions render;           // mode is set from `kind`
    const Bvh* bvh = nullptr;       // required for LossKind::Shadow
};

template <class T>
struct LossTerms {
    Var<T> total;
    Var<T> rgb;
    Var<T> sparse;
    Var<T> normal;
    Var<T> smooth;
    Var<T> diffuse;
};

inline ShadingMode shading_mode(LossKind kind) {
    switch (kind) {
        case LossKind::Stage1:
        case LossKind::Stage2:
            return ShadingMode::AmbientOnly;
        case LossKind::Phong:
            return ShadingMode::Unshadowed;
        case LossKind::Shadow:
            return ShadingMode::Shadowed;
    }
    throw std::invalid_argument("unknown loss kind");
}

template <class T>
LossTerms<T> stage_loss(Tape<T>& tape, std::span<const Var<T>> params, const StageContext& ctx) {
    if (ctx.capture == nullptr) throw std::invalid_argument("stage_loss: no capture");
    RenderOptions ro = ctx.render;
    ro.mode = shading_mode(ctx.kind);
    const TapeFrame<T> frame = render_tape(tape, params, ctx.capture->camera, ctx.capture->light, ro, ctx.bvh);
    const LossWeights& w = ctx.weights;

    LossTerms<T> terms;
    terms.rgb = rgb_loss(std::span<const Var<T>>(frame.composite.data), ctx.capture->image, w.dssim);
    terms.sparse = sparse_losses(std::span<const Var<T>>(frame.opacity), std::span<const Var<T>>(frame.visibility), w);
    terms.normal = Var<T>(0.0);
    terms.smooth = Var<T>(0.0);
    terms.diffuse = Var<T>(0.0);
    if (ctx.kind != LossKind::Stage1) {
        const PseudoNormals target = depth_to_pseudo_normal(frame.depth, frame.alpha_value, ctx.capture->camera);
        terms.normal = w.normal_pred * normal_prediction_loss(std::span<const Var<T>>(frame.normal.data), target) +
                       w.normal_residual * normal_residual_loss(params) + w.scale * scale_loss(params);
        Var<T> smooth(0.0);
        for (const TapeImage<T>* img : {&frame.normal, &frame.ambient, &frame.diffuse, &frame.specular}) {
            smooth = smooth + smooth_term(std::span<const Var<T>>(img->data), {img->width, img->height, img->channels});
        }
        terms.smooth = w.smooth * smooth;
    }
    if (ctx.kind == LossKind::Phong || ctx.kind == LossKind::Shadow) {
        terms.diffuse = diffuse_prior_loss(params, w.diffuse_weight(ctx.iteration));
    }
    terms.total = terms.rgb + terms.sparse + terms.normal + terms.smooth + terms.diffuse;
    return terms;
}

class StageObjective final : public Objective {
public:
    explicit StageObjective(StageContext ctx) : ctx_(std::move(ctx)) {}
    Var<double> operator()(Tape<double>& tape, std::span<const Var<double>> params) const override {
        return stage_loss(tape, params, ctx_).total;
    }
    Var<Dual> operator()(Tape<Dual>& tape, std::span<const Var<Dual>> params) const override {
        return stage_loss(tape, params, ctx_).total;
    }
    const StageContext& context() const { return ctx_; }

private:
    StageContext ctx_;
};

struct LossValues {
    double total = 0.0;
    double rgb = 0.0;
    double sparse = 0.0;
    double normal = 0.0;
    double smooth = 0.0;
    double diffuse = 0.0;
};

LossValues evaluate_stage_loss(std::span<const double> params, const StageContext& ctx);

}  // namespace phong_splat
