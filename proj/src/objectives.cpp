#include "phong_splat/objectives.hpp"

namespace phong_splat {

const char* loss_kind_name(LossKind kind) {
    switch (kind) {
        case LossKind::Stage1:
            return "stage1";
        case LossKind::Stage2:
            return "stage2";
        case LossKind::Phong:
            return "phong";
        case LossKind::Shadow:
            return "shadow";
    }
    return "unknown";
}

LossValues evaluate_stage_loss(std::span<const double> params, const StageContext& ctx) {
    Tape<double> tape;
    const auto leaves = tape.leaves(params);
    const auto terms = stage_loss(tape, std::span<const Var<double>>(leaves), ctx);
    return {terms.total.value(), terms.rgb.value(),    terms.sparse.value(),
            terms.normal.value(), terms.smooth.value(), terms.diffuse.value()};
}

}  // namespace phong_splat
