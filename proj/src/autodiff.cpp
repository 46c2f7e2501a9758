#include "phong_splat/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "phong_splat/rng.hpp"

namespace phong_splat {

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::Leaf: return "leaf";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Div: return "div";
        case OpKind::Neg: return "neg";
        case OpKind::Exp: return "exp";
        case OpKind::Log: return "log";
        case OpKind::Pow: return "pow";
        case OpKind::Sqrt: return "sqrt";
        case OpKind::Max: return "max";
        case OpKind::Clamp: return "clamp";
        case OpKind::Abs: return "abs";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::Sum: return "sum";
        case OpKind::Product: return "product";
        case OpKind::Entropy: return "entropy";
        case OpKind::RayAlpha: return "ray_alpha";
        case OpKind::Custom: return "custom";
    }
    return "unknown";
}

namespace {

std::vector<double> gradient_from(const Tape<double>& tape, const Var<double>& root, std::size_t n) {
    const auto adj = tape.adjoints(root);
    // Leaves are recorded first, so parameter i is node i.
    return {adj.begin(), adj.begin() + static_cast<std::ptrdiff_t>(n)};
}

void check_length(std::span<const double> a, std::span<const double> b, const char* what) {
    if (!b.empty() && a.size() != b.size()) {
        throw std::invalid_argument(std::string(what) + ": length mismatch");
    }
}

}  // namespace

double evaluate(const Objective& loss, std::span<const double> params, FrozenValues* frozen) {
    Tape<double> tape;
    tape.set_frozen(frozen);
    const auto vars = tape.leaves(params);
    return loss(tape, vars).value();
}

ValueAndGradient value_and_grad(const Objective& loss, std::span<const double> params, FrozenValues* frozen) {
    Tape<double> tape;
    tape.set_frozen(frozen);
    const auto vars = tape.leaves(params);
    const Var<double> root = loss(tape, vars);
    return {root.value(), gradient_from(tape, root, params.size())};
}

std::vector<double> grad(const Objective& loss, std::span<const double> params) {
    return value_and_grad(loss, params).gradient;
}

std::vector<double> hessian_vector_product(const Objective& loss, std::span<const double> params,
                                           std::span<const double> direction) {
    check_length(params, direction, "hessian_vector_product");
    Tape<Dual> tape;
    std::vector<Var<Dual>> vars;
    vars.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(tape.leaf(Dual(params[i], direction[i])));
    const Var<Dual> root = loss(tape, vars);
    const auto adj = tape.adjoints(root);
    std::vector<double> out(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) out[i] = adj[i].d;
    return out;
}

MetaGradient grad_through_inner_steps(const Objective& outer, std::span<const InnerStep> steps,
                                      std::span<const double> params, bool first_order) {
    // Forward: iterate the inner descent steps, keeping every intermediate point.
    std::vector<std::vector<double>> points;
    points.reserve(steps.size() + 1);
    points.emplace_back(params.begin(), params.end());
    for (const InnerStep& step : steps) {
        check_length(params, step.mask, "grad_through_inner_steps mask");
        if (step.learning_rate < 0.0) throw std::invalid_argument("inner learning rate must be >= 0");
        std::vector<double> next = points.back();
        if (step.learning_rate != 0.0) {
            const auto g = grad(*step.loss, points.back());
            for (std::size_t i = 0; i < next.size(); ++i) {
                const double m = step.mask.empty() ? 1.0 : step.mask[i];
                next[i] -= step.learning_rate * m * g[i];
            }
        }
        points.push_back(std::move(next));
    }

    MetaGradient out;
    auto vg = value_and_grad(outer, points.back());
    out.outer_value = vg.value;
    std::vector<double> u = std::move(vg.gradient);

    // Backward: u <- (I - lr M H_k)^T u = u - lr H_k (M u), H_k symmetric.
    if (!first_order) {
        for (std::size_t k = steps.size(); k-- > 0;) {
            const InnerStep& step = steps[k];
            if (step.learning_rate == 0.0) continue;
            std::vector<double> direction = u;
            if (!step.mask.empty()) {
                for (std::size_t i = 0; i < u.size(); ++i) direction[i] *= step.mask[i];
            }
            const auto hv = hessian_vector_product(*step.loss, points[k], direction);
            for (std::size_t i = 0; i < u.size(); ++i) u[i] -= step.learning_rate * hv[i];
        }
    }
    for (double g : u) {
        if (!std::isfinite(g)) throw NonFiniteError("meta_gradient", true);
    }
    out.gradient = std::move(u);
    out.adapted = std::move(points.back());
    return out;
}

std::vector<double> grad_through_inner_step(const Objective& outer, const Objective& inner,
                                            std::span<const double> params, double inner_lr,
                                            std::span<const double> inner_mask, bool first_order) {
    const InnerStep step{&inner, inner_lr, inner_mask};
    return grad_through_inner_steps(outer, std::span<const InnerStep>(&step, 1), params, first_order).gradient;
}

double relative_error(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

FiniteDiffReport compare_finite_differences(const std::function<double(std::span<const double>)>& f,
                                            std::span<const double> params, std::span<const double> analytic,
                                            double epsilon, std::size_t samples, std::uint64_t seed) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("finite difference epsilon must be > 0");
    check_length(params, analytic, "compare_finite_differences");

    std::vector<std::size_t> coords(params.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(coords);
    coords.resize(std::min(samples, coords.size()));
    std::sort(coords.begin(), coords.end());

    FiniteDiffReport report;
    std::vector<double> probe(params.begin(), params.end());
    const double f0 = f(probe);
    for (std::size_t i : coords) {
        const double x = params[i];
        probe[i] = x + epsilon;
        const double fp = f(probe);
        probe[i] = x - epsilon;
        const double fm = f(probe);
        probe[i] = x;

        const double forward = (fp - f0) / epsilon;
        const double backward = (f0 - fm) / epsilon;
        const double central = (fp - fm) / (2.0 * epsilon);
        if (std::abs(forward - backward) > 1e-2 * std::max(std::abs(forward), std::abs(backward)) + 1e-9) {
            report.flagged.push_back(i);
            continue;
        }
        const double err = relative_error(analytic[i], central);
        ++report.checked;
        if (err > report.max_rel_error || report.checked == 1) {
            report.max_rel_error = std::max(report.max_rel_error, err);
            if (err >= report.max_rel_error) report.worst_index = i;
        }
    }
    return report;
}

FiniteDiffReport finite_diff_check(const Objective& loss, std::span<const double> params, double epsilon,
                                   std::size_t samples, std::uint64_t seed) {
    FrozenValues frozen;
    frozen.start_recording();
    const auto vg = value_and_grad(loss, params, &frozen);
    auto probe = [&](std::span<const double> p) {
        frozen.start_replay();
        return evaluate(loss, p, &frozen);
    };
    return compare_finite_differences(probe, params, vg.gradient, epsilon, samples, seed);
}

}  // namespace phong_splat
