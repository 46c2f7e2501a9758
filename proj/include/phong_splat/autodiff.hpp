#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include "phong_splat/tape.hpp"

namespace phong_splat {

// Scalar loss over a flat parameter vector. Implementations must be written
// generically so they can be recorded on a double tape (gradients) and on a
// Dual tape (Hessian-vector products).
class Objective {
public:
    virtual ~Objective() = default;
    virtual Var<double> operator()(Tape<double>& tape, std::span<const Var<double>> params) const = 0;
    virtual Var<Dual> operator()(Tape<Dual>& tape, std::span<const Var<Dual>> params) const = 0;
};

template <class F>
class FunctionObjective final : public Objective {
public:
    explicit FunctionObjective(F f) : f_(std::move(f)) {}
    Var<double> operator()(Tape<double>& tape, std::span<const Var<double>> params) const override {
        return f_(tape, params);
    }
    Var<Dual> operator()(Tape<Dual>& tape, std::span<const Var<Dual>> params) const override {
        return f_(tape, params);
    }

private:
    F f_;
};

// Wraps a generic lambda `(auto& tape, auto params) -> Var`.
template <class F>
FunctionObjective<std::decay_t<F>> make_objective(F&& f) {
    return FunctionObjective<std::decay_t<F>>(std::forward<F>(f));
}

struct ValueAndGradient {
    double value = 0.0;
    std::vector<double> gradient;
};

double evaluate(const Objective& loss, std::span<const double> params, FrozenValues* frozen = nullptr);

ValueAndGradient value_and_grad(const Objective& loss, std::span<const double> params,
                                FrozenValues* frozen = nullptr);

std::vector<double> grad(const Objective& loss, std::span<const double> params);

// H(params) * direction, by running the reverse sweep in Dual arithmetic.
std::vector<double> hessian_vector_product(const Objective& loss, std::span<const double> params,
                                           std::span<const double> direction);

// One plain gradient-descent step p <- p - learning_rate * mask * grad(loss).
// An empty mask updates every coordinate.
struct InnerStep {
    const Objective* loss = nullptr;
    double learning_rate = 0.0;
    std::span<const double> mask;
};

struct MetaGradient {
    double outer_value = 0.0;
    std::vector<double> gradient;  // d outer(adapted(params)) / d params
    std::vector<double> adapted;   // parameters after all inner steps
};

// Gradient of outer(step_K(...step_1(params))) with respect to params, including
// the Hessian-vector terms of every inner step unless `first_order` is set.
MetaGradient grad_through_inner_steps(const Objective& outer, std::span<const InnerStep> steps,
                                      std::span<const double> params, bool first_order = false);

std::vector<double> grad_through_inner_step(const Objective& outer, const Objective& inner,
                                            std::span<const double> params, double inner_lr,
                                            std::span<const double> inner_mask, bool first_order = false);

struct FiniteDiffReport {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
    std::vector<std::size_t> flagged;  // coordinates sitting on a kink, excluded
};

// Relative error between a and b with denominator max(|a|, |b|, 1e-8).
double relative_error(double a, double b);

// Compares `analytic` against central differences of `f` on `samples` random
// coordinates. Coordinates whose one-sided differences disagree are flagged
// as non-smooth and excluded.
FiniteDiffReport compare_finite_differences(const std::function<double(std::span<const double>)>& f,
                                            std::span<const double> params, std::span<const double> analytic,
                                            double epsilon, std::size_t samples, std::uint64_t seed);

// Gradient check of an objective; stop-gradient branches are held at their
// values at `params` while probing.
FiniteDiffReport finite_diff_check(const Objective& loss, std::span<const double> params, double epsilon,
                                   std::size_t samples, std::uint64_t seed = 0);

}  // namespace phong_splat
