#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "phong_splat/filters.hpp"
#include "phong_splat/param_set.hpp"
#include "phong_splat/rasterizer.hpp"
#include "phong_splat/tape.hpp"

namespace phong_splat {

inline constexpr double kEntropyClamp = 1e-4;

struct LossWeights {
    double dssim = 0.2;
    double normal_pred = 0.1;
    double normal_residual = 0.001;
    double scale = 1e-5;
    double opacity = 0.001;
    double visibility = 0.01;
    double smooth = 0.1;
    double diffuse_start = 0.02;
    double diffuse_end = 0.002;
    double diffuse_horizon = 1000.0;

    // Exponential decay from diffuse_start to diffuse_end over the horizon.
    double diffuse_weight(int iteration) const {
        if (iteration <= 0) return diffuse_start;
        if (iteration >= diffuse_horizon) return diffuse_end;
        const double t = iteration / diffuse_horizon;
        return std::exp((1.0 - t) * std::log(diffuse_start) + t * std::log(diffuse_end));
    }
    void validate() const;
};

namespace detail {

template <class T>
Tape<T>* find_tape(std::span<const Var<T>> xs) {
    for (const auto& x : xs) {
        if (!x.is_constant()) return x.tape();
    }
    return nullptr;
}

}  // namespace detail

// A scalar reduction over many inputs recorded as one node. `eval(values,
// gradient*)` returns the value and, when asked, d value / d input.
template <class T, class F>
Var<T> fused(std::span<const Var<T>> x, const char* name, F&& eval) {
    std::vector<T> xv(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xv[i] = x[i].value();
    Tape<T>* tape = detail::find_tape(x);
    if (tape == nullptr) return Var<T>::constant(eval(std::span<const T>(xv), static_cast<std::vector<T>*>(nullptr)));
    std::vector<T> grad;
    const T value = eval(std::span<const T>(xv), &grad);
    std::vector<std::uint32_t> ids(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) ids[i] = x[i].is_constant() ? Var<T>::kConstant : x[i].id();
    const auto self = static_cast<std::uint32_t>(tape->node_count());
    const T out[1] = {value};
    return tape->custom(name, out, [ids = std::move(ids), grad = std::move(grad), self](std::span<T> adj) {
        const T a = adj[self];
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] != Var<T>::kConstant) adj[ids[i]] += grad[i] * a;
        }
    })[0];
}

template <class F>
double fused(std::span<const double> x, const char*, F&& eval) {
    return eval(x, static_cast<std::vector<double>*>(nullptr));
}

// Passes stop-gradient values through the tape's frozen store, if any.
template <class T>
void freeze_values(std::span<const Var<T>> ref, std::span<double> values) {
    if (Tape<T>* tape = detail::find_tape(ref)) tape->freeze(values);
}
inline void freeze_values(std::span<const double>, std::span<double>) {}

template <class T>
Var<T> sum_all(std::span<const Var<T>> xs) {
    return sum(xs);
}
inline double sum_all(std::span<const double> xs) {
    double total = 0.0;
    for (double x : xs) total += x;
    return total;
}

// mean |x - target|
template <class S>
S l1_loss(std::span<const S> x, std::span<const double> target) {
    if (x.size() != target.size()) throw std::invalid_argument("l1: dimension mismatch");
    return fused(x, "l1", [&](auto xv, auto* grad) {
        using T = std::remove_cvref_t<decltype(xv[0])>;
        const double inv_n = x.empty() ? 0.0 : 1.0 / static_cast<double>(x.size());
        T total(0.0);
        if (grad) grad->assign(x.size(), T(0.0));
        for (std::size_t i = 0; i < xv.size(); ++i) {
            const T d = xv[i] - target[i];
            const double s = primal(d) > 0.0 ? 1.0 : (primal(d) < 0.0 ? -1.0 : 0.0);
            total += s * d;
            if (grad) (*grad)[i] = T(s * inv_n);
        }
        return total * inv_n;
    });
}

template <class S>
S ssim_loss_term(std::span<const S> x, std::span<const double> target, Extent e) {
    return fused(x, "ssim", [&](auto xv, auto* grad) {
        using T = std::remove_cvref_t<decltype(xv[0])>;
        return ssim_mean<T>(xv, target, e, grad);
    });
}

// (1 - lambda) L1 + lambda (1 - SSIM) / 2
template <class S>
S rgb_loss(std::span<const S> rendered, const Image& target, double lambda) {
    if (rendered.size() != target.data.size()) throw std::invalid_argument("rgb_loss: dimension mismatch");
    const Extent e{target.width, target.height, target.channels};
    const S l1 = l1_loss(rendered, std::span<const double>(target.data));
    if (lambda == 0.0) return l1;
    const S s = ssim_loss_term(rendered, std::span<const double>(target.data), e);
    return (1.0 - lambda) * l1 + lambda * (1.0 - s) * 0.5;
}
double rgb_loss(const Image& rendered, const Image& target, double lambda);

// Mean over usable pixels of |target - normalize(predicted)|^2. A pixel is
// usable when marked valid and its predicted normal is not vanishing.
template <class S>
S normal_prediction_loss(std::span<const S> predicted, const PseudoNormals& target) {
    const std::size_t pixels = target.valid.size();
    if (predicted.size() != pixels * 3) throw std::invalid_argument("normal loss: dimension mismatch");
    std::vector<double> frozen(target.normal.data);
    frozen.reserve(pixels * 4);
    for (bool v : target.valid) frozen.push_back(v ? 1.0 : 0.0);
    freeze_values(predicted, std::span<double>(frozen));
    return fused(predicted, "normal_pred", [&](auto xv, auto* grad) {
        using T = std::remove_cvref_t<decltype(xv[0])>;
        using std::sqrt;
        if (grad) grad->assign(xv.size(), T(0.0));
        T total(0.0);
        std::size_t count = 0;
        std::vector<std::size_t> used;
        std::vector<std::array<T, 3>> d_pix;
        for (std::size_t p = 0; p < pixels; ++p) {
            if (frozen[pixels * 3 + p] == 0.0) continue;
            const T* n = &xv[p * 3];
            const T len2 = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
            if (!(primal(len2) > 1e-16)) continue;
            const T len = sqrt(len2);
            std::array<T, 3> u{n[0] / len, n[1] / len, n[2] / len};
            std::array<T, 3> r{u[0] - frozen[p * 3], u[1] - frozen[p * 3 + 1], u[2] - frozen[p * 3 + 2]};
            total += r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
            ++count;
            if (grad) {
                // d/dn of |u - t|^2 = (I - u u^T) 2 r / |n|
                const T ur = u[0] * r[0] + u[1] * r[1] + u[2] * r[2];
                std::array<T, 3> g;
                for (int k = 0; k < 3; ++k) g[k] = T(2.0) * (r[k] - u[k] * ur) / len;
                used.push_back(p);
                d_pix.push_back(g);
            }
        }
        if (count == 0) return T(0.0);
        const double inv = 1.0 / static_cast<double>(count);
        if (grad) {
            for (std::size_t i = 0; i < used.size(); ++i) {
                for (int k = 0; k < 3; ++k) (*grad)[used[i] * 3 + k] = d_pix[i][k] * inv;
            }
        }
        return total * inv;
    });
}

// Mean over points of |dn_out|^2 + |dn_in|^2.
template <class S>
S normal_residual_loss(std::span<const S> params) {
    const std::size_t n = params.size() / kParamsPerPoint;
    if (n == 0) return S(0.0);
    std::vector<S> terms;
    terms.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = point_params<S>(params, i);
        terms.push_back(dot(p.residual_out, p.residual_out) + dot(p.residual_in, p.residual_in));
    }
    return sum_all(std::span<const S>(terms)) * (1.0 / static_cast<double>(n));
}

// Mean over points of the smallest exp(log_scale); ties take the lowest axis.
template <class S>
S scale_loss(std::span<const S> params) {
    using std::exp;
    const std::size_t n = params.size() / kParamsPerPoint;
    if (n == 0) return S(0.0);
    std::vector<S> terms;
    terms.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = point_params<S>(params, i);
        terms.push_back(exp(p.log_scale[shortest_axis(primal(p.log_scale))]));
    }
    return sum_all(std::span<const S>(terms)) * (1.0 / static_cast<double>(n));
}

// Mean binary entropy of values clamped to [1e-4, 1 - 1e-4]; 0 for no values.
template <class S>
S mean_entropy(std::span<const S> values) {
    if (values.empty()) return S(0.0);
    std::vector<S> terms;
    terms.reserve(values.size());
    for (const S& v : values) terms.push_back(binary_entropy(v, kEntropyClamp));
    return sum_all(std::span<const S>(terms)) * (1.0 / static_cast<double>(values.size()));
}

template <class S>
S sparse_losses(std::span<const S> opacities, std::span<const S> visibilities, const LossWeights& w) {
    return w.opacity * mean_entropy(opacities) + w.visibility * mean_entropy(visibilities);
}

// mean |X - sg(blur9x9(X))| for one buffer.
template <class S>
S smooth_term(std::span<const S> x, Extent e) {
    std::vector<double> values(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) values[i] = primal(x[i]);
    const auto kernel = gaussian_kernel(kSmoothWindow, kSsimSigma);
    std::vector<double> blurred = blur<double>(values, e, kernel);
    freeze_values(x, std::span<double>(blurred));
    return l1_loss(x, std::span<const double>(blurred));
}

// Closed-form per-channel scale s minimizing sum |a - s d|^2.
std::array<double, 3> diffuse_prior_scale(std::span<const Vec3d> ambient, std::span<const Vec3d> diffuse);

// weight * mean |a - s (.) d|^2 with s from the stop-gradient ambient.
template <class S>
S diffuse_prior_loss(std::span<const S> params, double weight) {
    const std::size_t n = params.size() / kParamsPerPoint;
    if (n == 0 || weight == 0.0) return S(0.0);
    std::vector<PointParams<S>> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pts.push_back(point_params<S>(params, i));
    std::vector<double> amb(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) amb[i * 3 + k] = primal(pts[i].ambient[k]);
    }
    freeze_values(params, std::span<double>(amb));
    std::vector<S> terms;
    terms.reserve(n);
    std::array<S, 3> scale;
    for (int k = 0; k < 3; ++k) {
        std::vector<S> num(n), den(n);
        for (std::size_t i = 0; i < n; ++i) {
            num[i] = amb[i * 3 + k] * pts[i].diffuse[k];
            den[i] = pts[i].diffuse[k] * pts[i].diffuse[k];
        }
        const S dsum = sum_all(std::span<const S>(den));
        const S guarded = primal(dsum) > 1e-12 ? dsum : S(1e-12);
        scale[k] = sum_all(std::span<const S>(num)) / guarded;
    }
    for (std::size_t i = 0; i < n; ++i) {
        S t(0.0);
        for (int k = 0; k < 3; ++k) {
            const S r = pts[i].ambient[k] - scale[k] * pts[i].diffuse[k];
            t = t + r * r;
        }
        terms.push_back(t);
    }
    return weight * sum_all(std::span<const S>(terms)) * (1.0 / static_cast<double>(n));
}

double diffuse_prior_loss(std::span<const Vec3d> ambient, std::span<const Vec3d> diffuse, double weight);

double normal_losses(const Image& predicted_normal, const PseudoNormals& target, std::span<const double> params,
                     const LossWeights& w);
double sparse_losses(std::span<const double> opacities, std::span<const double> visibilities, const LossWeights& w);
double smooth_loss(const FrameBuffers& buffers, double weight);

}  // namespace phong_splat
