#pragma once

#include <cmath>

namespace phong_splat {

// Forward-mode number: value plus one directional tangent. Running the
// reverse sweep of a tape in Dual arithmetic yields Hessian-vector products.
struct Dual {
    double v = 0.0;
    double d = 0.0;

    constexpr Dual() = default;
    constexpr Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
    constexpr Dual(double value, double tangent) : v(value), d(tangent) {}

    friend constexpr Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
    friend constexpr Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
    friend constexpr Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
    friend constexpr Dual operator/(Dual a, Dual b) {
        const double q = a.v / b.v;
        return {q, (a.d - q * b.d) / b.v};
    }
    friend constexpr Dual operator-(Dual a) { return {-a.v, -a.d}; }

    Dual& operator+=(Dual o) { v += o.v; d += o.d; return *this; }
    Dual& operator-=(Dual o) { v -= o.v; d -= o.d; return *this; }
    Dual& operator*=(Dual o) { *this = *this * o; return *this; }
    Dual& operator/=(Dual o) { *this = *this / o; return *this; }

    friend Dual exp(Dual a) {
        const double e = std::exp(a.v);
        return {e, e * a.d};
    }
    friend Dual log(Dual a) { return {std::log(a.v), a.d / a.v}; }
    friend Dual sqrt(Dual a) {
        const double s = std::sqrt(a.v);
        return {s, s > 0.0 ? a.d / (2.0 * s) : 0.0};
    }
    friend Dual pow(Dual a, double p) {
        if (a.v == 0.0) return {0.0, p == 1.0 ? a.d : 0.0};
        const double r = std::pow(a.v, p);
        return {r, p * r / a.v * a.d};
    }
};

inline constexpr double primal(double x) { return x; }
inline constexpr double primal(const Dual& x) { return x.v; }

inline bool is_finite(double x) { return std::isfinite(x); }
inline bool is_finite(const Dual& x) { return std::isfinite(x.v) && std::isfinite(x.d); }

inline bool is_zero(double x) { return x == 0.0; }
inline bool is_zero(const Dual& x) { return x.v == 0.0 && x.d == 0.0; }

}  // namespace phong_splat
