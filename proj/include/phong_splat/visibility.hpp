#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "phong_splat/gaussian_ops.hpp"
#include "phong_splat/math.hpp"
#include "phong_splat/param_set.hpp"
#include "phong_splat/scene.hpp"
#include "phong_splat/tape.hpp"

namespace phong_splat {

inline constexpr double kSegmentMargin = 1e-4;
inline constexpr std::size_t kBvhLeafSize = 4;
inline constexpr int kBvhMaxDepth = 64;
inline constexpr double kOccluderCutoff = 9.0;  // squared Mahalanobis distance

struct Aabb {
    Vec3d lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             std::numeric_limits<double>::infinity()};
    Vec3d hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity()};

    void expand(const Aabb& o) {
        for (int k = 0; k < 3; ++k) {
            lo[k] = std::min(lo[k], o.lo[k]);
            hi[k] = std::max(hi[k], o.hi[k]);
        }
    }
    bool contains(const Aabb& o) const {
        for (int k = 0; k < 3; ++k) {
            if (o.lo[k] < lo[k] || o.hi[k] > hi[k]) return false;
        }
        return true;
    }
    // Slab test of the segment a + t (b - a), t in [0, 1].
    bool hits_segment(const Vec3d& a, const Vec3d& b) const;
};

// Axis-aligned bounds of the 3 sigma ellipsoid, padded outward.
Aabb gaussian_bounds(const Vec3d& mean, const Mat3d& sigma);

struct BvhNode {
    Aabb box;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t first = 0;  // into Bvh::order, for leaves
    std::uint32_t count = 0;  // > 0 marks a leaf
    bool leaf() const { return count > 0; }
};

class Bvh {
public:
    std::vector<BvhNode> nodes;         // nodes[0] is the root
    std::vector<std::uint32_t> order;   // primitive ids grouped by leaf
    std::vector<Aabb> boxes;            // per primitive id

    bool empty() const { return nodes.empty(); }
    int depth() const;

    // Calls visit(id) for every primitive whose box the segment a->b touches.
    template <class F>
    void query_segment(const Vec3d& a, const Vec3d& b, F&& visit) const {
        if (nodes.empty()) return;
        std::uint32_t stack[2 * kBvhMaxDepth + 2];
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const BvhNode& n = nodes[stack[--top]];
            if (!n.box.hits_segment(a, b)) continue;
            if (n.leaf()) {
                for (std::uint32_t i = n.first; i < n.first + n.count; ++i) {
                    if (boxes[order[i]].hits_segment(a, b)) visit(order[i]);
                }
            } else {
                stack[top++] = n.right;
                stack[top++] = n.left;
            }
        }
    }
};

// Median split on the longest axis of the centroid bounds; leaves hold at most 4.
Bvh build_bvh(std::span<const Aabb> boxes);
Bvh build_bvh(const std::vector<GaussianPoint>& points);
Bvh build_bvh(std::span<const double> params);  // flat ParamSet layout

// Minimum over t of the Mahalanobis form of d + t u, for unit u.
template <class T>
struct Approach {
    T t;
    T q;
    Vec3<T> x;  // d + t u at the minimum
};

template <class T>
Approach<T> closest_approach(const Vec3<T>& d, const Vec3<T>& u, const Sym3<T>& inv_cov) {
    const Vec3<T> au = sym_mul(inv_cov, u);
    const Vec3<T> ad = sym_mul(inv_cov, d);
    const T a = dot(u, ad);
    const T b = dot(u, au);
    const T c = dot(d, ad);
    Approach<T> out;
    out.t = -a / b;
    out.q = c - a * a / b;
    out.x = d + u * out.t;
    return out;
}

// Occluder alpha of one Gaussian on the segment origin -> light, with the
// partials over (origin 3, mean 3, inverse covariance 6, weight 1).
template <class T>
struct RayAlphaEval {
    bool hit = false;
    bool clamped = false;
    double t = 0.0;
    T alpha{};
    std::array<T, 13> partial{};
};

template <class T>
RayAlphaEval<T> ray_alpha(const Vec3<T>& origin, const Vec3d& light, const Vec3<T>& mean, const Sym3<T>& inv_cov,
                          const T& weight) {
    using std::exp;
    RayAlphaEval<T> out;
    const Vec3<T> e = Vec3<T>::from(light) - origin;
    const T len = norm(e);
    const Vec3<T> u = e / len;
    const Vec3<T> d = origin - mean;
    const Approach<T> ap = closest_approach(d, u, inv_cov);
    const double t = primal(ap.t);
    if (!(t > kSegmentMargin && t < primal(len) - kSegmentMargin)) return out;
    if (!(primal(ap.q) <= kOccluderCutoff)) return out;
    out.hit = true;
    out.t = t;
    const T g = exp(T(-0.5) * ap.q);
    out.alpha = weight * g;
    if (primal(out.alpha) > 0.999) {
        out.alpha = T(0.999);
        out.clamped = true;
        for (auto& p : out.partial) p = T(0.0);
        return out;
    }
    const T dq = T(-0.5) * out.alpha;
    const Vec3<T> ax = sym_mul(inv_cov, ap.x);
    const Vec3<T> gd = ax * T(2.0);
    const Vec3<T> gu = ax * (T(2.0) * ap.t);
    const Vec3<T> go = gd - (gu - u * dot(u, gu)) / len;
    for (int k = 0; k < 3; ++k) {
        out.partial[k] = dq * go[k];
        out.partial[3 + k] = -dq * gd[k];
    }
    const Vec3<T>& x = ap.x;
    out.partial[6] = dq * x.x * x.x;
    out.partial[7] = dq * T(2.0) * x.x * x.y;
    out.partial[8] = dq * T(2.0) * x.x * x.z;
    out.partial[9] = dq * x.y * x.y;
    out.partial[10] = dq * T(2.0) * x.y * x.z;
    out.partial[11] = dq * x.z * x.z;
    out.partial[12] = g;
    return out;
}

// Precomputed occluder data per Gaussian.
struct Occluders {
    std::vector<Vec3d> mean;
    std::vector<Sym3<double>> inv_cov;
    std::vector<double> weight;  // sigmoid(opacity) * sigmoid(shadow)

    std::size_t size() const { return mean.size(); }
};

Occluders make_occluders(const std::vector<GaussianPoint>& points);
Occluders make_occluders(std::span<const double> params);

// Occluder alpha along a ray from `origin` in unit direction `dir`; hits are
// only counted strictly inside (1e-4, segment_length - 1e-4).
double ray_gaussian_alpha(const GaussianPoint& point, const Vec3d& origin, const Vec3d& dir,
                          double segment_length = std::numeric_limits<double>::infinity());

double light_transmittance(const Bvh& bvh, const Occluders& occ, std::size_t source, const PointLight& light);
double light_transmittance(const Bvh& bvh, const std::vector<GaussianPoint>& points, std::size_t source,
                           const PointLight& light);
// Reference O(N) loop over every other Gaussian.
double light_transmittance_brute_force(const Occluders& occ, std::size_t source, const PointLight& light);
std::vector<double> light_transmittances(const Bvh& bvh, const Occluders& occ, const PointLight& light);

// Per-point transmittance recorded on a tape. `bvh` may be stale: its boxes
// only select candidates, alphas are evaluated at the current parameters.
template <class T>
std::vector<Var<T>> light_transmittance_tape(Tape<T>& tape, std::span<const Var<T>> params, const Bvh& bvh,
                                             const PointLight& light) {
    const std::size_t n = params.size() / kParamsPerPoint;
    std::vector<Vec3<Var<T>>> mean(n);
    std::vector<Sym3<Var<T>>> inv_cov(n);
    std::vector<Var<T>> weight(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = point_params<Var<T>>(params, i);
        mean[i] = p.position;
        inv_cov[i] = inverse_covariance(gaussian_rotation(p.rotation), p.log_scale);
        weight[i] = sigmoid(p.opacity_logit) * sigmoid(p.shadow_logit);
    }
    auto value3 = [](const Vec3<Var<T>>& v) { return Vec3<T>{v.x.value(), v.y.value(), v.z.value()}; };

    struct Hit {
        double t;
        std::uint32_t id;
        Var<T> alpha;
    };
    std::vector<Var<T>> out(n);
    std::vector<Hit> hits;
    std::vector<T> prefix;
    for (std::size_t i = 0; i < n; ++i) {
        hits.clear();
        const Vec3<T> origin = value3(mean[i]);
        bvh.query_segment(primal(origin), light.position, [&](std::uint32_t j) {
            if (j == i || j >= n) return;
            Sym3<T> a;
            for (int k = 0; k < 6; ++k) a[k] = inv_cov[j][k].value();
            const auto ev = ray_alpha(origin, light.position, value3(mean[j]), a, weight[j].value());
            if (!ev.hit) return;
            if (ev.clamped || is_zero(ev.alpha)) {
                hits.push_back({ev.t, j, Var<T>::constant(ev.alpha)});
                return;
            }
            const auto id = tape.begin_node(OpKind::RayAlpha, ev.alpha);
            for (int k = 0; k < 3; ++k) tape.add_edge(mean[i][k], ev.partial[k]);
            for (int k = 0; k < 3; ++k) tape.add_edge(mean[j][k], ev.partial[3 + k]);
            for (int k = 0; k < 6; ++k) tape.add_edge(inv_cov[j][k], ev.partial[6 + k]);
            tape.add_edge(weight[j], ev.partial[12]);
            hits.push_back({ev.t, j, tape.finish_node(id)});
        });
        if (hits.empty()) {
            out[i] = Var<T>::constant(T(1.0));
            continue;
        }
        std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
            return a.t != b.t ? a.t < b.t : a.id < b.id;
        });
        // T = prod (1 - alpha_j); partials from prefix and suffix products.
        prefix.assign(hits.size() + 1, T(1.0));
        for (std::size_t k = 0; k < hits.size(); ++k) prefix[k + 1] = prefix[k] * (T(1.0) - hits[k].alpha.value());
        const auto id = tape.begin_node(OpKind::Product, prefix.back());
        T suffix(1.0);
        for (std::size_t k = hits.size(); k-- > 0;) {
            tape.add_edge(hits[k].alpha, -(prefix[k] * suffix));
            suffix = suffix * (T(1.0) - hits[k].alpha.value());
        }
        out[i] = tape.finish_node(id);
    }
    return out;
}

}  // namespace phong_splat
