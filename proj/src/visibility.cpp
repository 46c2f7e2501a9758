#include "phong_splat/visibility.hpp"

#include <functional>
#include <numeric>
#include <stdexcept>

#include "phong_splat/parallel.hpp"

namespace phong_splat {

bool Aabb::hits_segment(const Vec3d& a, const Vec3d& b) const {
    double t0 = 0.0;
    double t1 = 1.0;
    for (int k = 0; k < 3; ++k) {
        const double d = b[k] - a[k];
        if (d == 0.0) {
            if (a[k] < lo[k] || a[k] > hi[k]) return false;
            continue;
        }
        double ta = (lo[k] - a[k]) / d;
        double tb = (hi[k] - a[k]) / d;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

Aabb gaussian_bounds(const Vec3d& mean, const Mat3d& sigma) {
    Aabb box;
    for (int k = 0; k < 3; ++k) {
        const double r = 3.0 * std::sqrt(std::max(sigma(k, k), 0.0));
        // Relative padding keeps the box conservative under rounding.
        const double pad = 1e-9 * (std::abs(mean[k]) + r) + 1e-12;
        box.lo[k] = mean[k] - r - pad;
        box.hi[k] = mean[k] + r + pad;
    }
    return box;
}

int Bvh::depth() const {
    if (nodes.empty()) return 0;
    std::function<int(std::uint32_t)> rec = [&](std::uint32_t i) -> int {
        const BvhNode& n = nodes[i];
        if (n.leaf()) return 1;
        return 1 + std::max(rec(n.left), rec(n.right));
    };
    return rec(0);
}

namespace {

Vec3d centroid(const Aabb& b) { return (b.lo + b.hi) * 0.5; }

std::uint32_t build_node(Bvh& bvh, std::uint32_t begin, std::uint32_t end) {
    const auto index = static_cast<std::uint32_t>(bvh.nodes.size());
    bvh.nodes.emplace_back();
    Aabb box;
    Aabb cbox;
    for (std::uint32_t i = begin; i < end; ++i) {
        const Aabb& b = bvh.boxes[bvh.order[i]];
        box.expand(b);
        const Vec3d c = centroid(b);
        cbox.expand(Aabb{c, c});
    }
    bvh.nodes[index].box = box;
    if (end - begin <= kBvhLeafSize) {
        bvh.nodes[index].first = begin;
        bvh.nodes[index].count = end - begin;
        return index;
    }
    const Vec3d extent = cbox.hi - cbox.lo;
    int axis = 0;
    if (extent.y > extent[axis]) axis = 1;
    if (extent.z > extent[axis]) axis = 2;
    const std::uint32_t mid = begin + (end - begin) / 2;
    auto key = [&](std::uint32_t id) { return centroid(bvh.boxes[id])[axis]; };
    std::nth_element(bvh.order.begin() + begin, bvh.order.begin() + mid, bvh.order.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         const double ka = key(a);
                         const double kb = key(b);
                         return ka != kb ? ka < kb : a < b;
                     });
    const std::uint32_t left = build_node(bvh, begin, mid);
    const std::uint32_t right = build_node(bvh, mid, end);
    bvh.nodes[index].left = left;
    bvh.nodes[index].right = right;
    return index;
}

}  // namespace

Bvh build_bvh(std::span<const Aabb> boxes) {
    Bvh bvh;
    bvh.boxes.assign(boxes.begin(), boxes.end());
    if (boxes.empty()) return bvh;
    bvh.order.resize(boxes.size());
    std::iota(bvh.order.begin(), bvh.order.end(), 0U);
    bvh.nodes.reserve(2 * boxes.size() / kBvhLeafSize + 2);
    build_node(bvh, 0, static_cast<std::uint32_t>(boxes.size()));
    return bvh;
}

Bvh build_bvh(const std::vector<GaussianPoint>& points) {
    const ParamSet params(points);
    return build_bvh(params.values());
}

Bvh build_bvh(std::span<const double> params) {
    const std::size_t n = params.size() / kParamsPerPoint;
    std::vector<Aabb> boxes(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = point_params<double>(params, i);
        const Mat3d r = gaussian_rotation(p.rotation);
        boxes[i] = gaussian_bounds(p.position, rotate_diagonal(r, squared_scale(p.log_scale)));
    }
    return build_bvh(boxes);
}

Occluders make_occluders(std::span<const double> params) {
    const std::size_t n = params.size() / kParamsPerPoint;
    Occluders occ;
    occ.mean.resize(n);
    occ.inv_cov.resize(n);
    occ.weight.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = point_params<double>(params, i);
        occ.mean[i] = p.position;
        occ.inv_cov[i] = inverse_covariance(gaussian_rotation(p.rotation), p.log_scale);
        occ.weight[i] = sigmoid(p.opacity_logit) * sigmoid(p.shadow_logit);
    }
    return occ;
}

Occluders make_occluders(const std::vector<GaussianPoint>& points) {
    const ParamSet params(points);
    return make_occluders(params.values());
}

double ray_gaussian_alpha(const GaussianPoint& point, const Vec3d& origin, const Vec3d& dir, double segment_length) {
    const auto p = point_params(point);
    const Sym3<double> a = inverse_covariance(gaussian_rotation(p.rotation), p.log_scale);
    const Approach<double> ap = closest_approach(origin - p.position, dir, a);
    if (!(ap.t > kSegmentMargin && ap.t < segment_length - kSegmentMargin)) return 0.0;
    if (!(ap.q <= kOccluderCutoff)) return 0.0;
    const double w = point.opacity() * point.shadow_coefficient();
    return std::min(w * std::exp(-0.5 * ap.q), 0.999);
}

namespace {

struct ScalarHit {
    double t;
    std::uint32_t id;
    double alpha;
};

double product_of_hits(std::vector<ScalarHit>& hits) {
    std::sort(hits.begin(), hits.end(), [](const ScalarHit& a, const ScalarHit& b) {
        return a.t != b.t ? a.t < b.t : a.id < b.id;
    });
    double t = 1.0;
    for (const ScalarHit& h : hits) t = t * (1.0 - h.alpha);
    return t;
}

void collect(const Occluders& occ, std::size_t source, std::uint32_t j, const PointLight& light,
             std::vector<ScalarHit>& hits) {
    if (j == source) return;
    const auto ev = ray_alpha(occ.mean[source], light.position, occ.mean[j], occ.inv_cov[j], occ.weight[j]);
    if (ev.hit) hits.push_back({ev.t, j, ev.alpha});
}

}  // namespace

double light_transmittance(const Bvh& bvh, const Occluders& occ, std::size_t source, const PointLight& light) {
    if (source >= occ.size()) throw std::out_of_range("light_transmittance: source id out of range");
    std::vector<ScalarHit> hits;
    bvh.query_segment(occ.mean[source], light.position,
                      [&](std::uint32_t j) { collect(occ, source, j, light, hits); });
    return product_of_hits(hits);
}

double light_transmittance(const Bvh& bvh, const std::vector<GaussianPoint>& points, std::size_t source,
                           const PointLight& light) {
    return light_transmittance(bvh, make_occluders(points), source, light);
}

double light_transmittance_brute_force(const Occluders& occ, std::size_t source, const PointLight& light) {
    if (source >= occ.size()) throw std::out_of_range("light_transmittance: source id out of range");
    std::vector<ScalarHit> hits;
    for (std::uint32_t j = 0; j < occ.size(); ++j) collect(occ, source, j, light, hits);
    return product_of_hits(hits);
}

std::vector<double> light_transmittances(const Bvh& bvh, const Occluders& occ, const PointLight& light) {
    std::vector<double> out(occ.size(), 1.0);
    parallel_for(occ.size(), [&](std::size_t i) { out[i] = light_transmittance(bvh, occ, i, light); });
    return out;
}

}  // namespace phong_splat
