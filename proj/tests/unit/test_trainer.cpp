#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "phong_splat/checkpoint.hpp"
#include "phong_splat/oracle.hpp"
#include "phong_splat/rng.hpp"
#include "phong_splat/trainer.hpp"
#include "test_util.hpp"

using namespace phong_splat;

namespace {

template <class F>
std::unique_ptr<Objective> boxed(F f) {
    return std::make_unique<FunctionObjective<F>>(std::move(f));
}

std::vector<GaussianPoint> four_blobs() {
    std::vector<GaussianPoint> pts(4);
    const float xs[4] = {-0.35f, 0.35f, -0.35f, 0.35f};
    const float ys[4] = {-0.35f, -0.35f, 0.35f, 0.35f};
    for (int i = 0; i < 4; ++i) {
        GaussianPoint& g = pts[i];
        g.position = {xs[i], ys[i], 0.1f * float(i % 2)};
        g.rotation = {1, 0, 0, 0};
        g.log_scale = {-1.6f, -1.6f, -1.6f};
        g.opacity_logit = 2.0f;
        g.ambient_color = {0.2f + 0.15f * float(i), 0.6f - 0.1f * float(i), 0.3f};
    }
    return pts;
}

Dataset ambient_dataset(const std::vector<GaussianPoint>& gt, std::size_t count, int size) {
    OlatOptions o;
    o.train_count = count;
    o.test_count = 0;
    o.width = size;
    o.height = size;
    o.camera_radius = 3.0;
    o.min_camera_elevation = 0.2;
    o.seed = 5;
    RenderOptions ro;
    ro.mode = ShadingMode::AmbientOnly;
    return generate_model_dataset(gt, o, ro).train;
}

std::vector<GaussianPoint> perturbed(std::vector<GaussianPoint> pts, std::uint64_t seed) {
    Rng rng(seed);
    for (GaussianPoint& g : pts) {
        for (int k = 0; k < 3; ++k) {
            g.position[k] += float(rng.uniform(-0.03, 0.03));
            g.ambient_color[k] += 0.15f;
        }
        g.opacity_logit -= 1.5f;
    }
    return pts;
}

double mean_loss(const std::vector<GaussianPoint>& pts, const Dataset& ds, LossKind kind) {
    const ParamSet p(pts);
    double total = 0.0;
    for (const OLATCapture& c : ds.captures) {
        StageContext ctx;
        ctx.capture = &c;
        ctx.kind = kind;
        total += evaluate_stage_loss(p.values(), ctx).total;
    }
    return total / static_cast<double>(ds.size());
}

TrainConfig quiet_config(int s1, int s2, int s3) {
    TrainConfig c;
    c.stage1_iterations = s1;
    c.stage2_iterations = s2;
    c.stage3_iterations = s3;
    return c;
}

bool same_points(const std::vector<GaussianPoint>& a, const std::vector<GaussianPoint>& b) {
    return encode_checkpoint(a) == encode_checkpoint(b);
}

// Micro scene captures as a dataset of [support, query].
Dataset micro_dataset(const MicroScene& m) {
    Dataset ds;
    ds.captures = {m.support, m.capture};
    return ds;
}

}  // namespace

TEST_CASE("zero iterations leave the scene unchanged") {
    const MicroScene m = make_micro_scene(3, 1);
    const Dataset ds = micro_dataset(m);
    const TrainConfig c = quiet_config(0, 0, 0);
    CHECK(same_points(train_stage1(m.points, ds, c), m.points));
    CHECK(same_points(train_stage2(m.points, ds, c), m.points));
    const std::vector<LightTask> tasks{{0, {0, 1}, {0}, {1}}};
    TrainConfig mc = c;
    mc.tasks_per_iteration = 1;
    CHECK(same_points(meta_train(m.points, ds, tasks, mc), m.points));
}

TEST_CASE("stage 1 halves the loss on a model-rendered scene") {
    const auto gt = four_blobs();
    const Dataset ds = ambient_dataset(gt, 8, 32);
    const auto init = perturbed(gt, 3);
    TrainConfig c = quiet_config(200, 0, 0);
    c.lr.spatial_scale = camera_extent(ds);
    const double before = mean_loss(init, ds, LossKind::Stage1);
    const auto trained = train_stage1(init, ds, c);
    const double after = mean_loss(trained, ds, LossKind::Stage1);
    MESSAGE("stage 1 loss " << before << " -> " << after);
    CHECK(after <= 0.5 * before);
}

TEST_CASE("stage 2 lowers its loss from the stage 1 result") {
    const auto gt = four_blobs();
    const Dataset ds = ambient_dataset(gt, 6, 32);
    const auto init = perturbed(gt, 4);
    TrainConfig c = quiet_config(100, 100, 0);
    c.lr.spatial_scale = camera_extent(ds);
    const auto s1 = train_stage1(init, ds, c);
    const double before = mean_loss(s1, ds, LossKind::Stage2);
    const auto s2 = train_stage2(s1, ds, c);
    const double after = mean_loss(s2, ds, LossKind::Stage2);
    MESSAGE("stage 2 loss " << before << " -> " << after);
    CHECK(after < before);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const auto gt = four_blobs();
    const Dataset ds = ambient_dataset(gt, 4, 16);
    const auto init = perturbed(gt, 5);
    TrainConfig c = quiet_config(20, 20, 0);
    c.seed = 9;
    CHECK(same_points(train_stage1(init, ds, c), train_stage1(init, ds, c)));
    CHECK(same_points(train_stage2(init, ds, c), train_stage2(init, ds, c)));

    const MicroScene a = make_micro_scene(3, 2);
    const MicroScene b = make_micro_scene(3, 7);
    Dataset meta;
    meta.captures = {a.support, a.capture, b.support, b.capture};
    const std::vector<LightTask> tasks{{0, {0, 1}, {0}, {1}}, {1, {2, 3}, {2}, {3}}};
    TrainConfig mc = quiet_config(0, 0, 3);
    mc.tasks_per_iteration = 1;
    mc.inner_lr_phong = 1e-3;
    mc.inner_lr_shadow = 1e-3;
    mc.seed = 11;
    CHECK(same_points(meta_train(a.points, meta, tasks, mc), meta_train(a.points, meta, tasks, mc)));
}

TEST_CASE("the shadow ablation matches running both inner steps on the unshadowed loss") {
    const MicroScene a = make_micro_scene(4, 42);
    const MicroScene b = make_micro_scene(4, 51);
    Dataset ds;
    ds.captures = {a.support, a.capture, b.support, b.capture};
    const std::vector<LightTask> tasks{{0, {0, 1}, {0}, {1}}, {1, {2, 3}, {2}, {3}}};
    TrainConfig off = quiet_config(0, 0, 4);
    off.tasks_per_iteration = 2;
    off.inner_lr_phong = 1e-2;
    off.inner_lr_shadow = 1e-2;
    off.shadows = false;
    std::vector<MetaIterationRecord> skipped, full;
    const auto fast = meta_train(a.points, ds, tasks, off, {}, &skipped);
    // Same objectives, but the trainer believes shadows are on and runs both steps.
    TrainConfig on = off;
    on.shadows = true;
    const auto slow = meta_train(a.points, ds, tasks, on, default_objective_factory(off), &full);
    CHECK(same_points(fast, slow));
    REQUIRE(skipped.size() == full.size());
    for (std::size_t i = 0; i < full.size(); ++i) CHECK(skipped[i].query_loss == full[i].query_loss);
}

TEST_CASE("stage logs and checkpoints follow their intervals") {
    const auto gt = four_blobs();
    const Dataset ds = ambient_dataset(gt, 2, 16);
    test::TempDir dir;
    std::ostringstream log;
    TrainConfig c = quiet_config(120, 0, 0);
    c.log = &log;
    c.checkpoint_interval = 100;
    c.checkpoint_dir = dir.path;
    const auto out = train_stage1(perturbed(gt, 1), ds, c);
    std::istringstream lines(log.str());
    std::vector<std::string> rows;
    for (std::string l; std::getline(lines, l);) rows.push_back(l);
    REQUIRE(rows.size() == 4);  // iterations 0, 50, 100 and 119
    CHECK(rows[1].find("stage 1 iter     50 loss") == 0);
    CHECK(std::filesystem::exists(dir.path / "stage1_iter000100.phgs"));
    CHECK(same_points(load_checkpoint(dir.path / "stage1_final.phgs"), out));
}

TEST_CASE("with zero inner rates the meta step is Adam on the query loss") {
    const MicroScene a = make_micro_scene(4, 21);
    const MicroScene b = make_micro_scene(4, 22);
    Dataset ds;
    ds.captures = {a.support, a.capture, b.support, b.capture};
    const std::vector<LightTask> tasks{{0, {0, 1}, {0}, {1}}, {1, {2, 3}, {2}, {3}}};
    TrainConfig c = quiet_config(0, 0, 7);
    c.tasks_per_iteration = 2;
    c.inner_lr_phong = 0.0;
    c.inner_lr_shadow = 0.0;
    c.bvh_rebuild_interval = 3;
    c.lr.position_init = 1e-3;
    const auto meta = meta_train(a.points, ds, tasks, c);

    ParamSet p(a.points);
    Adam adam(p.size());
    std::unique_ptr<Bvh> bvh;
    for (int it = 0; it < c.stage3_iterations; ++it) {
        if (it % c.bvh_rebuild_interval == 0) bvh = std::make_unique<Bvh>(build_bvh(p.values()));
        std::vector<double> g(p.size(), 0.0);
        for (std::size_t q : {std::size_t{1}, std::size_t{3}}) {
            StageContext ctx;
            ctx.capture = &ds.captures[q];
            ctx.kind = LossKind::Shadow;
            ctx.iteration = it;
            ctx.bvh = bvh.get();
            const auto vg = value_and_grad(StageObjective(ctx), p.values());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += vg.gradient[i];
        }
        for (double& x : g) x *= 0.5;
        adam.step(p, g, c.lr.at(static_cast<double>(it) / c.stage3_iterations));
        project_constraints(p);
    }
    CHECK(same_points(meta, p.to_points()));
}

TEST_CASE("meta gradient through quadratic inner losses matches the closed form") {
    const MicroScene m = make_micro_scene(1, 31);
    const Dataset ds = micro_dataset(m);
    const std::vector<LightTask> tasks{{0, {0, 1}, {0}, {1}}};
    const std::size_t n = kParamsPerPoint;
    std::vector<double> a(n), b(n), c(n), d(n), w(n);
    Rng rng(32);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = rng.uniform(0.5, 2.0);
        b[i] = rng.uniform(0.5, 2.0);
        c[i] = rng.uniform(-1, 1);
        d[i] = rng.uniform(-1, 1);
        w[i] = rng.uniform(0.5, 2.0);
    }
    // Diagonal quadratics: 0.5 sum k_i (p_i - t_i)^2.
    auto quad = [n](std::vector<double> k, std::vector<double> t) {
        return boxed([n, k, t](auto& tape, auto p) {
            using V = std::decay_t<decltype(p[0])>;
            (void)tape;
            V s(0.0);
            for (std::size_t i = 0; i < n; ++i) s = s + 0.5 * k[i] * (p[i] - t[i]) * (p[i] - t[i]);
            return s;
        });
    };
    const std::vector<double> zeros(n, 0.0);
    const ObjectiveFactory factory = [&](const OLATCapture& cap, LossKind kind, int, const Bvh*) {
        if (kind == LossKind::Phong) return quad(a, zeros);
        if (&cap == &ds.captures[0]) return quad(b, c);
        return quad(w, d);
    };

    const double a1 = 0.05, a2 = 0.08;
    const std::vector<double> ma = phong_mask().expand(1);
    const std::vector<double> mb = shadow_mask().expand(1);
    const ParamSet theta(m.points);
    for (bool first_order : {false, true}) {
        TrainConfig cfg = quiet_config(0, 0, 1);
        cfg.tasks_per_iteration = 1;
        cfg.inner_lr_phong = a1;
        cfg.inner_lr_shadow = a2;
        cfg.first_order = first_order;
        cfg.record_gradients = true;
        std::vector<MetaIterationRecord> history;
        meta_train(m.points, ds, tasks, cfg, factory, &history);
        REQUIRE(history.size() == 1);
        const auto& g = history[0].gradient;
        REQUIRE(g.size() == n);
        double outer = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = theta.values()[i];
            const double p1 = p - a1 * ma[i] * a[i] * p;
            const double p2 = p1 - a2 * mb[i] * b[i] * (p1 - c[i]);
            double expect = w[i] * (p2 - d[i]);
            if (!first_order) expect *= (1.0 - a1 * ma[i] * a[i]) * (1.0 - a2 * mb[i] * b[i]);
            outer += 0.5 * w[i] * (p2 - d[i]) * (p2 - d[i]);
            CHECK(g[i] == doctest::Approx(expect).epsilon(1e-12));
        }
        CHECK(history[0].query_loss == doctest::Approx(outer).epsilon(1e-12));
    }
}

namespace {

struct Seen {
    LossKind kind;
    const OLATCapture* capture;
    std::vector<double> params;  // primal values at the first double-tape evaluation
};

class Recorder final : public Objective {
public:
    Recorder(std::unique_ptr<Objective> inner, std::shared_ptr<Seen> seen) : inner_(std::move(inner)), seen_(std::move(seen)) {}
    Var<double> operator()(Tape<double>& tape, std::span<const Var<double>> params) const override {
        if (seen_->params.empty()) {
            for (const auto& v : params) seen_->params.push_back(v.value());
        }
        return (*inner_)(tape, params);
    }
    Var<Dual> operator()(Tape<Dual>& tape, std::span<const Var<Dual>> params) const override {
        return (*inner_)(tape, params);
    }

private:
    std::unique_ptr<Objective> inner_;
    std::shared_ptr<Seen> seen_;
};

}  // namespace

TEST_CASE("inner steps touch only their masked attributes") {
    // Both support lights are partly occluded, so the shadow logits have a gradient.
    const MicroScene a = make_micro_scene(4, 42);
    const MicroScene b = make_micro_scene(4, 51);
    Dataset ds;
    ds.captures = {a.support, a.capture, b.support, b.capture};
    const std::vector<LightTask> tasks{{0, {0, 1}, {0}, {1}}, {1, {2, 3}, {2}, {3}}};
    TrainConfig cfg = quiet_config(0, 0, 1);
    cfg.tasks_per_iteration = 2;
    cfg.inner_lr_phong = 1e-2;
    cfg.inner_lr_shadow = 1e-2;
    const ObjectiveFactory base = default_objective_factory(cfg);
    std::mutex mu;
    std::vector<std::shared_ptr<Seen>> seen;
    const ObjectiveFactory factory = [&](const OLATCapture& cap, LossKind kind, int it, const Bvh* bvh) {
        auto s = std::make_shared<Seen>(Seen{kind, &cap, {}});
        {
            std::lock_guard<std::mutex> lock(mu);
            seen.push_back(s);
        }
        return std::unique_ptr<Objective>(std::make_unique<Recorder>(base(cap, kind, it, bvh), s));
    };
    meta_train(a.points, ds, tasks, cfg, factory);
    REQUIRE(seen.size() == 6);

    const ParamSet theta(a.points);
    const auto ma = phong_mask().expand(theta.point_count());
    const auto mb = shadow_mask().expand(theta.point_count());
    auto find = [&](LossKind kind, std::size_t capture) -> const std::vector<double>& {
        for (const auto& s : seen) {
            if (s->kind == kind && s->capture == &ds.captures[capture]) return s->params;
        }
        FAIL("objective not built");
        return seen[0]->params;
    };
    for (std::size_t t = 0; t < 2; ++t) {
        const std::size_t sup = 2 * t, qry = 2 * t + 1;
        const auto& p0 = find(LossKind::Phong, sup);
        const auto& p1 = find(LossKind::Shadow, sup);
        const auto& p2 = find(LossKind::Shadow, qry);
        CHECK(std::equal(p0.begin(), p0.end(), theta.values().begin(), theta.values().end()));

        StageContext ctx;
        ctx.capture = &ds.captures[sup];
        ctx.kind = LossKind::Phong;
        const auto g = value_and_grad(StageObjective(ctx), p0).gradient;
        std::size_t changed1 = 0, changed2 = 0;
        for (std::size_t i = 0; i < p0.size(); ++i) {
            CHECK(p1[i] == doctest::Approx(p0[i] - 1e-2 * ma[i] * g[i]).epsilon(1e-12));
            if (ma[i] == 0.0) CHECK(p1[i] == p0[i]);
            if (mb[i] == 0.0) CHECK(p2[i] == p1[i]);
            changed1 += p1[i] != p0[i];
            changed2 += p2[i] != p1[i];
        }
        CHECK(changed1 > 0);
        CHECK(changed2 > 0);
    }
}

TEST_CASE("outer gradient through both inner steps matches finite differences") {
    const MicroScene m = make_micro_scene(5, 51);
    const Bvh bvh = build_bvh(std::span<const double>(m.params));
    auto ctx = [&](const OLATCapture& cap, LossKind kind) {
        StageContext c;
        c.capture = &cap;
        c.kind = kind;
        c.bvh = &bvh;
        return c;
    };
    const StageObjective phong(ctx(m.support, LossKind::Phong));
    const StageObjective shadow(ctx(m.support, LossKind::Shadow));
    const StageObjective outer(ctx(m.capture, LossKind::Shadow));
    const auto ma = phong_mask().expand(5);
    const auto mb = shadow_mask().expand(5);
    const double a1 = 1e-2, a2 = 2e-2;
    const InnerStep steps[2] = {{&phong, a1, ma}, {&shadow, a2, mb}};
    const MetaGradient exact = grad_through_inner_steps(outer, steps, m.params);
    const MetaGradient first = grad_through_inner_steps(outer, steps, m.params, true);

    // Stop-gradient branches are recorded at the base point and replayed.
    FrozenValues f1, f2, f3;
    bool recorded = false;
    auto composed = [&](std::span<const double> p) {
        for (FrozenValues* f : {&f1, &f2, &f3}) {
            if (recorded) f->start_replay();
            else f->start_recording();
        }
        std::vector<double> q(p.begin(), p.end());
        const auto g1 = value_and_grad(phong, q, &f1).gradient;
        for (std::size_t i = 0; i < q.size(); ++i) q[i] -= a1 * ma[i] * g1[i];
        const auto g2 = value_and_grad(shadow, q, &f2).gradient;
        for (std::size_t i = 0; i < q.size(); ++i) q[i] -= a2 * mb[i] * g2[i];
        const double v = evaluate(outer, q, &f3);
        recorded = true;
        return v;
    };
    CHECK(composed(m.params) == doctest::Approx(exact.outer_value).epsilon(1e-12));
    const auto report = compare_finite_differences(composed, m.params, exact.gradient, 1e-6, 60, 52);
    MESSAGE("meta FD max rel err " << report.max_rel_error << " over " << report.checked);
    CHECK(report.checked >= 50);
    CHECK(report.max_rel_error < 1e-3);

    double diff = 0.0;
    for (std::size_t i = 0; i < exact.gradient.size(); ++i) {
        diff = std::max(diff, std::abs(exact.gradient[i] - first.gradient[i]));
    }
    CHECK(diff > 1e-8);
}

TEST_CASE("meta training rejects too few tasks and non-finite losses") {
    const MicroScene m = make_micro_scene(2, 61);
    const Dataset ds = micro_dataset(m);
    const std::vector<LightTask> tasks{{0, {0, 1}, {0}, {1}}};
    TrainConfig cfg = quiet_config(0, 0, 1);
    cfg.tasks_per_iteration = 2;
    CHECK_THROWS_AS(meta_train(m.points, ds, tasks, cfg), std::invalid_argument);

    cfg.tasks_per_iteration = 1;
    const ObjectiveFactory nan_outer = [&](const OLATCapture& cap, LossKind, int, const Bvh*) {
        const bool query = &cap == &ds.captures[1];
        return boxed([query](auto& tape, auto p) {
            (void)tape;
            using V = std::decay_t<decltype(p[0])>;
            V s = p[0] * p[0];
            return query ? s + std::numeric_limits<double>::quiet_NaN() : s;
        });
    };
    try {
        meta_train(m.points, ds, tasks, cfg, nan_outer);
        FAIL("expected NonFiniteGradientError");
    } catch (const NonFiniteGradientError& e) {
        CHECK(std::string(e.what()).find("meta iteration 0") != std::string::npos);
    }
}

TEST_CASE("densification prunes transparent points and clones high-gradient ones") {
    std::vector<GaussianPoint> pts = four_blobs();
    GradientStats stats;
    stats.reset(pts.size());
    std::vector<double> g(pts.size() * kParamsPerPoint, 0.0);
    for (double& x : g) x = 1e-7;
    stats.add(g);
    DensifyConfig cfg;
    cfg.enabled = true;

    SUBCASE("opaque and settled points are unchanged") {
        const auto r = densify_and_prune(pts, stats, cfg);
        CHECK(same_points(r.points, pts));
        CHECK(r.kept == pts.size());
    }
    SUBCASE("a nearly transparent point is removed") {
        pts[2].opacity_logit = float(std::log(0.001 / 0.999));
        const auto r = densify_and_prune(pts, stats, cfg);
        REQUIRE(r.points.size() == 3);
        CHECK(r.source == std::vector<std::size_t>{0, 1, 3});
    }
    SUBCASE("a point with a large positional gradient is cloned nearby") {
        stats.reset(pts.size());
        g[ParamSet::index(1, Attribute::Position, 0)] = 1e-3;
        stats.add(g);
        const auto r = densify_and_prune(pts, stats, cfg);
        REQUIRE(r.points.size() == 5);
        CHECK(r.kept == 4);
        CHECK(r.source[4] == 1);
        const GaussianPoint& parent = pts[1];
        const GaussianPoint& clone = r.points[4];
        const double sigma = std::exp(double(*std::max_element(parent.log_scale.begin(), parent.log_scale.end())));
        double dist = 0.0;
        for (int k = 0; k < 3; ++k) dist += std::pow(double(clone.position[k]) - parent.position[k], 2);
        dist = std::sqrt(dist);
        CHECK(dist > 0.0);
        CHECK(dist <= 3.0 * sigma);
        CHECK(clone.position[0] < parent.position[0]);  // against the gradient
    }
}
