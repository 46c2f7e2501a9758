#include "phong_splat/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "phong_splat/checkpoint.hpp"
#include "phong_splat/parallel.hpp"
#include "phong_splat/rng.hpp"
#include "phong_splat/visibility.hpp"

namespace phong_splat {

GroupRates LearningRates::at(double progress) const {
    const double t = std::clamp(progress, 0.0, 1.0);
    const double position = std::exp((1.0 - t) * std::log(position_init) + t * std::log(position_final));
    GroupRates r{};
    auto set = [&](Attribute a, double v) { r[static_cast<std::size_t>(a)] = v; };
    set(Attribute::Position, position * spatial_scale);
    set(Attribute::Rotation, rotation);
    set(Attribute::LogScale, scale);
    set(Attribute::OpacityLogit, opacity);
    set(Attribute::Ambient, color);
    set(Attribute::NormalResidualOut, color);
    set(Attribute::NormalResidualIn, color);
    set(Attribute::Diffuse, color);
    set(Attribute::Specular, color);
    set(Attribute::ShadowLogit, shadow);
    return r;
}

void TrainConfig::validate() const {
    if (stage1_iterations < 0 || stage2_iterations < 0 || stage3_iterations < 0) {
        throw std::invalid_argument("iteration counts must be >= 0");
    }
    if (tasks_per_iteration < 1) throw std::invalid_argument("tasks per iteration must be >= 1");
    if (num_tasks < 1) throw std::invalid_argument("num_tasks must be >= 1");
    if (!(support_fraction > 0.0 && support_fraction < 1.0)) {
        throw std::invalid_argument("support fraction must be in (0, 1)");
    }
    if (!(inner_lr_phong >= 0.0) || !(inner_lr_shadow >= 0.0)) {
        throw std::invalid_argument("inner learning rates must be >= 0");
    }
    if (!(lr.position_init > 0.0) || !(lr.position_final > 0.0) || !(lr.spatial_scale > 0.0)) {
        throw std::invalid_argument("position learning rates must be > 0");
    }
    for (double v : {lr.opacity, lr.scale, lr.rotation, lr.color, lr.shadow}) {
        if (!(v >= 0.0)) throw std::invalid_argument("learning rates must be >= 0");
    }
    if (densify.interval < 1) throw std::invalid_argument("densify interval must be >= 1");
    if (bvh_rebuild_interval < 1) throw std::invalid_argument("bvh rebuild interval must be >= 1");
    if (log_interval < 1) throw std::invalid_argument("log interval must be >= 1");
    if (checkpoint_interval < 1) throw std::invalid_argument("checkpoint interval must be >= 1");
    if (!(render.shininess > 0.0)) throw std::invalid_argument("shininess must be > 0");
    weights.validate();
}

AttributeMask stage1_mask() {
    return {Attribute::Position, Attribute::Rotation, Attribute::LogScale, Attribute::OpacityLogit,
            Attribute::Ambient};
}

AttributeMask stage2_mask() {
    return stage1_mask().set(Attribute::NormalResidualOut).set(Attribute::NormalResidualIn);
}

AttributeMask phong_mask() { return AttributeMask::all().set(Attribute::ShadowLogit, false); }

AttributeMask shadow_mask() { return {Attribute::ShadowLogit}; }

void project_constraints(ParamSet& params) {
    for (std::size_t i = 0; i < params.point_count(); ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            params.at(i, Attribute::Ambient, c) = std::max(0.0, params.at(i, Attribute::Ambient, c));
            params.at(i, Attribute::Diffuse, c) = std::max(0.0, params.at(i, Attribute::Diffuse, c));
        }
        params.at(i, Attribute::Specular) = std::max(0.0, params.at(i, Attribute::Specular));
        double norm = 0.0;
        for (std::size_t c = 0; c < 4; ++c) norm += params.at(i, Attribute::Rotation, c) * params.at(i, Attribute::Rotation, c);
        norm = std::sqrt(norm);
        if (norm > 1e-12) {
            for (std::size_t c = 0; c < 4; ++c) params.at(i, Attribute::Rotation, c) /= norm;
        } else {
            params.at(i, Attribute::Rotation, 0) = 1.0;
            for (std::size_t c = 1; c < 4; ++c) params.at(i, Attribute::Rotation, c) = 0.0;
        }
    }
}

void initialize_phong(std::vector<GaussianPoint>& points) {
    for (GaussianPoint& p : points) {
        for (int c = 0; c < 3; ++c) p.diffuse_color[c] = 0.5f * p.ambient_color[c];
        p.specular_coeff = 0.04f;
        p.shadow_coeff_logit = 0.0f;
    }
}

void GradientStats::reset(std::size_t points) {
    norm_sum.assign(points, 0.0);
    direction_sum.assign(points * 3, 0.0);
    count.assign(points, 0);
}

void GradientStats::add(std::span<const double> gradient) {
    const std::size_t n = gradient.size() / kParamsPerPoint;
    if (norm_sum.size() != n) reset(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* g = gradient.data() + ParamSet::index(i, Attribute::Position);
        norm_sum[i] += std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
        for (int k = 0; k < 3; ++k) direction_sum[i * 3 + k] += g[k];
        ++count[i];
    }
}

DensifyResult densify_and_prune(const std::vector<GaussianPoint>& points, const GradientStats& stats,
                                const DensifyConfig& config) {
    DensifyResult out;
    std::vector<std::size_t> clones;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].opacity() < config.prune_opacity) continue;
        out.points.push_back(points[i]);
        out.source.push_back(i);
        if (i < stats.count.size() && stats.count[i] > 0 &&
            stats.norm_sum[i] / static_cast<double>(stats.count[i]) > config.clone_gradient) {
            clones.push_back(i);
        }
    }
    out.kept = out.points.size();
    for (std::size_t i : clones) {
        const GaussianPoint& parent = points[i];
        // Step half a standard deviation along the descent direction.
        Vec3d d{-stats.direction_sum[i * 3], -stats.direction_sum[i * 3 + 1], -stats.direction_sum[i * 3 + 2]};
        const double len = norm(d);
        d = len > 0.0 ? d * (1.0 / len) : Vec3d{0.0, 0.0, 1.0};
        const auto pp = point_params(parent);
        const Mat3d sigma = covariance(pp.rotation, pp.log_scale);
        const Vec3d sd{dot(sigma.row(0), d), dot(sigma.row(1), d), dot(sigma.row(2), d)};
        const double sd_along = std::sqrt(std::max(0.0, dot(d, sd)));
        GaussianPoint clone = parent;
        for (int k = 0; k < 3; ++k) {
            clone.position[k] = static_cast<float>(parent.position[k] + 0.5 * sd_along * d[k]);
        }
        out.points.push_back(clone);
        out.source.push_back(i);
    }
    return out;
}

double camera_extent(const Dataset& dataset) {
    if (dataset.size() == 0) return 1.0;
    Vec3d mean{0.0, 0.0, 0.0};
    for (const auto& c : dataset.captures) mean = mean + c.camera.center();
    mean = mean * (1.0 / static_cast<double>(dataset.size()));
    double r = 0.0;
    for (const auto& c : dataset.captures) r = std::max(r, norm(c.camera.center() - mean));
    return 1.1 * std::max(r, 1e-6);
}

namespace {

using Clock = std::chrono::steady_clock;

int total_iterations(const TrainConfig& c) {
    return c.stage1_iterations + c.stage2_iterations + c.stage3_iterations;
}

double progress(const TrainConfig& c, int global_iteration) {
    const int total = total_iterations(c);
    return total > 0 ? static_cast<double>(global_iteration) / total : 0.0;
}

void write_checkpoint(const TrainConfig& config, const ParamSet& params, const std::string& name) {
    if (config.checkpoint_dir.empty()) return;
    std::filesystem::create_directories(config.checkpoint_dir);
    save_checkpoint(params.to_points(), config.checkpoint_dir / name);
}

std::string checkpoint_name(int stage, int iteration) {
    char name[64];
    std::snprintf(name, sizeof name, "stage%d_iter%06d.phgs", stage, iteration);
    return name;
}

struct StepResult {
    LossValues loss;
    std::vector<double> gradient;
};

StepResult loss_and_gradient(std::span<const double> params, const StageContext& ctx) {
    Tape<double> tape;
    const auto vars = tape.leaves(params);
    const LossTerms<double> t = stage_loss(tape, std::span<const Var<double>>(vars), ctx);
    StepResult out;
    out.loss = {t.total.value(), t.rgb.value(), t.sparse.value(), t.normal.value(), t.smooth.value(), t.diffuse.value()};
    const auto adj = tape.adjoints(t.total);
    out.gradient.assign(adj.begin(), adj.begin() + static_cast<std::ptrdiff_t>(params.size()));
    return out;
}

void log_line(const TrainConfig& config, int stage, int iteration, const LossValues& l, Clock::time_point start) {
    if (config.log == nullptr) return;
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    char line[256];
    std::snprintf(line, sizeof line,
                  "stage %d iter %6d loss %.6f rgb %.6f sparse %.6f normal %.6f smooth %.6f diffuse %.6f time %.1fs\n",
                  stage, iteration, l.total, l.rgb, l.sparse, l.normal, l.smooth, l.diffuse, elapsed);
    *config.log << line;
    config.log->flush();
}

// Single-capture stages 1 and 2.
std::vector<GaussianPoint> train_single_capture(const std::vector<GaussianPoint>& points, const Dataset& dataset,
                                                const TrainConfig& config, int stage) {
    config.validate();
    const int iterations = stage == 1 ? config.stage1_iterations : config.stage2_iterations;
    if (iterations == 0) return points;
    if (dataset.size() == 0) throw std::invalid_argument("training needs at least one capture");

    const int offset = stage == 1 ? 0 : config.stage1_iterations;
    const AttributeMask attrs = stage == 1 ? stage1_mask() : stage2_mask();
    Rng rng(config.seed + static_cast<std::uint64_t>(stage) * 0x9E3779B97F4A7C15ull);

    ParamSet params(points);
    Adam adam(params.size());
    std::vector<double> mask = attrs.expand(params.point_count());
    GradientStats stats;
    stats.reset(params.point_count());
    const auto start = Clock::now();

    for (int it = 0; it < iterations; ++it) {
        StageContext ctx;
        ctx.capture = &dataset.captures[rng.below(dataset.size())];
        ctx.kind = stage == 1 ? LossKind::Stage1 : LossKind::Stage2;
        ctx.weights = config.weights;
        ctx.iteration = it;
        ctx.render = config.render;

        StepResult step;
        try {
            step = loss_and_gradient(params.values(), ctx);
        } catch (const NonFiniteError& e) {
            throw NonFiniteGradientError("stage " + std::to_string(stage) + " iteration " + std::to_string(it) + ": " + e.what());
        }
        if (!std::isfinite(step.loss.total)) {
            throw NonFiniteGradientError("stage " + std::to_string(stage) + " iteration " + std::to_string(it) + ": non-finite loss");
        }
        try {
            adam.step(params, step.gradient, config.lr.at(progress(config, offset + it)), mask);
        } catch (const NonFiniteGradientError& e) {
            throw NonFiniteGradientError("stage " + std::to_string(stage) + " iteration " + std::to_string(it) + ": " + e.what());
        }
        project_constraints(params);
        if (config.densify.enabled) stats.add(step.gradient);

        if (it % config.log_interval == 0 || it + 1 == iterations) log_line(config, stage, it, step.loss, start);
        if (config.densify.enabled && (it + 1) % config.densify.interval == 0 && it + 1 < iterations) {
            const DensifyResult d = densify_and_prune(params.to_points(), stats, config.densify);
            std::vector<std::size_t> moments(d.source);
            for (std::size_t k = d.kept; k < moments.size(); ++k) moments[k] = std::numeric_limits<std::size_t>::max();
            params = ParamSet(d.points);
            adam.remap(moments);
            mask = attrs.expand(params.point_count());
            stats.reset(params.point_count());
        }
        if ((it + 1) % config.checkpoint_interval == 0) {
            write_checkpoint(config, params, checkpoint_name(stage, it + 1));
        }
    }
    write_checkpoint(config, params, "stage" + std::to_string(stage) + "_final.phgs");
    return params.to_points();
}

// Per-task draw: one support and one query capture.
struct TaskDraw {
    std::size_t support;
    std::size_t query;
};

}  // namespace

std::vector<GaussianPoint> train_stage1(const std::vector<GaussianPoint>& points, const Dataset& dataset,
                                        const TrainConfig& config) {
    return train_single_capture(points, dataset, config, 1);
}

std::vector<GaussianPoint> train_stage2(const std::vector<GaussianPoint>& points, const Dataset& dataset,
                                        const TrainConfig& config) {
    return train_single_capture(points, dataset, config, 2);
}

ObjectiveFactory default_objective_factory(const TrainConfig& config) {
    return [weights = config.weights, render = config.render, shadows = config.shadows](
               const OLATCapture& capture, LossKind kind, int iteration, const Bvh* bvh) {
        StageContext ctx;
        ctx.capture = &capture;
        ctx.kind = !shadows && kind == LossKind::Shadow ? LossKind::Phong : kind;
        ctx.weights = weights;
        ctx.iteration = iteration;
        ctx.render = render;
        ctx.bvh = bvh;
        return std::unique_ptr<Objective>(new StageObjective(ctx));
    };
}

std::vector<GaussianPoint> meta_train(const std::vector<GaussianPoint>& points, const Dataset& dataset,
                                      const std::vector<LightTask>& tasks, const TrainConfig& config,
                                      const ObjectiveFactory& factory, std::vector<MetaIterationRecord>* history) {
    config.validate();
    const std::size_t m = config.tasks_per_iteration;
    if (tasks.size() < m) {
        throw std::invalid_argument("meta_train: " + std::to_string(tasks.size()) + " tasks available, " + std::to_string(m) + " required");
    }
    for (const LightTask& t : tasks) {
        if (t.support.empty() || t.query.empty()) throw std::invalid_argument("meta_train: empty support or query");
        for (std::size_t i : t.members) {
            if (i >= dataset.size()) throw std::out_of_range("meta_train: task references a missing capture");
        }
    }
    const ObjectiveFactory make = factory ? factory : default_objective_factory(config);
    const int offset = config.stage1_iterations + config.stage2_iterations;
    Rng rng(config.seed + 3 * 0x9E3779B97F4A7C15ull);

    ParamSet params(points);
    Adam adam(params.size());
    const std::vector<double> mask_a = phong_mask().expand(params.point_count());
    const std::vector<double> mask_b = shadow_mask().expand(params.point_count());
    std::unique_ptr<Bvh> bvh;
    const auto start = Clock::now();

    for (int it = 0; it < config.stage3_iterations; ++it) {
        if (!bvh || it % config.bvh_rebuild_interval == 0) bvh = std::make_unique<Bvh>(build_bvh(params.values()));

        // Sample m distinct tasks, then one support and one query capture each.
        std::vector<std::size_t> order(tasks.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        rng.shuffle(order);
        order.resize(m);
        std::sort(order.begin(), order.end());
        std::vector<TaskDraw> draws(m);
        for (std::size_t k = 0; k < m; ++k) {
            const LightTask& t = tasks[order[k]];
            draws[k] = {t.support[rng.below(t.support.size())], t.query[rng.below(t.query.size())]};
        }

        std::vector<MetaGradient> results(m);
        const std::span<const double> theta = params.values();
        try {
            parallel_for(m, [&](std::size_t k) {
                const OLATCapture& support = dataset.captures[draws[k].support];
                const OLATCapture& query = dataset.captures[draws[k].query];
                const auto phong = make(support, LossKind::Phong, it, bvh.get());
                const auto shadow = make(support, LossKind::Shadow, it, bvh.get());
                const auto outer = make(query, LossKind::Shadow, it, bvh.get());
                const InnerStep steps[2] = {{phong.get(), config.inner_lr_phong, mask_a},
                                            {shadow.get(), config.inner_lr_shadow, mask_b}};
                // Without shadows the loss ignores phi, so the second step is an exact no-op.
                const std::size_t n_steps = config.shadows ? 2 : 1;
                results[k] = grad_through_inner_steps(*outer, std::span<const InnerStep>(steps, n_steps), theta,
                                                      config.first_order);
            });
        } catch (const NonFiniteError& e) {
            throw NonFiniteGradientError("meta iteration " + std::to_string(it) + ": " + e.what());
        }

        // Average over tasks in ascending task order.
        std::vector<double> gradient(params.size(), 0.0);
        double query_loss = 0.0;
        for (const MetaGradient& r : results) {
            query_loss += r.outer_value;
            for (std::size_t i = 0; i < gradient.size(); ++i) gradient[i] += r.gradient[i];
        }
        const double inv = 1.0 / static_cast<double>(m);
        query_loss *= inv;
        for (double& g : gradient) g *= inv;
        if (!std::isfinite(query_loss)) {
            throw NonFiniteGradientError("meta iteration " + std::to_string(it) + ": non-finite outer loss");
        }
        try {
            adam.step(params, gradient, config.lr.at(progress(config, offset + it)));
        } catch (const NonFiniteGradientError& e) {
            throw NonFiniteGradientError("meta iteration " + std::to_string(it) + ": " + e.what());
        }
        project_constraints(params);
        if (history != nullptr) {
            history->push_back({query_loss, config.record_gradients ? gradient : std::vector<double>{}});
        }

        if (it % config.log_interval == 0 || it + 1 == config.stage3_iterations) {
            LossValues l;
            l.total = query_loss;
            log_line(config, 3, it, l, start);
        }
        if ((it + 1) % config.checkpoint_interval == 0) {
            write_checkpoint(config, params, checkpoint_name(3, it + 1));
        }
    }
    if (config.stage3_iterations > 0) write_checkpoint(config, params, "stage3_final.phgs");
    return params.to_points();
}

std::vector<GaussianPoint> train_all(const std::vector<GaussianPoint>& points, const Dataset& dataset,
                                     const TrainConfig& config) {
    config.validate();
    std::vector<GaussianPoint> scene = train_stage1(points, dataset, config);
    scene = train_stage2(scene, dataset, config);
    initialize_phong(scene);
    if (config.stage3_iterations == 0) return scene;
    const auto tasks = partition_tasks(dataset, std::min(config.num_tasks, dataset.size()), config.support_fraction,
                                       config.seed);
    TrainConfig meta = config;
    meta.tasks_per_iteration = std::min(config.tasks_per_iteration, tasks.size());
    return meta_train(scene, dataset, tasks, meta);
}

}  // namespace phong_splat
