#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "phong_splat/adam.hpp"
#include "phong_splat/autodiff.hpp"
#include "phong_splat/losses.hpp"
#include "phong_splat/objectives.hpp"
#include "phong_splat/render.hpp"
#include "phong_splat/scene.hpp"
#include "phong_splat/tasks.hpp"

namespace phong_splat {

struct LearningRates {
    double position_init = 1.6e-4;
    double position_final = 1.6e-6;
    double opacity = 0.05;
    double scale = 5e-3;
    double rotation = 1e-3;
    double color = 2.5e-3;  // ambient, diffuse, specular and the normal residuals
    double shadow = 5e-3;
    double spatial_scale = 1.0;  // multiplies the position rate

    // Rates at `progress` in [0, 1] of the whole schedule; position decays
    // exponentially from init to final.
    GroupRates at(double progress) const;
};

struct DensifyConfig {
    bool enabled = false;
    int interval = 500;
    double prune_opacity = 0.005;
    double clone_gradient = 2e-4;
};

struct TrainConfig {
    int stage1_iterations = 10000;
    int stage2_iterations = 5000;
    int stage3_iterations = 2000;
    std::size_t tasks_per_iteration = 4;  // m
    std::size_t num_tasks = 8;            // light clusters
    double support_fraction = 0.5;
    double inner_lr_phong = 1e-8;   // alpha_1
    double inner_lr_shadow = 1e-8;  // alpha_2
    bool first_order = false;
    bool shadows = true;  // false forces visibility 1 in stage 3 (ablation)
    LearningRates lr;
    LossWeights weights;
    RenderOptions render;
    DensifyConfig densify;
    int bvh_rebuild_interval = 100;
    std::uint64_t seed = 0;
    bool record_gradients = false;  // keep each outer gradient in the meta history

    int log_interval = 50;
    std::ostream* log = nullptr;
    int checkpoint_interval = 1000;
    std::filesystem::path checkpoint_dir;  // empty disables checkpoints

    void validate() const;
};

// Attribute groups updated in each phase.
AttributeMask stage1_mask();
AttributeMask stage2_mask();
AttributeMask phong_mask();   // every attribute except the shadow logit
AttributeMask shadow_mask();  // only the shadow logit

// Clamps colors to >= 0 and renormalizes quaternions.
void project_constraints(ParamSet& params);

// Stage-3 entry: k_d = 0.5 ambient, k_s = 0.04, shadow logit 0.
void initialize_phong(std::vector<GaussianPoint>& points);

// Accumulated positional gradient statistics for densification.
struct GradientStats {
    std::vector<double> norm_sum;
    std::vector<double> direction_sum;  // 3 per point
    std::vector<std::size_t> count;

    void reset(std::size_t points);
    void add(std::span<const double> gradient);
};

struct DensifyResult {
    std::vector<GaussianPoint> points;
    std::vector<std::size_t> source;  // index of the originating point, per output point
    std::size_t kept = 0;             // survivors come first, clones after
};

// Prunes points below the opacity threshold, then clones points whose mean
// positional gradient norm exceeds the threshold, offset by half a standard
// deviation against the mean gradient direction.
DensifyResult densify_and_prune(const std::vector<GaussianPoint>& points, const GradientStats& stats,
                                const DensifyConfig& config);

std::vector<GaussianPoint> train_stage1(const std::vector<GaussianPoint>& points, const Dataset& dataset,
                                        const TrainConfig& config);
std::vector<GaussianPoint> train_stage2(const std::vector<GaussianPoint>& points, const Dataset& dataset,
                                        const TrainConfig& config);

// Builds the objective of `kind` on one capture. The default builds
// StageObjective; tests inject surrogates.
using ObjectiveFactory = std::function<std::unique_ptr<Objective>(const OLATCapture& capture, LossKind kind,
                                                                  int iteration, const Bvh* bvh)>;
ObjectiveFactory default_objective_factory(const TrainConfig& config);

struct MetaIterationRecord {
    double query_loss = 0.0;       // mean outer loss over the sampled tasks
    std::vector<double> gradient;  // averaged outer gradient, if recorded
};

std::vector<GaussianPoint> meta_train(const std::vector<GaussianPoint>& points, const Dataset& dataset,
                                      const std::vector<LightTask>& tasks, const TrainConfig& config,
                                      const ObjectiveFactory& factory = {},
                                      std::vector<MetaIterationRecord>* history = nullptr);

// Stages 1 to 3 with the stage-3 initialization in between.
std::vector<GaussianPoint> train_all(const std::vector<GaussianPoint>& points, const Dataset& dataset,
                                     const TrainConfig& config);

// 1.1 times the largest camera distance from the mean camera center.
double camera_extent(const Dataset& dataset);

}  // namespace phong_splat
