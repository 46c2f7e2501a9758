// phong-splat: dataset synthesis, training, rendering, relighting, evaluation
// and gradient checks from the command line.
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "phong_splat/checkpoint.hpp"
#include "phong_splat/dataset_io.hpp"
#include "phong_splat/evaluation.hpp"
#include "phong_splat/image.hpp"
#include "phong_splat/objectives.hpp"
#include "phong_splat/oracle.hpp"
#include "phong_splat/trainer.hpp"

namespace fs = std::filesystem;
using namespace phong_splat;

namespace {

std::vector<double> parse_list(const std::string& text, std::size_t count, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw std::invalid_argument(what + ": '" + text + "' is not a comma separated list of numbers");
        }
    }
    if (count != 0 && out.size() != count) {
        throw std::invalid_argument(what + ": expected " + std::to_string(count) + " values, got '" + text + "'");
    }
    return out;
}

Vec3d parse_vec3(const std::string& text, const std::string& what) {
    const auto v = parse_list(text, 3, what);
    return {v[0], v[1], v[2]};
}

ShadingMode parse_mode(const std::string& name) {
    if (name == "ambient") return ShadingMode::AmbientOnly;
    if (name == "unshadowed") return ShadingMode::Unshadowed;
    if (name == "shadowed") return ShadingMode::Shadowed;
    throw std::invalid_argument("--mode must be ambient, unshadowed or shadowed, got '" + name + "'");
}

// A directory holding a manifest is used as is; otherwise its `split` subdirectory.
fs::path resolve_split(const fs::path& dir, const std::string& split) {
    if (fs::exists(dir / kManifestName)) return dir;
    if (fs::exists(dir / split / kManifestName)) return dir / split;
    throw std::runtime_error("no " + std::string(kManifestName) + " in " + dir.string() + " or " +
                             (dir / split).string());
}

void write_image(const fs::path& path, const Image& image, bool srgb) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_png(path, image, srgb);
    std::cout << "wrote " << path.string() << '\n';
}

CLI::Option* add_switch(CLI::App* app, const std::string& name, bool& value, const std::string& help) {
    return app->add_flag(name, value, help)->default_str(value ? "true" : "false");
}

// Options shared by the rendering subcommands.
struct ViewOptions {
    std::string eye = "0,-3,2";
    std::string target = "0,0,0";
    std::string up = "0,0,1";
    int width = 256;
    int height = 256;
    double focal = 0.0;
    std::string view_data;
    int view_index = -1;
    std::string mode = "shadowed";
    std::string background = "0,0,0";
    double shininess = kDefaultShininess;
    bool srgb = false;

    void add(CLI::App* app) {
        app->add_option("--eye", eye, "Camera position x,y,z");
        app->add_option("--target", target, "Look-at point x,y,z");
        app->add_option("--up", up, "Up vector x,y,z");
        app->add_option("--width", width, "Image width")->check(CLI::PositiveNumber);
        app->add_option("--height", height, "Image height")->check(CLI::PositiveNumber);
        app->add_option("--focal", focal, "Focal length in pixels (0 = 1.2 * width)")->check(CLI::NonNegativeNumber);
        app->add_option("--view-data", view_data, "Take the camera from this dataset instead of --eye");
        app->add_option("--view-index", view_index, "Capture index in --view-data");
        app->add_option("--mode", mode, "Shading: ambient, unshadowed or shadowed");
        app->add_option("--background", background, "Background color r,g,b");
        app->add_option("--shininess", shininess, "Specular exponent")->check(CLI::PositiveNumber);
        add_switch(app, "--srgb", srgb, "Encode written PNGs as sRGB");
    }

    Camera camera() const {
        if (!view_data.empty()) {
            const Dataset d = load_dataset(resolve_split(view_data, "test"));
            if (view_index < 0 || static_cast<std::size_t>(view_index) >= d.size()) {
                throw std::out_of_range("--view-index " + std::to_string(view_index) + " outside [0, " +
                                        std::to_string(d.size()) + ")");
            }
            return d.captures[static_cast<std::size_t>(view_index)].camera;
        }
        const double f = focal > 0.0 ? focal : 1.2 * width;
        return Camera::look_at(parse_vec3(eye, "--eye"), parse_vec3(target, "--target"), parse_vec3(up, "--up"), f,
                               width, height);
    }

    RenderOptions render() const {
        RenderOptions r;
        r.mode = parse_mode(mode);
        r.background = parse_vec3(background, "--background");
        r.shininess = shininess;
        return r;
    }
};

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
    std::string scene = "sphere";
    std::string out;
    std::size_t n = 32;
    std::size_t n_test = 8;
    std::size_t n_ood = 0;
    std::string ood_normal;
    int size = 64;
    double camera_radius = 1.3;
    double light_radius = 0.8;
    double min_camera_elevation = -1.0;
    double min_light_elevation = -1.0;
    std::size_t points = 200;
    std::uint64_t seed = 0;
};

void run_synth(const SynthArgs& a) {
    const AnalyticScene scene = make_scene(a.scene);
    OlatOptions o;
    o.train_count = a.n;
    o.test_count = a.n_test;
    o.ood_count = a.n_ood;
    if (!a.ood_normal.empty()) o.ood_normal = parse_vec3(a.ood_normal, "--ood-normal");
    o.width = a.size;
    o.height = a.size;
    o.camera_radius = a.camera_radius;
    o.light_radius = a.light_radius;
    o.min_camera_elevation = a.min_camera_elevation;
    o.min_light_elevation = a.min_light_elevation;
    o.seed = a.seed;
    const OlatSplit split = generate_olat_dataset(scene, o);
    const fs::path out(a.out);
    save_dataset(out / "train", split.train);
    save_dataset(out / "test", split.test);
    save_checkpoint(sample_initial_points(scene, a.points, a.seed), out / "init.phgs");
    std::cout << "wrote " << split.train.size() << " training and " << split.test.size() << " test captures and "
              << a.points << " initial points to " << out.string() << '\n';
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string init;
    std::string out = "run";
    std::string iters = "10000,5000,2000";
    int stage = 0;
    bool srgb = false;
    bool quiet = false;
    std::string background = "0,0,0";
    TrainConfig config;
};

bool has_phong_attributes(const std::vector<GaussianPoint>& pts) {
    for (const auto& g : pts) {
        if (g.specular_coeff != 0.0F) return true;
        for (float d : g.diffuse_color)
            if (d != 0.0F) return true;
    }
    return false;
}

void run_train(TrainArgs a) {
    const auto iters = parse_list(a.iters, 3, "--iters");
    for (double v : iters) {
        if (v < 0 || v != std::floor(v)) throw std::invalid_argument("--iters: counts must be integers >= 0");
    }
    TrainConfig& c = a.config;
    c.stage1_iterations = static_cast<int>(iters[0]);
    c.stage2_iterations = static_cast<int>(iters[1]);
    c.stage3_iterations = static_cast<int>(iters[2]);
    c.render.background = parse_vec3(a.background, "--background");
    c.checkpoint_dir = a.out;
    c.log = a.quiet ? nullptr : &std::cout;

    const fs::path data_dir(a.data);
    const Dataset data = load_dataset(resolve_split(data_dir, "train"), a.srgb);
    if (data.size() == 0) throw std::runtime_error("training dataset is empty");
    const fs::path init = a.init.empty() ? data_dir / "init.phgs" : fs::path(a.init);
    if (!fs::exists(init)) throw std::runtime_error("no initial points: " + init.string() + " does not exist");
    std::vector<GaussianPoint> pts = load_checkpoint(init);
    if (!(c.lr.spatial_scale > 0.0)) c.lr.spatial_scale = camera_extent(data);
    c.validate();

    if (a.stage == 0 || a.stage == 1) pts = train_stage1(pts, data, c);
    if (a.stage == 0 || a.stage == 2) pts = train_stage2(pts, data, c);
    if (a.stage == 0 || a.stage == 3) {
        if (!has_phong_attributes(pts)) initialize_phong(pts);
        if (c.stage3_iterations > 0) {
            const auto tasks =
                partition_tasks(data, std::min(c.num_tasks, data.size()), c.support_fraction, c.seed);
            TrainConfig meta = c;
            meta.tasks_per_iteration = std::min(c.tasks_per_iteration, tasks.size());
            pts = meta_train(pts, data, tasks, meta);
        }
    }
    const fs::path final_path = fs::path(a.out) / "final.phgs";
    fs::create_directories(a.out);
    save_checkpoint(pts, final_path);
    std::cout << "wrote " << final_path.string() << " (" << pts.size() << " points)\n";
}

// ---- render / relight ------------------------------------------------------

void run_render(const std::string& checkpoint, const ViewOptions& view, const std::string& light,
                const std::string& out) {
    const auto pts = load_checkpoint(checkpoint);
    const Camera cam = view.camera();
    PointLight l;
    l.position = light.empty() ? cam.center() : parse_vec3(light, "--light");
    const FrameBuffers fb = render(pts, cam, l, view.render());
    fs::create_directories(out);
    write_buffers(out, fb, view.srgb);
    std::cout << "wrote buffers to " << out << '\n';
}

struct RelightArgs {
    std::string checkpoint;
    std::vector<std::string> lights;
    int orbit = 0;
    double orbit_radius = 2.0;
    double orbit_height = 1.0;
    std::string out = "relight";
};

void run_relight(const RelightArgs& a, const ViewOptions& view) {
    std::vector<Vec3d> positions;
    for (const auto& s : a.lights) positions.push_back(parse_vec3(s, "--light"));
    for (int i = 0; i < a.orbit; ++i) {
        const double phi = 2.0 * std::numbers::pi * i / a.orbit;
        positions.push_back({a.orbit_radius * std::cos(phi), a.orbit_radius * std::sin(phi), a.orbit_height});
    }
    if (positions.empty()) throw std::invalid_argument("relight needs --light or --orbit");
    const auto pts = load_checkpoint(a.checkpoint);
    const Camera cam = view.camera();
    const RenderOptions opts = view.render();
    for (std::size_t i = 0; i < positions.size(); ++i) {
        PointLight l;
        l.position = positions[i];
        l.validate();
        char name[32];
        std::snprintf(name, sizeof name, "light_%04zu.png", i);
        write_image(fs::path(a.out) / name, render(pts, cam, l, opts).composite, view.srgb);
    }
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string report = "report.json";
    std::string side_by_side;
    std::string mode = "shadowed";
    std::string background = "0,0,0";
    double shininess = kDefaultShininess;
    bool srgb = false;
};

void run_eval(const EvalArgs& a) {
    const auto pts = load_checkpoint(a.checkpoint);
    const Dataset data = load_dataset(resolve_split(a.data, "test"), a.srgb);
    EvalOptions o;
    o.render.mode = parse_mode(a.mode);
    o.render.background = parse_vec3(a.background, "--background");
    o.render.shininess = a.shininess;
    o.side_by_side_dir = a.side_by_side;
    o.srgb = a.srgb;
    const EvalReport rep = evaluate(pts, data, o);
    rep.write_json(a.report);
    for (const auto& [split, m] : rep.means) {
        std::printf("%-6s %3zu images  PSNR %.2f dB  SSIM %.4f\n", split.c_str(), m.count, m.psnr, m.ssim);
    }
    std::cout << "wrote " << a.report << '\n';
}

// ---- gradcheck -------------------------------------------------------------

struct GradcheckArgs {
    std::size_t points = 5;
    int size = 16;
    double epsilon = 1e-6;
    std::size_t samples = 100;
    double tolerance = 1e-4;
    std::uint64_t seed = 0;
};

bool run_gradcheck(const GradcheckArgs& a) {
    const MicroScene m = make_micro_scene(a.points, a.seed, a.size);
    const Bvh bvh = build_bvh(std::span<const double>(m.params));
    double worst = 0.0;
    for (LossKind kind : {LossKind::Stage1, LossKind::Stage2, LossKind::Phong, LossKind::Shadow}) {
        StageContext ctx;
        ctx.capture = &m.capture;
        ctx.kind = kind;
        ctx.bvh = &bvh;
        const StageObjective loss(ctx);
        const auto r = finite_diff_check(loss, m.params, a.epsilon, a.samples, a.seed);
        std::printf("%-8s max rel err %.3g over %zu coordinates (%zu kinks skipped)\n", loss_kind_name(kind),
                    r.max_rel_error, r.checked, r.flagged.size());
        worst = std::max(worst, r.max_rel_error);
    }
    const bool ok = worst < a.tolerance;
    std::printf("max relative error %.3g: %s (threshold %g)\n", worst, ok ? "pass" : "FAIL", a.tolerance);
    return ok;
}

// ---- config files ----------------------------------------------------------

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// `key = value` lines become `--key=value` with underscores turned into dashes.
// Lines after a `[name]` header only apply to that subcommand.
std::vector<std::string> config_arguments(const fs::path& path, const std::string& subcommand) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file " + path.string());
    std::vector<std::string> out;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        if (!section.empty() && section != subcommand) continue;
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        for (char& ch : key)
            if (ch == '_') ch = '-';
        out.push_back("--" + key + "=" + value);
    }
    return out;
}

// Splices config file values in front of the command line so flags win.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string subcommand;
    std::size_t sub_at = args.size();
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (!args[i].empty() && args[i][0] != '-') {
            subcommand = args[i];
            sub_at = i;
            break;
        }
    }
    std::vector<std::string> file_args;
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
        if (!path.empty()) {
            const auto more = config_arguments(path, subcommand);
            file_args.insert(file_args.end(), more.begin(), more.end());
        }
    }
    if (sub_at < args.size()) args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_at) + 1, file_args.begin(), file_args.end());
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Relightable Gaussian splatting with Phong shading and meta-learned shadows"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string config_file;
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_file,
                        "key = value file; keys are flag names, [subcommand] sections scope them, flags override");
    };

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate an OLAT dataset from an analytic scene");
    s->add_option("--scene", synth.scene, "Scene: sphere or sphere_plane");
    s->add_option("--out", synth.out, "Output directory (train/, test/, init.phgs)")->required();
    s->add_option("--n", synth.n, "Training captures")->check(CLI::PositiveNumber);
    s->add_option("--n-test", synth.n_test, "In-distribution test captures");
    s->add_option("--n-ood", synth.n_ood, "Out-of-distribution test captures");
    s->add_option("--ood-normal", synth.ood_normal, "Plane normal x,y,z; training lights lie on its positive side");
    s->add_option("--size", synth.size, "Image width and height")->check(CLI::PositiveNumber);
    s->add_option("--camera-radius", synth.camera_radius, "Camera sphere radius")->check(CLI::PositiveNumber);
    s->add_option("--light-radius", synth.light_radius, "Light sphere radius")->check(CLI::PositiveNumber);
    s->add_option("--min-camera-elevation", synth.min_camera_elevation, "Lower bound on camera direction z");
    s->add_option("--min-light-elevation", synth.min_light_elevation, "Lower bound on light direction z");
    s->add_option("--points", synth.points, "Initial Gaussians sampled on the surfaces")->check(CLI::PositiveNumber);
    s->add_option("--seed", synth.seed, "Random seed");
    add_config(s);

    TrainArgs train;
    TrainConfig& tc = train.config;
    tc.checkpoint_interval = 1000;
    tc.lr.spatial_scale = 0.0;  // 0 = camera extent of the dataset
    auto* t = app.add_subcommand("train", "Train stages 1 to 3, or a single stage");
    t->add_option("--data", train.data, "Dataset directory (or its parent with train/)")->required();
    t->add_option("--init", train.init, "Initial checkpoint (default <data>/init.phgs)");
    t->add_option("--out", train.out, "Output directory for checkpoints");
    t->add_option("--iters", train.iters, "Iterations of stages 1,2,3");
    t->add_option("--stage", train.stage, "Run one stage only (0 = all)")->check(CLI::Range(0, 3));
    add_switch(t, "--srgb", train.srgb, "Decode dataset PNGs as sRGB");
    add_switch(t, "--quiet", train.quiet, "No progress log");
    add_switch(t, "--first-order", tc.first_order, "Drop second-order terms of the meta-gradient");
    add_switch(t, "--densify", tc.densify.enabled, "Enable clone and prune");
    t->add_option("--background", train.background, "Background color r,g,b");
    t->add_option("--shininess", tc.render.shininess, "Specular exponent")->check(CLI::PositiveNumber);
    t->add_option("--seed", tc.seed, "Random seed");
    t->add_option("--tasks-per-iteration", tc.tasks_per_iteration, "Tasks sampled per meta-iteration (m)");
    t->add_option("--num-tasks", tc.num_tasks, "Light clusters");
    t->add_option("--support-fraction", tc.support_fraction, "Share of each task used as support");
    t->add_option("--inner-lr-phong", tc.inner_lr_phong, "Inner step size on the Phong loss");
    t->add_option("--inner-lr-shadow", tc.inner_lr_shadow, "Inner step size on the shadow loss");
    add_switch(t, "--shadows,!--no-shadows", tc.shadows, "Shadowed stage 3 (off = ablation)");
    t->add_option("--lr-position-init", tc.lr.position_init, "Initial position rate");
    t->add_option("--lr-position-final", tc.lr.position_final, "Final position rate");
    t->add_option("--lr-opacity", tc.lr.opacity, "Opacity rate");
    t->add_option("--lr-scale", tc.lr.scale, "Scale rate");
    t->add_option("--lr-rotation", tc.lr.rotation, "Rotation rate");
    t->add_option("--lr-color", tc.lr.color, "Color, specular and normal residual rate");
    t->add_option("--lr-shadow", tc.lr.shadow, "Shadow coefficient rate");
    t->add_option("--spatial-scale", tc.lr.spatial_scale, "Position rate multiplier (0 = camera extent)");
    t->add_option("--w-dssim", tc.weights.dssim, "D-SSIM weight in the RGB loss");
    t->add_option("--w-normal-pred", tc.weights.normal_pred, "Normal prediction weight");
    t->add_option("--w-normal-residual", tc.weights.normal_residual, "Normal residual weight");
    t->add_option("--w-scale", tc.weights.scale, "Scale loss weight");
    t->add_option("--w-opacity", tc.weights.opacity, "Opacity sparsity weight");
    t->add_option("--w-visibility", tc.weights.visibility, "Visibility sparsity weight");
    t->add_option("--w-smooth", tc.weights.smooth, "Smoothness weight");
    t->add_option("--w-diffuse-start", tc.weights.diffuse_start, "Diffuse prior weight at the start");
    t->add_option("--w-diffuse-end", tc.weights.diffuse_end, "Diffuse prior weight after the horizon");
    t->add_option("--w-diffuse-horizon", tc.weights.diffuse_horizon, "Diffuse prior decay length");
    t->add_option("--densify-interval", tc.densify.interval, "Iterations between densify steps");
    t->add_option("--prune-opacity", tc.densify.prune_opacity, "Prune below this opacity");
    t->add_option("--clone-gradient", tc.densify.clone_gradient, "Clone above this positional gradient");
    t->add_option("--bvh-rebuild-interval", tc.bvh_rebuild_interval, "Iterations between BVH rebuilds");
    t->add_option("--log-interval", tc.log_interval, "Iterations between log lines");
    t->add_option("--checkpoint-interval", tc.checkpoint_interval, "Iterations between checkpoints");
    add_config(t);

    std::string render_ckpt, render_light, render_out = "render";
    ViewOptions render_view;
    auto* r = app.add_subcommand("render", "Render a checkpoint from one camera");
    r->add_option("--checkpoint", render_ckpt, "Checkpoint file")->required();
    r->add_option("--light", render_light, "Light position x,y,z (default: at the camera)");
    r->add_option("--out", render_out, "Output directory for the buffers");
    render_view.add(r);
    add_config(r);

    RelightArgs relight;
    ViewOptions relight_view;
    auto* rl = app.add_subcommand("relight", "Render a checkpoint under new lights");
    rl->add_option("--checkpoint", relight.checkpoint, "Checkpoint file")->required();
    rl->add_option("--light", relight.lights, "Light position x,y,z (repeatable)")->multi_option_policy(
        CLI::MultiOptionPolicy::TakeAll);
    rl->add_option("--orbit", relight.orbit, "Add this many lights on a horizontal circle")->check(CLI::NonNegativeNumber);
    rl->add_option("--orbit-radius", relight.orbit_radius, "Orbit radius")->check(CLI::PositiveNumber);
    rl->add_option("--orbit-height", relight.orbit_height, "Orbit height");
    rl->add_option("--out", relight.out, "Output directory");
    relight_view.add(rl);
    add_config(rl);

    EvalArgs eval;
    auto* e = app.add_subcommand("eval", "Score a checkpoint on a test dataset");
    e->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
    e->add_option("--data", eval.data, "Dataset directory (or its parent with test/)")->required();
    e->add_option("--report", eval.report, "JSON report path");
    e->add_option("--side-by-side", eval.side_by_side, "Directory for comparison PNGs");
    e->add_option("--mode", eval.mode, "Shading: ambient, unshadowed or shadowed");
    e->add_option("--background", eval.background, "Background color r,g,b");
    e->add_option("--shininess", eval.shininess, "Specular exponent")->check(CLI::PositiveNumber);
    add_switch(e, "--srgb", eval.srgb, "Treat PNGs as sRGB");
    add_config(e);

    GradcheckArgs gc;
    auto* g = app.add_subcommand("gradcheck", "Finite-difference check of every stage loss on a micro-scene");
    g->add_option("--points", gc.points, "Gaussians in the micro-scene")->check(CLI::PositiveNumber);
    g->add_option("--size", gc.size, "Image size")->check(CLI::PositiveNumber);
    g->add_option("--epsilon", gc.epsilon, "Central difference step")->check(CLI::PositiveNumber);
    g->add_option("--samples", gc.samples, "Coordinates checked per loss")->check(CLI::PositiveNumber);
    g->add_option("--tolerance", gc.tolerance, "Maximum relative error")->check(CLI::PositiveNumber);
    g->add_option("--seed", gc.seed, "Random seed");
    add_config(g);

    if (argc > 1 && argv[1][0] != '-') {
        const std::string name = argv[1];
        const auto subs = app.get_subcommands([](const CLI::App*) { return true; });
        if (std::none_of(subs.begin(), subs.end(), [&](const CLI::App* a) { return a->get_name() == name; })) {
            std::cerr << "error: unknown subcommand '" << name << "' (expected synth, train, render, relight, eval or gradcheck)\n";
            return 2;
        }
    }
    try {
        std::vector<std::string> args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& err) {
        return app.exit(err);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    }

    try {
        if (*s) run_synth(synth);
        else if (*t) run_train(train);
        else if (*r) run_render(render_ckpt, render_view, render_light, render_out);
        else if (*rl) run_relight(relight, relight_view);
        else if (*e) run_eval(eval);
        else if (*g) return run_gradcheck(gc) ? 0 : 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
    return 0;
}
