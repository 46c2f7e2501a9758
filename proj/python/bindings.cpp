#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <array>
#include <string>
#include <vector>

#include "phong_splat/checkpoint.hpp"
#include "phong_splat/dataset_io.hpp"
#include "phong_splat/evaluation.hpp"
#include "phong_splat/metrics.hpp"
#include "phong_splat/objectives.hpp"
#include "phong_splat/oracle.hpp"
#include "phong_splat/trainer.hpp"

namespace py = pybind11;
using namespace phong_splat;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Vec3d vec(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }
std::array<double, 3> arr(const Vec3d& v) { return {v.x, v.y, v.z}; }

Array to_numpy(const Image& img) {
    std::vector<py::ssize_t> shape{img.height, img.width};
    if (img.channels > 1) shape.push_back(img.channels);
    Array out(shape);
    std::copy(img.data.begin(), img.data.end(), out.mutable_data());
    return out;
}

Image from_numpy(const Array& a) {
    if (a.ndim() != 2 && a.ndim() != 3) throw std::invalid_argument("image must have shape (H, W) or (H, W, C)");
    Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1);
    std::copy(a.data(), a.data() + a.size(), img.data.begin());
    return img;
}

ShadingMode parse_mode(const std::string& name) {
    if (name == "ambient") return ShadingMode::AmbientOnly;
    if (name == "unshadowed") return ShadingMode::Unshadowed;
    if (name == "shadowed") return ShadingMode::Shadowed;
    throw std::invalid_argument("mode must be 'ambient', 'unshadowed' or 'shadowed'");
}

Array points_to_array(const std::vector<GaussianPoint>& pts) {
    Array out({static_cast<py::ssize_t>(pts.size()), static_cast<py::ssize_t>(kParamsPerPoint)});
    double* p = out.mutable_data();
    for (const auto& g : pts)
        for (float v : g.flatten()) *p++ = v;
    return out;
}

std::vector<GaussianPoint> points_from_array(const Array& a) {
    if (a.ndim() != 2 || a.shape(1) != static_cast<py::ssize_t>(kParamsPerPoint)) {
        throw std::invalid_argument("points must have shape (N, " + std::to_string(kParamsPerPoint) + ")");
    }
    std::vector<GaussianPoint> pts;
    std::array<float, kParamsPerPoint> row{};
    for (py::ssize_t i = 0; i < a.shape(0); ++i) {
        for (std::size_t k = 0; k < kParamsPerPoint; ++k) row[k] = static_cast<float>(a.at(i, static_cast<py::ssize_t>(k)));
        pts.push_back(GaussianPoint::unflatten(row));
    }
    return pts;
}

py::dict buffers_to_dict(const FrameBuffers& fb) {
    py::dict d;
    d["composite"] = to_numpy(fb.composite);
    d["ambient"] = to_numpy(fb.ambient);
    d["diffuse"] = to_numpy(fb.diffuse);
    d["specular"] = to_numpy(fb.specular);
    d["normal"] = to_numpy(fb.normal);
    d["depth"] = to_numpy(fb.depth);
    d["alpha"] = to_numpy(fb.alpha);
    d["transmittance"] = to_numpy(fb.transmittance);
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Relightable Gaussian splatting with Phong shading and meta-learned shadows";
    m.attr("PARAMS_PER_POINT") = kParamsPerPoint;

    py::class_<Camera>(m, "Camera")
        .def_static(
            "look_at",
            [](std::array<double, 3> eye, std::array<double, 3> target, std::array<double, 3> up, double focal,
               int width, int height) { return Camera::look_at(vec(eye), vec(target), vec(up), focal, width, height); },
            py::arg("eye"), py::arg("target") = std::array<double, 3>{0, 0, 0},
            py::arg("up") = std::array<double, 3>{0, 0, 1}, py::arg("focal"), py::arg("width"), py::arg("height"))
        .def_property_readonly("center", [](const Camera& c) { return arr(c.center()); })
        .def_readonly("width", &Camera::width)
        .def_readonly("height", &Camera::height)
        .def_readonly("fx", &Camera::fx)
        .def_readonly("fy", &Camera::fy);

    py::class_<PointLight>(m, "PointLight")
        .def(py::init([](std::array<double, 3> position, std::array<double, 3> color) {
                 PointLight l;
                 l.position = vec(position);
                 l.color = vec(color);
                 l.validate();
                 return l;
             }),
             py::arg("position"), py::arg("color") = std::array<double, 3>{1, 1, 1})
        .def_property_readonly("position", [](const PointLight& l) { return arr(l.position); })
        .def_property_readonly("color", [](const PointLight& l) { return arr(l.color); });

    py::class_<OLATCapture>(m, "Capture")
        .def_property_readonly("image", [](const OLATCapture& c) { return to_numpy(c.image); })
        .def_readonly("camera", &OLATCapture::camera)
        .def_readonly("light", &OLATCapture::light)
        .def_readonly("split", &OLATCapture::split);

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("name", &Dataset::name)
        .def_readonly("captures", &Dataset::captures)
        .def("__len__", &Dataset::size);

    m.def("load_dataset", &load_dataset, py::arg("path"), py::arg("srgb") = false);
    m.def("save_dataset", &save_dataset, py::arg("path"), py::arg("dataset"));

    m.def(
        "generate_olat_dataset",
        [](const std::string& scene, std::size_t n_train, std::size_t n_test, std::size_t n_ood, int size,
           double camera_radius, double light_radius, std::optional<std::array<double, 3>> ood_normal,
           std::uint64_t seed) {
            OlatOptions o;
            o.train_count = n_train;
            o.test_count = n_test;
            o.ood_count = n_ood;
            o.width = size;
            o.height = size;
            o.camera_radius = camera_radius;
            o.light_radius = light_radius;
            if (ood_normal) o.ood_normal = vec(*ood_normal);
            o.seed = seed;
            const OlatSplit s = generate_olat_dataset(make_scene(scene), o);
            return py::make_tuple(s.train, s.test);
        },
        py::arg("scene") = "sphere", py::arg("n_train") = 32, py::arg("n_test") = 8, py::arg("n_ood") = 0,
        py::arg("size") = 64, py::arg("camera_radius") = 1.3, py::arg("light_radius") = 0.8,
        py::arg("ood_normal") = py::none(), py::arg("seed") = 0,
        "Renders an analytic scene under point lights; returns (train, test) datasets.");

    m.def(
        "initial_points",
        [](const std::string& scene, std::size_t count, std::uint64_t seed) {
            return points_to_array(sample_initial_points(make_scene(scene), count, seed));
        },
        py::arg("scene"), py::arg("count"), py::arg("seed") = 0,
        "Surfels sampled on an analytic scene, as an (N, 25) array.");

    m.def(
        "load_checkpoint", [](const std::filesystem::path& p) { return points_to_array(load_checkpoint(p)); },
        py::arg("path"));
    m.def(
        "save_checkpoint",
        [](const Array& points, const std::filesystem::path& p) { save_checkpoint(points_from_array(points), p); },
        py::arg("points"), py::arg("path"));

    m.def(
        "render",
        [](const Array& points, const Camera& camera, const PointLight& light, const std::string& mode,
           double shininess, std::array<double, 3> background) {
            RenderOptions o;
            o.mode = parse_mode(mode);
            o.shininess = shininess;
            o.background = vec(background);
            const auto pts = points_from_array(points);
            FrameBuffers fb;
            {
                py::gil_scoped_release release;
                fb = render(pts, camera, light, o);
            }
            return buffers_to_dict(fb);
        },
        py::arg("points"), py::arg("camera"), py::arg("light"), py::arg("mode") = "shadowed",
        py::arg("shininess") = kDefaultShininess, py::arg("background") = std::array<double, 3>{0, 0, 0},
        "Renders every buffer; returns a dict of arrays.");

    m.def(
        "light_transmittance",
        [](const Array& points, const PointLight& light) {
            const auto pts = points_from_array(points);
            const auto t = light_transmittances(build_bvh(pts), make_occluders(pts), light);
            return Array(static_cast<py::ssize_t>(t.size()), t.data());
        },
        py::arg("points"), py::arg("light"), "Per-point transmittance towards the light.");

    m.def(
        "psnr", [](const Array& a, const Array& b) { return psnr(from_numpy(a), from_numpy(b)); }, py::arg("a"),
        py::arg("b"));
    m.def(
        "ssim", [](const Array& a, const Array& b) { return ssim(from_numpy(a), from_numpy(b)); }, py::arg("a"),
        py::arg("b"));

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("stage1_iterations", &TrainConfig::stage1_iterations)
        .def_readwrite("stage2_iterations", &TrainConfig::stage2_iterations)
        .def_readwrite("stage3_iterations", &TrainConfig::stage3_iterations)
        .def_readwrite("tasks_per_iteration", &TrainConfig::tasks_per_iteration)
        .def_readwrite("num_tasks", &TrainConfig::num_tasks)
        .def_readwrite("support_fraction", &TrainConfig::support_fraction)
        .def_readwrite("inner_lr_phong", &TrainConfig::inner_lr_phong)
        .def_readwrite("inner_lr_shadow", &TrainConfig::inner_lr_shadow)
        .def_readwrite("first_order", &TrainConfig::first_order)
        .def_readwrite("shadows", &TrainConfig::shadows)
        .def_readwrite("bvh_rebuild_interval", &TrainConfig::bvh_rebuild_interval)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_property(
            "spatial_scale", [](const TrainConfig& c) { return c.lr.spatial_scale; },
            [](TrainConfig& c, double v) { c.lr.spatial_scale = v; })
        .def_property(
            "densify", [](const TrainConfig& c) { return c.densify.enabled; },
            [](TrainConfig& c, bool v) { c.densify.enabled = v; });

    m.def(
        "train",
        [](const Array& points, const Dataset& dataset, TrainConfig config, bool auto_spatial_scale) {
            auto pts = points_from_array(points);
            if (auto_spatial_scale) config.lr.spatial_scale = camera_extent(dataset);
            {
                py::gil_scoped_release release;
                pts = train_all(pts, dataset, config);
            }
            return points_to_array(pts);
        },
        py::arg("points"), py::arg("dataset"), py::arg("config") = TrainConfig{}, py::arg("auto_spatial_scale") = true,
        "Runs stages 1 to 3. With auto_spatial_scale the position rate follows the camera extent.");

    m.def(
        "evaluate",
        [](const Array& points, const Dataset& dataset, const std::string& mode) {
            EvalOptions o;
            o.render.mode = parse_mode(mode);
            const EvalReport r = evaluate(points_from_array(points), dataset, o);
            py::dict means;
            for (const auto& [split, s] : r.means) {
                py::dict d;
                d["psnr"] = s.psnr;
                d["ssim"] = s.ssim;
                d["count"] = s.count;
                means[py::str(split)] = d;
            }
            py::list per_image;
            for (const auto& s : r.per_image) {
                py::dict d;
                d["index"] = s.index;
                d["split"] = s.split;
                d["psnr"] = s.psnr;
                d["ssim"] = s.ssim;
                per_image.append(d);
            }
            py::dict out;
            out["means"] = means;
            out["per_image"] = per_image;
            return out;
        },
        py::arg("points"), py::arg("dataset"), py::arg("mode") = "shadowed");

    m.def(
        "gradcheck",
        [](std::uint64_t seed, std::size_t points, double epsilon, std::size_t samples) {
            const MicroScene ms = make_micro_scene(points, seed);
            const Bvh bvh = build_bvh(std::span<const double>(ms.params));
            py::dict out;
            for (LossKind kind : {LossKind::Stage1, LossKind::Stage2, LossKind::Phong, LossKind::Shadow}) {
                StageContext ctx;
                ctx.capture = &ms.capture;
                ctx.kind = kind;
                ctx.bvh = &bvh;
                out[loss_kind_name(kind)] = finite_diff_check(StageObjective(ctx), ms.params, epsilon, samples, seed).max_rel_error;
            }
            return out;
        },
        py::arg("seed") = 0, py::arg("points") = 5, py::arg("epsilon") = 1e-6, py::arg("samples") = 100,
        "Max relative finite-difference error of each stage loss on a micro-scene.");
}
