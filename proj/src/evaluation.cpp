#include "phong_splat/evaluation.hpp"

#include <chrono>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "phong_splat/metrics.hpp"
#include "phong_splat/visibility.hpp"

namespace phong_splat {

namespace {

Image side_by_side(const Image& a, const Image& b) {
    Image out(a.width * 2, a.height, a.channels);
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            for (int c = 0; c < a.channels; ++c) {
                out.at(x, y, c) = a.at(x, y, c);
                out.at(a.width + x, y, c) = b.at(x, y, c);
            }
        }
    }
    return out;
}

}  // namespace

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["per_image"] = nlohmann::ordered_json::array();
    for (const ImageScore& s : per_image) {
        j["per_image"].push_back({{"index", s.index}, {"split", s.split}, {"psnr", s.psnr}, {"ssim", s.ssim}});
    }
    j["means"] = nlohmann::ordered_json::object();
    for (const auto& [split, m] : means) j["means"][split] = {{"psnr", m.psnr}, {"ssim", m.ssim}, {"count", m.count}};
    j["wallclock_s"] = wallclock_s;
    return j.dump(2);
}

void EvalReport::write_json(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << to_json() << '\n';
}

EvalReport score_images(const std::vector<Image>& rendered, const Dataset& dataset) {
    if (rendered.size() != dataset.size()) throw std::invalid_argument("score_images: image count mismatch");
    EvalReport report;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        const OLATCapture& c = dataset.captures[i];
        ImageScore s;
        s.index = i;
        s.split = c.split.empty() ? "test" : c.split;
        s.psnr = psnr(rendered[i], c.image);
        s.ssim = ssim(rendered[i], c.image);
        report.per_image.push_back(s);
        SplitMean& m = report.means[s.split];
        m.psnr += s.psnr;
        m.ssim += s.ssim;
        ++m.count;
    }
    for (auto& [split, m] : report.means) {
        m.psnr /= static_cast<double>(m.count);
        m.ssim /= static_cast<double>(m.count);
    }
    return report;
}

EvalReport evaluate(const std::vector<GaussianPoint>& points, const Dataset& dataset, const EvalOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const ParamSet params(points);
    const Bvh bvh = build_bvh(params.values());
    std::vector<Image> rendered;
    rendered.reserve(dataset.size());
    for (const OLATCapture& c : dataset.captures) {
        rendered.push_back(render(params.values(), c.camera, c.light, options.render, &bvh).composite);
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EvalReport report = score_images(rendered, dataset);
    report.wallclock_s = elapsed;
    if (!options.side_by_side_dir.empty()) {
        std::filesystem::create_directories(options.side_by_side_dir);
        for (std::size_t i = 0; i < rendered.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "compare_%04zu.png", i);
            write_png(options.side_by_side_dir / name, side_by_side(rendered[i], dataset.captures[i].image),
                      options.srgb);
        }
    }
    return report;
}

}  // namespace phong_splat
