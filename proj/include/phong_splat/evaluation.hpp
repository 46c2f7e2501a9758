#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "phong_splat/render.hpp"
#include "phong_splat/scene.hpp"

namespace phong_splat {

struct ImageScore {
    std::size_t index = 0;
    std::string split;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct SplitMean {
    double psnr = 0.0;
    double ssim = 0.0;
    std::size_t count = 0;
};

struct EvalReport {
    std::vector<ImageScore> per_image;
    std::map<std::string, SplitMean> means;
    double wallclock_s = 0.0;

    std::string to_json() const;
    void write_json(const std::filesystem::path& path) const;
};

struct EvalOptions {
    RenderOptions render;                  // mode Shadowed by default
    std::filesystem::path side_by_side_dir;  // empty disables the comparison PNGs
    bool srgb = false;
};

// Scores pre-rendered images against the captures, split by capture label
// (an empty label counts as "test").
EvalReport score_images(const std::vector<Image>& rendered, const Dataset& dataset);

// Renders every capture of `dataset` from `points` and scores it.
EvalReport evaluate(const std::vector<GaussianPoint>& points, const Dataset& dataset, const EvalOptions& options = {});

}  // namespace phong_splat
