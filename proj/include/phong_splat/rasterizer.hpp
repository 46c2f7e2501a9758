#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "phong_splat/gaussian_ops.hpp"
#include "phong_splat/image.hpp"
#include "phong_splat/parallel.hpp"
#include "phong_splat/scene.hpp"

namespace phong_splat {

inline constexpr int kTileSize = 16;
inline constexpr double kAlphaMax = 0.999;
inline constexpr double kAlphaMin = 1.0 / 255.0;
inline constexpr double kCutoffPower = 9.0;  // 3 sigma
inline constexpr double kValidAlpha = 0.05;

// Blended per-splat features: ambient, diffuse, specular (RGB each) and the
// camera-space shading normal.
inline constexpr int kBlendFeatures = 12;
// Differentiable inputs per splat: mean (2), conic (3), opacity, features.
inline constexpr int kSplatInputs = 6 + kBlendFeatures;

template <class T>
struct BlendSplat {
    std::array<T, 2> mean{};
    std::array<T, 3> conic{};  // inverse of the dilated screen covariance, (00, 01, 11)
    T opacity{};
    std::array<T, kBlendFeatures> feature{};
    double depth = 0.0;
    std::uint32_t id = 0;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // pixel bounds of the 3 sigma ellipse, half-open
};

// Pixel bounds from the dilated covariance (00, 01, 11); false when off-screen.
bool splat_bounds(const std::array<double, 2>& mean, const std::array<double, 3>& dilated_cov, int width, int height,
                  int& x0, int& y0, int& x1, int& y1);

template <class T>
struct BlendResult {
    int width = 0;
    int height = 0;
    std::vector<T> features;            // H*W*kBlendFeatures
    std::vector<T> alpha;               // H*W, sum of T_i alpha_i
    std::vector<double> depth_sum;      // H*W, sum of T_i alpha_i z_i
    std::vector<double> transmittance;  // H*W, final T
};

// Front-to-back order: ascending depth, ties by point id.
template <class T>
void sort_splats(std::vector<BlendSplat<T>>& splats) {
    std::stable_sort(splats.begin(), splats.end(), [](const BlendSplat<T>& a, const BlendSplat<T>& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.id < b.id;
    });
}

namespace detail {

struct TileBins {
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::vector<std::uint32_t>> lists;  // per tile, sorted splat indices
};

template <class T>
TileBins bin_splats(const std::vector<BlendSplat<T>>& splats, int width, int height) {
    TileBins bins;
    bins.tiles_x = (width + kTileSize - 1) / kTileSize;
    bins.tiles_y = (height + kTileSize - 1) / kTileSize;
    bins.lists.resize(static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y);
    for (std::size_t i = 0; i < splats.size(); ++i) {
        const auto& s = splats[i];
        if (s.x1 <= s.x0 || s.y1 <= s.y0) continue;
        for (int ty = s.y0 / kTileSize; ty <= (s.y1 - 1) / kTileSize; ++ty) {
            for (int tx = s.x0 / kTileSize; tx <= (s.x1 - 1) / kTileSize; ++tx) {
                bins.lists[static_cast<std::size_t>(ty) * bins.tiles_x + tx].push_back(static_cast<std::uint32_t>(i));
            }
        }
    }
    return bins;
}

template <class T>
struct Sample {
    std::uint32_t splat;
    T alpha;
    T gauss;
    T dx, dy;
    bool clamped;
};

// Evaluates splat s at pixel center (px, py); false when it does not contribute.
template <class T>
bool evaluate_splat(const BlendSplat<T>& s, int x, int y, Sample<T>& out) {
    using std::exp;
    if (x < s.x0 || x >= s.x1 || y < s.y0 || y >= s.y1) return false;
    const T dx = T(x + 0.5) - s.mean[0];
    const T dy = T(y + 0.5) - s.mean[1];
    const T power = s.conic[0] * dx * dx + T(2.0) * s.conic[1] * dx * dy + s.conic[2] * dy * dy;
    if (primal(power) > kCutoffPower) return false;
    const T g = exp(T(-0.5) * power);
    T a = s.opacity * g;
    if (primal(a) < kAlphaMin) return false;
    out.clamped = primal(a) > kAlphaMax;
    if (out.clamped) a = T(kAlphaMax);
    out.alpha = a;
    out.gauss = g;
    out.dx = dx;
    out.dy = dy;
    return true;
}

inline std::size_t chunk_count(std::size_t tiles) { return std::min<std::size_t>(tiles, 16); }

}  // namespace detail

// Alpha-blends sorted splats over the image. Every pixel composites all its
// contributors; there is no early termination.
template <class T>
BlendResult<T> blend_forward(const std::vector<BlendSplat<T>>& splats, int width, int height) {
    BlendResult<T> out;
    out.width = width;
    out.height = height;
    const std::size_t pixels = static_cast<std::size_t>(width) * height;
    out.features.assign(pixels * kBlendFeatures, T(0.0));
    out.alpha.assign(pixels, T(0.0));
    out.depth_sum.assign(pixels, 0.0);
    out.transmittance.assign(pixels, 1.0);
    const detail::TileBins bins = detail::bin_splats(splats, width, height);

    parallel_for(bins.lists.size(), [&](std::size_t tile) {
        const auto& list = bins.lists[tile];
        const int tx = static_cast<int>(tile) % bins.tiles_x;
        const int ty = static_cast<int>(tile) / bins.tiles_x;
        const int xe = std::min(width, (tx + 1) * kTileSize);
        const int ye = std::min(height, (ty + 1) * kTileSize);
        detail::Sample<T> smp;
        for (int y = ty * kTileSize; y < ye; ++y) {
            for (int x = tx * kTileSize; x < xe; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * width + x;
                T trans(1.0);
                T acc_a(0.0);
                double acc_z = 0.0;
                T* f = &out.features[p * kBlendFeatures];
                for (std::uint32_t idx : list) {
                    const auto& s = splats[idx];
                    if (!detail::evaluate_splat(s, x, y, smp)) continue;
                    const T w = trans * smp.alpha;
                    for (int k = 0; k < kBlendFeatures; ++k) f[k] += w * s.feature[k];
                    acc_a += w;
                    acc_z += primal(w) * s.depth;
                    trans *= T(1.0) - smp.alpha;
                }
                out.alpha[p] = acc_a;
                out.depth_sum[p] = acc_z;
                out.transmittance[p] = primal(trans);
            }
        }
    });
    return out;
}

// Reverse pass of blend_forward. `d_features` and `d_alpha` are the upstream
// adjoints of the outputs; returns per-splat adjoints of the kSplatInputs
// inputs. Accumulation runs over a fixed number of tile chunks, summed in
// order, so the result does not depend on the worker count.
template <class T>
std::vector<std::array<T, kSplatInputs>> blend_backward(const std::vector<BlendSplat<T>>& splats, int width,
                                                        int height, std::span<const T> d_features,
                                                        std::span<const T> d_alpha) {
    const detail::TileBins bins = detail::bin_splats(splats, width, height);
    const std::size_t tiles = bins.lists.size();
    const std::size_t chunks = detail::chunk_count(tiles);
    std::vector<std::vector<std::array<T, kSplatInputs>>> partial(chunks);

    parallel_for(chunks, [&](std::size_t chunk) {
        auto& grads = partial[chunk];
        grads.assign(splats.size(), {});
        for (auto& g : grads) g.fill(T(0.0));
        std::vector<detail::Sample<T>> samples;
        std::vector<T> before;  // transmittance in front of each sample
        const std::size_t tile_begin = chunk * tiles / chunks;
        const std::size_t tile_end = (chunk + 1) * tiles / chunks;
        for (std::size_t tile = tile_begin; tile < tile_end; ++tile) {
            const auto& list = bins.lists[tile];
            if (list.empty()) continue;
            const int tx = static_cast<int>(tile) % bins.tiles_x;
            const int ty = static_cast<int>(tile) / bins.tiles_x;
            const int xe = std::min(width, (tx + 1) * kTileSize);
            const int ye = std::min(height, (ty + 1) * kTileSize);
            for (int y = ty * kTileSize; y < ye; ++y) {
                for (int x = tx * kTileSize; x < xe; ++x) {
                    const std::size_t p = static_cast<std::size_t>(y) * width + x;
                    const T* gf = &d_features[p * kBlendFeatures];
                    const T ga = d_alpha[p];
                    bool any = !is_zero(ga);
                    for (int k = 0; k < kBlendFeatures && !any; ++k) any = !is_zero(gf[k]);
                    if (!any) continue;

                    samples.clear();
                    before.clear();
                    T trans(1.0);
                    detail::Sample<T> smp;
                    for (std::uint32_t idx : list) {
                        if (!detail::evaluate_splat(splats[idx], x, y, smp)) continue;
                        smp.splat = idx;
                        samples.push_back(smp);
                        before.push_back(trans);
                        trans *= T(1.0) - smp.alpha;
                    }

                    std::array<T, kBlendFeatures> behind{};
                    behind.fill(T(0.0));
                    T behind_a(0.0);
                    for (std::size_t i = samples.size(); i-- > 0;) {
                        const auto& sm = samples[i];
                        const auto& s = splats[sm.splat];
                        auto& g = grads[sm.splat];
                        const T ti = before[i];
                        const T w = ti * sm.alpha;
                        T d_a = ga * ti * (T(1.0) - behind_a);
                        for (int k = 0; k < kBlendFeatures; ++k) {
                            g[6 + k] += w * gf[k];
                            d_a += gf[k] * ti * (s.feature[k] - behind[k]);
                            behind[k] = sm.alpha * s.feature[k] + (T(1.0) - sm.alpha) * behind[k];
                        }
                        behind_a = sm.alpha + (T(1.0) - sm.alpha) * behind_a;
                        if (sm.clamped) continue;
                        g[5] += d_a * sm.gauss;
                        const T d_power = T(-0.5) * d_a * sm.alpha;
                        g[2] += d_power * sm.dx * sm.dx;
                        g[3] += d_power * T(2.0) * sm.dx * sm.dy;
                        g[4] += d_power * sm.dy * sm.dy;
                        g[0] += d_power * T(-2.0) * (s.conic[0] * sm.dx + s.conic[1] * sm.dy);
                        g[1] += d_power * T(-2.0) * (s.conic[1] * sm.dx + s.conic[2] * sm.dy);
                    }
                }
            }
        }
    });

    std::vector<std::array<T, kSplatInputs>> total(splats.size());
    for (auto& g : total) g.fill(T(0.0));
    for (const auto& part : partial) {
        for (std::size_t i = 0; i < splats.size(); ++i) {
            for (int k = 0; k < kSplatInputs; ++k) total[i][k] += part[i][k];
        }
    }
    return total;
}

struct FrameBuffers {
    Image composite;
    Image ambient;
    Image diffuse;
    Image specular;
    Image normal;         // camera space, blended like colors
    Image depth;          // expected depth, one channel
    Image alpha;          // accumulated alpha, one channel
    Image transmittance;  // final transmittance, one channel
};

// Per-splat shading consumed by the rasterizer; normal is in camera space.
struct SplatShading {
    Vec3d ambient;
    Vec3d diffuse;
    Vec3d specular;
    Vec3d normal;
};

FrameBuffers rasterize(std::span<const Splat2D> splats, std::span<const SplatShading> shading, const Camera& camera,
                       const Vec3d& background = {});

// Plain-color variant: colors go to the ambient buffer, normals are zero.
FrameBuffers rasterize(std::span<const Splat2D> splats, std::span<const Vec3d> colors, const Camera& camera,
                       const Vec3d& background = {});

// Assembles buffers from a blend result; composite = ambient + diffuse +
// specular + (1 - A) * background.
FrameBuffers assemble_buffers(const BlendResult<double>& blend, const Vec3d& background);

struct PseudoNormals {
    Image normal;              // camera space, unit; zero where invalid
    std::vector<bool> valid;   // H*W
};

// Normals from screen-space differences of the back-projected depth map,
// oriented toward the camera. Pixels with alpha <= 0.05 are invalid.
PseudoNormals depth_to_pseudo_normal(const Image& depth, const Image& alpha, const Camera& camera);

// Writes composite/ambient/diffuse/specular/normal PNGs and a depth PFM into `dir`.
void write_buffers(const std::filesystem::path& dir, const FrameBuffers& buffers, bool srgb = false);

}  // namespace phong_splat
