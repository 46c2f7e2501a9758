#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "phong_splat/dual.hpp"
#include "phong_splat/image.hpp"

namespace phong_splat {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 1e-4;
inline constexpr double kSsimC2 = 9e-4;
inline constexpr int kSmoothWindow = 9;

// Normalized 1D Gaussian taps of odd length `size`.
std::vector<double> gaussian_kernel(int size, double sigma);

// Shape of an interleaved image buffer.
struct Extent {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::size_t size() const { return static_cast<std::size_t>(width) * height * channels; }
};

// Separable blur with edge-replicate padding.
template <class T>
std::vector<T> blur(std::span<const T> in, Extent e, std::span<const double> kernel) {
    const int r = static_cast<int>(kernel.size()) / 2;
    const int w = e.width;
    const int h = e.height;
    const std::size_t c = static_cast<std::size_t>(e.channels);
    const std::size_t row = static_cast<std::size_t>(w) * c;
    std::vector<T> tmp(in.size(), T(0.0));
    std::vector<T> out(in.size(), T(0.0));
    std::vector<T> pad((static_cast<std::size_t>(w) + 2 * r) * c);
    for (int y = 0; y < h; ++y) {
        const T* src = in.data() + y * row;
        for (int x = -r; x < w + r; ++x) {
            const T* p = src + static_cast<std::size_t>(std::clamp(x, 0, w - 1)) * c;
            std::copy(p, p + c, pad.begin() + static_cast<std::ptrdiff_t>((x + r) * c));
        }
        T* dst = tmp.data() + y * row;
        for (int k = 0; k <= 2 * r; ++k) {
            const double wk = kernel[k];
            const T* p = pad.data() + k * c;
            for (std::size_t i = 0; i < row; ++i) dst[i] += wk * p[i];
        }
    }
    for (int y = 0; y < h; ++y) {
        T* dst = out.data() + y * row;
        for (int k = -r; k <= r; ++k) {
            const double wk = kernel[k + r];
            const T* p = tmp.data() + std::clamp(y + k, 0, h - 1) * row;
            for (std::size_t i = 0; i < row; ++i) dst[i] += wk * p[i];
        }
    }
    return out;
}

// Adjoint of blur: scatters each output back onto the taps that produced it.
template <class T>
std::vector<T> blur_transpose(std::span<const T> in, Extent e, std::span<const double> kernel) {
    const int r = static_cast<int>(kernel.size()) / 2;
    const int w = e.width;
    const int h = e.height;
    const std::size_t c = static_cast<std::size_t>(e.channels);
    const std::size_t row = static_cast<std::size_t>(w) * c;
    std::vector<T> tmp(in.size(), T(0.0));
    std::vector<T> out(in.size(), T(0.0));
    for (int y = 0; y < h; ++y) {
        const T* src = in.data() + y * row;
        for (int k = -r; k <= r; ++k) {
            const double wk = kernel[k + r];
            T* p = tmp.data() + std::clamp(y + k, 0, h - 1) * row;
            for (std::size_t i = 0; i < row; ++i) p[i] += wk * src[i];
        }
    }
    std::vector<T> pad((static_cast<std::size_t>(w) + 2 * r) * c);
    for (int y = 0; y < h; ++y) {
        std::fill(pad.begin(), pad.end(), T(0.0));
        const T* src = tmp.data() + y * row;
        for (int k = 0; k <= 2 * r; ++k) {
            const double wk = kernel[k];
            T* p = pad.data() + k * c;
            for (std::size_t i = 0; i < row; ++i) p[i] += wk * src[i];
        }
        // Fold the padding back onto the edge pixels it replicated.
        T* dst = out.data() + y * row;
        for (int x = -r; x < w + r; ++x) {
            T* q = dst + static_cast<std::size_t>(std::clamp(x, 0, w - 1)) * c;
            const T* p = pad.data() + (x + r) * c;
            for (std::size_t ch = 0; ch < c; ++ch) q[ch] += p[ch];
        }
    }
    return out;
}

Image blur(const Image& image, int size, double sigma);

// Mean SSIM of x against a fixed reference y, and optionally its gradient
// with respect to x. Channels are averaged with the pixels.
template <class T>
T ssim_mean(std::span<const T> x, std::span<const double> y, Extent e, std::vector<T>* gradient = nullptr) {
    if (x.size() != e.size() || y.size() != e.size()) throw std::invalid_argument("ssim: size mismatch");
    const std::vector<double> kernel = gaussian_kernel(kSsimWindow, kSsimSigma);
    const std::size_t n = e.size();
    std::vector<T> xx(n), xy(n);
    std::vector<double> yy(n);
    for (std::size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        xy[i] = x[i] * y[i];
        yy[i] = y[i] * y[i];
    }
    const std::vector<T> mx = blur<T>(x, e, kernel);
    const std::vector<double> my = blur<double>(y, e, kernel);
    const std::vector<T> gxx = blur<T>(xx, e, kernel);
    const std::vector<T> gxy = blur<T>(xy, e, kernel);
    const std::vector<double> gyy = blur<double>(yy, e, kernel);

    T total(0.0);
    std::vector<T> d_mx, d_xx, d_xy;
    if (gradient != nullptr) {
        d_mx.assign(n, T(0.0));
        d_xx.assign(n, T(0.0));
        d_xy.assign(n, T(0.0));
    }
    for (std::size_t i = 0; i < n; ++i) {
        const T a1 = T(2.0) * mx[i] * my[i] + kSsimC1;
        const T a2 = T(2.0) * (gxy[i] - mx[i] * my[i]) + kSsimC2;
        const T b1 = mx[i] * mx[i] + my[i] * my[i] + kSsimC1;
        const T b2 = (gxx[i] - mx[i] * mx[i]) + (gyy[i] - my[i] * my[i]) + kSsimC2;
        const T den = b1 * b2;
        const T s = a1 * a2 / den;
        total += s;
        if (gradient != nullptr) {
            // s as a function of (mx, G[x^2], G[xy]) with the reference fixed.
            d_mx[i] = (a2 * T(2.0 * my[i]) - a1 * T(2.0 * my[i])) / den - s * T(2.0) * mx[i] / b1 +
                      s * T(2.0) * mx[i] / b2;
            d_xx[i] = -s / b2;
            d_xy[i] = T(2.0) * a1 / den;
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    if (gradient != nullptr) {
        const std::vector<T> t_mx = blur_transpose<T>(d_mx, e, kernel);
        const std::vector<T> t_xx = blur_transpose<T>(d_xx, e, kernel);
        const std::vector<T> t_xy = blur_transpose<T>(d_xy, e, kernel);
        gradient->assign(n, T(0.0));
        for (std::size_t i = 0; i < n; ++i) {
            (*gradient)[i] = inv_n * (t_mx[i] + T(2.0) * x[i] * t_xx[i] + y[i] * t_xy[i]);
        }
    }
    return total * inv_n;
}

}  // namespace phong_splat
