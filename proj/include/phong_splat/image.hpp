#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace phong_splat {

// Interleaved (row-major, channel-fastest) floating-point image.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c = 3, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }

    double& at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool operator==(const Image&) const = default;
};

class ImageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double srgb_to_linear(double c);
double linear_to_srgb(double c);

// Decodes an 8- or 16-bit PNG (gray, gray+alpha, RGB or RGBA) to RGB in [0, 1].
// Alpha is dropped. With `srgb`, the sRGB transfer curve is removed.
Image read_png(const std::filesystem::path& path, bool srgb = false);

// Writes an 8-bit RGB (or gray for one channel) PNG, clamping to [0, 1].
// With `srgb`, values are encoded with the sRGB transfer curve.
void write_png(const std::filesystem::path& path, const Image& image, bool srgb = false);

// Portable float map, single channel ("Pf"), bottom-to-top rows, little endian.
void write_pfm(const std::filesystem::path& path, const Image& image);
Image read_pfm(const std::filesystem::path& path);

}  // namespace phong_splat
