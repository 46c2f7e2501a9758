#include "phong_splat/image.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace phong_splat {

double srgb_to_linear(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
    return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f != nullptr) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw ImageIoError("cannot open '" + path.string() + "'");
    return f;
}

}  // namespace

Image read_png(const std::filesystem::path& path, bool srgb) {
    FilePtr file = open_file(path, "rb");
    unsigned char signature[8];
    if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
        throw ImageIoError("'" + path.string() + "' is not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ImageIoError("libpng initialisation failed");
    }
    std::vector<unsigned char> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError("corrupt PNG '" + path.string() + "'");
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if ((color_type & PNG_COLOR_MASK_ALPHA) != 0) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS) != 0) png_set_strip_alpha(png);
    if (bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
    png_read_update_info(png, info);

    const std::size_t row_bytes = png_get_rowbytes(png, info);
    const int bytes_per_sample = bit_depth == 16 ? 2 : 1;
    pixels.resize(row_bytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image image(static_cast<int>(width), static_cast<int>(height), 3);
    const double scale = bit_depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
    for (png_uint_32 y = 0; y < height; ++y) {
        const unsigned char* row = rows[y];
        for (png_uint_32 x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const std::size_t k = (static_cast<std::size_t>(x) * 3 + c) * bytes_per_sample;
                double v = 0.0;
                if (bytes_per_sample == 2) {
                    std::uint16_t s;
                    std::memcpy(&s, row + k, 2);
                    v = s * scale;
                } else {
                    v = row[k] * scale;
                }
                image.at(static_cast<int>(x), static_cast<int>(y), c) = srgb ? srgb_to_linear(v) : v;
            }
        }
    }
    return image;
}

void write_png(const std::filesystem::path& path, const Image& image, bool srgb) {
    if (image.channels != 1 && image.channels != 3) throw ImageIoError("write_png expects 1 or 3 channels");
    FilePtr file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        throw ImageIoError("libpng initialisation failed");
    }
    std::vector<unsigned char> pixels(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) {
        double v = std::clamp(image.data[i], 0.0, 1.0);
        if (srgb) v = linear_to_srgb(v);
        pixels[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
    for (int y = 0; y < image.height; ++y) rows[static_cast<std::size_t>(y)] = pixels.data() + y * stride;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageIoError("failed writing PNG '" + path.string() + "'");
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_pfm(const std::filesystem::path& path, const Image& image) {
    if (image.channels != 1) throw ImageIoError("write_pfm expects a single-channel image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageIoError("cannot open '" + path.string() + "'");
    out << "Pf\n" << image.width << ' ' << image.height << "\n-1.0\n";
    for (int y = image.height - 1; y >= 0; --y) {
        for (int x = 0; x < image.width; ++x) {
            const float v = static_cast<float>(image.at(x, y));
            auto bits = std::bit_cast<std::uint32_t>(v);
            if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
            out.write(reinterpret_cast<const char*>(&bits), 4);
        }
    }
}

Image read_pfm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageIoError("cannot open '" + path.string() + "'");
    std::string magic;
    int w = 0;
    int h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    in.get();
    if (magic != "Pf" || w <= 0 || h <= 0) throw ImageIoError("unsupported PFM '" + path.string() + "'");
    Image image(w, h, 1);
    const bool little = scale < 0.0;
    for (int y = h - 1; y >= 0; --y) {
        for (int x = 0; x < w; ++x) {
            std::uint32_t bits = 0;
            if (!in.read(reinterpret_cast<char*>(&bits), 4)) throw ImageIoError("truncated PFM");
            if (little != (std::endian::native == std::endian::little)) bits = __builtin_bswap32(bits);
            image.at(x, y) = std::bit_cast<float>(bits);
        }
    }
    return image;
}

}  // namespace phong_splat
