#include "phong_splat/filters.hpp"

namespace phong_splat {

std::vector<double> gaussian_kernel(int size, double sigma) {
    if (size < 1 || size % 2 == 0) throw std::invalid_argument("gaussian_kernel: size must be odd and positive");
    const int r = size / 2;
    std::vector<double> k(static_cast<std::size_t>(size));
    double total = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
        total += k[i + r];
    }
    for (double& v : k) v /= total;
    return k;
}

Image blur(const Image& image, int size, double sigma) {
    const auto kernel = gaussian_kernel(size, sigma);
    Image out = image;
    out.data = blur<double>(image.data, {image.width, image.height, image.channels}, kernel);
    return out;
}

}  // namespace phong_splat
