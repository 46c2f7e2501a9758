#include "phong_splat/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "phong_splat/filters.hpp"

namespace phong_splat {

namespace {
void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch " + std::to_string(a.width) + "x" +
                                    std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                                    std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                                    std::to_string(b.channels));
    }
}
}  // namespace

double mse(const Image& a, const Image& b) {
    require_same_shape(a, b, "mse");
    if (a.data.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        total += d * d;
    }
    return total / static_cast<double>(a.data.size());
}

double psnr(const Image& a, const Image& b) {
    require_same_shape(a, b, "psnr");
    const double m = mse(a, b);
    if (m == 0.0) return kPsnrIdentical;
    return 10.0 * std::log10(1.0 / m);
}

double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    return ssim_mean<double>(a.data, b.data, {a.width, a.height, a.channels});
}

}  // namespace phong_splat
