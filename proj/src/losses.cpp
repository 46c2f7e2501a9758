#include "phong_splat/losses.hpp"

#include <string>

namespace phong_splat {

void LossWeights::validate() const {
    const std::pair<const char*, double> fields[] = {
        {"dssim", dssim},         {"normal_pred", normal_pred},     {"normal_residual", normal_residual},
        {"scale", scale},         {"opacity", opacity},             {"visibility", visibility},
        {"smooth", smooth},       {"diffuse_start", diffuse_start}, {"diffuse_end", diffuse_end},
        {"diffuse_horizon", diffuse_horizon},
    };
    for (const auto& [name, value] : fields) {
        if (!(value >= 0.0) || !std::isfinite(value)) {
            throw std::invalid_argument(std::string("loss weight '") + name + "' must be finite and non-negative");
        }
    }
    if (dssim > 1.0) throw std::invalid_argument("loss weight 'dssim' must lie in [0, 1]");
    if (diffuse_start <= 0.0 || diffuse_end <= 0.0) {
        throw std::invalid_argument("diffuse prior weights must be positive for the exponential decay");
    }
}

double rgb_loss(const Image& rendered, const Image& target, double lambda) {
    if (!rendered.same_shape(target)) throw std::invalid_argument("rgb_loss: dimension mismatch");
    return rgb_loss<double>(std::span<const double>(rendered.data), target, lambda);
}

std::array<double, 3> diffuse_prior_scale(std::span<const Vec3d> ambient, std::span<const Vec3d> diffuse) {
    if (ambient.size() != diffuse.size()) throw std::invalid_argument("diffuse prior: size mismatch");
    std::array<double, 3> s{};
    for (int k = 0; k < 3; ++k) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < ambient.size(); ++i) {
            num += ambient[i][k] * diffuse[i][k];
            den += diffuse[i][k] * diffuse[i][k];
        }
        s[k] = num / std::max(den, 1e-12);
    }
    return s;
}

double diffuse_prior_loss(std::span<const Vec3d> ambient, std::span<const Vec3d> diffuse, double weight) {
    if (ambient.empty()) throw std::invalid_argument("diffuse prior: needs at least one point");
    const auto s = diffuse_prior_scale(ambient, diffuse);
    double total = 0.0;
    for (std::size_t i = 0; i < ambient.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            const double r = ambient[i][k] - s[k] * diffuse[i][k];
            total += r * r;
        }
    }
    return weight * total / static_cast<double>(ambient.size());
}

double normal_losses(const Image& predicted_normal, const PseudoNormals& target, std::span<const double> params,
                     const LossWeights& w) {
    return w.normal_pred * normal_prediction_loss<double>(std::span<const double>(predicted_normal.data), target) +
           w.normal_residual * normal_residual_loss<double>(params) + w.scale * scale_loss<double>(params);
}

double sparse_losses(std::span<const double> opacities, std::span<const double> visibilities, const LossWeights& w) {
    return sparse_losses<double>(opacities, visibilities, w);
}

double smooth_loss(const FrameBuffers& buffers, double weight) {
    double total = 0.0;
    for (const Image* img : {&buffers.normal, &buffers.ambient, &buffers.diffuse, &buffers.specular}) {
        total += smooth_term<double>(std::span<const double>(img->data), {img->width, img->height, img->channels});
    }
    return weight * total;
}

}  // namespace phong_splat
