#include "core/losses.hpp"

#include <cmath>

#include "core/error.hpp"
#include "core/ssim.hpp"

namespace bs {

double loss_image(const ImageBuffer& pred, const ImageBuffer& target, double lambda_mix) {
    require(pred.same_shape(target), "loss_image: image shapes differ");
    double l1 = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) l1 += std::abs(pred.data[i] - target.data[i]);
    l1 /= static_cast<double>(pred.data.size());
    if (lambda_mix >= 1.0) return l1;
    const double dssim = (1.0 - ssim(pred, target)) * 0.5;
    return lambda_mix * l1 + (1.0 - lambda_mix) * dssim;
}

std::vector<double> loss_image_backward(const ImageBuffer& pred, const ImageBuffer& target,
                                        double lambda_mix) {
    require(pred.same_shape(target), "loss_image: image shapes differ");
    const double inv_n = 1.0 / static_cast<double>(pred.data.size());
    std::vector<double> grad(pred.data.size(), 0.0);
    for (size_t i = 0; i < grad.size(); ++i) {
        const double e = pred.data[i] - target.data[i];
        grad[i] = lambda_mix * inv_n * (e > 0 ? 1.0 : (e < 0 ? -1.0 : 0.0));
    }
    if (lambda_mix < 1.0) {
        const std::vector<double> dssim = ssim_backward(pred, target);
        for (size_t i = 0; i < grad.size(); ++i)
            grad[i] -= 0.5 * (1.0 - lambda_mix) * dssim[i];
    }
    return grad;
}

double loss_depth(const DepthMap& pred, const DepthMap& ref, bool* no_valid) {
    require(pred.width == ref.width && pred.height == ref.height,
            "loss_depth: depth shapes differ");
    double sum = 0;
    size_t count = 0;
    for (size_t i = 0; i < ref.data.size(); ++i) {
        if (ref.data[i] == DepthMap::kNoSurface) continue;
        sum += std::abs(pred.data[i] - ref.data[i]);
        ++count;
    }
    if (no_valid) *no_valid = (count == 0);
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

std::vector<double> loss_depth_backward(const DepthMap& pred, const DepthMap& ref) {
    require(pred.width == ref.width && pred.height == ref.height,
            "loss_depth: depth shapes differ");
    size_t count = 0;
    for (double v : ref.data)
        if (v != DepthMap::kNoSurface) ++count;
    std::vector<double> grad(pred.data.size(), 0.0);
    if (count == 0) return grad;
    const double inv = 1.0 / static_cast<double>(count);
    for (size_t i = 0; i < grad.size(); ++i) {
        if (ref.data[i] == DepthMap::kNoSurface) continue;
        const double e = pred.data[i] - ref.data[i];
        grad[i] = inv * (e > 0 ? 1.0 : (e < 0 ? -1.0 : 0.0));
    }
    return grad;
}

double loss_pose_reg(const GaussianCloud& cloud, double eps_pose) {
    if (cloud.empty()) return 0.0;
    double sum = 0;
    for (const Gaussian3D& g : cloud.gaussians)
        sum += g.scale().cwiseMax(eps_pose).norm();
    return sum / static_cast<double>(cloud.size());
}

void loss_pose_reg_backward(const GaussianCloud& cloud, double eps_pose, double upstream,
                            std::vector<Vec3>& d_log_scale) {
    if (cloud.empty()) return;
    const double inv_n = upstream / static_cast<double>(cloud.size());
    for (size_t j = 0; j < cloud.size(); ++j) {
        const Vec3 s = cloud.gaussians[j].scale();
        const Vec3 clamped = s.cwiseMax(eps_pose);
        const double norm = clamped.norm();
        if (norm < 1e-300) continue;
        for (int k = 0; k < 3; ++k)
            if (s[k] > eps_pose) d_log_scale[j][k] += inv_n * clamped[k] / norm * s[k];
    }
}

double total_loss(double l_image, double l_depth, double l_pose, const LossWeights& weights) {
    if (!std::isfinite(l_image)) throw_numeric("total_loss: image loss is non-finite");
    if (!std::isfinite(l_depth)) throw_numeric("total_loss: depth loss is non-finite");
    if (!std::isfinite(l_pose)) throw_numeric("total_loss: pose loss is non-finite");
    return l_image + weights.lambda_depth * l_depth + weights.lambda_pose * l_pose;
}

}  // namespace bs
