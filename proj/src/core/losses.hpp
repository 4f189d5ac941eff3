#pragma once

#include <vector>

#include "core/types.hpp"

namespace bs {

struct LossWeights {
    double lambda_image_mix = 0.2;  // L1 share inside the image loss
    double lambda_depth = 0.01;
    double lambda_pose = 1.0;
    double eps_pose = 1e-2;
};

/// lambda * mean|pred - target| + (1 - lambda) * (1 - SSIM) / 2.
double loss_image(const ImageBuffer& pred, const ImageBuffer& target, double lambda_mix);

/// d(loss_image)/d(pred), same layout as pred.data.
std::vector<double> loss_image_backward(const ImageBuffer& pred, const ImageBuffer& target,
                                        double lambda_mix);

/// Mean absolute depth error over pixels where ref has a surface.
/// Zero valid pixels yields 0 and sets *no_valid when provided.
double loss_depth(const DepthMap& pred, const DepthMap& ref, bool* no_valid = nullptr);

std::vector<double> loss_depth_backward(const DepthMap& pred, const DepthMap& ref);

/// mean_j || max(s_j, eps) ||_2 with the max taken componentwise.
double loss_pose_reg(const GaussianCloud& cloud, double eps_pose);

/// Accumulates d(loss_pose_reg)/d(log_scale_j) scaled by upstream.
void loss_pose_reg_backward(const GaussianCloud& cloud, double eps_pose, double upstream,
                            std::vector<Vec3>& d_log_scale);

/// l_image + lambda_depth * l_depth + lambda_pose * l_pose.
/// Throws a numeric error naming the first non-finite component.
double total_loss(double l_image, double l_depth, double l_pose, const LossWeights& weights);

}  // namespace bs
