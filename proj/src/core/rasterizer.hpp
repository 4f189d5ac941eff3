#pragma once

#include <vector>

#include "core/types.hpp"

namespace bs {

// Fixed splatting constants, shared with the test oracles.
inline constexpr double kNearPlane = 0.01;
inline constexpr double kAlphaCap = 0.99;
inline constexpr double kAlphaFloor = 1.0 / 255.0;
inline constexpr double kTransmittanceCutoff = 1e-4;
inline constexpr double kLowPassFloor = 0.3;  // px^2 added to cov2d diagonal

struct ProjectedGaussian {
    Vec2 mean2d = Vec2::Zero();   // pixels
    Mat2 cov2d = Mat2::Zero();    // pixels^2, low-pass floor applied
    double depth = 0;             // camera-frame z
    Vec3 color = Vec3::Zero();    // SH-evaluated, clamped to [0,1]
    double alpha_peak = 0;        // activated opacity
};

struct ProjectResult {
    std::vector<ProjectedGaussian> gaussians;  // index-aligned with the cloud
    std::vector<char> visible;                 // 0 when culled by the near plane
};

struct RenderOptions {
    Vec3 background = Vec3::Zero();
    bool early_termination = true;  // stop once transmittance drops below cutoff
    bool alpha_floor = true;        // skip contributions below 1/255
    double bbox_sigma = 4.0;        // per-Gaussian raster extent; 0 = every pixel
};

struct RenderOutput {
    ImageBuffer color;        // 3 channels
    DepthMap depth;           // alpha-weighted mean depth, 0 where nothing lands
    ImageBuffer accum_alpha;  // 1 channel, 1 - final transmittance
};

/// Per-pixel gradients of a scalar loss w.r.t. the render outputs.
/// d_color has 3 * width * height entries (row-major, interleaved);
/// d_depth has width * height entries or is empty when depth is unused.
struct RenderUpstream {
    std::vector<double> d_color;
    std::vector<double> d_depth;
};

struct RenderGradients {
    std::vector<Vec3> d_position;
    std::vector<Vec4> d_rotation;  // w.r.t. the stored (raw) quaternion
    std::vector<Vec3> d_log_scale;
    std::vector<double> d_opacity_logit;
    std::vector<double> d_sh;  // flat, stride = cloud.sh_coeff_count()
    Vec3 d_pose_omega = Vec3::Zero();  // left perturbation R <- R(w) R, t <- R(w) t + v
    Vec3 d_pose_trans = Vec3::Zero();
    std::vector<Vec2> d_mean2d;  // screen-space position gradient, for densify stats

    void resize(size_t n, int sh_coeffs);
};

ProjectResult project(const GaussianCloud& cloud, const CameraPose& pose,
                      const CameraIntrinsics& intr);

RenderOutput render(const GaussianCloud& cloud, const CameraPose& pose,
                    const CameraIntrinsics& intr, const RenderOptions& opts = {});

RenderGradients render_backward(const GaussianCloud& cloud, const CameraPose& pose,
                                const CameraIntrinsics& intr, const RenderUpstream& upstream,
                                const RenderOptions& opts = {});

}  // namespace bs
