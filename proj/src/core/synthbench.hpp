#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/posekit.hpp"
#include "core/rasterizer.hpp"
#include "core/types.hpp"

namespace bs {

enum class BlurKind { None, CameraMotion, ObjectMotion, Defocus };

BlurKind blur_kind_from_string(const std::string& name);
std::string to_string(BlurKind kind);

struct BlurSpec {
    BlurKind kind = BlurKind::CameraMotion;
    int n_sub = 16;          // sub-exposure samples for the motion kinds
    double magnitude = 0.1;  // arc length / displacement per exposure, or kernel sigma
};

struct SceneSpec {
    int n_gaussians = 300;
    double extent = 2.0;           // Gaussians fill [-extent/2, extent/2]^3
    double moving_fraction = 0.0;  // share of Gaussians given velocity vectors
    int n_frames = 10;
    CameraIntrinsics intrinsics{70, 70, 32, 32, 64, 64};
    int sh_degree = 1;
    uint64_t seed = 7;
};

/// Catmull-Rom segment between p1 and p2, t in [0, 1].
Vec3 catmull_rom(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3, double t);

/// Piecewise Catmull-Rom through the points; s in [0, points.size() - 1].
Vec3 spline_eval(const std::vector<Vec3>& points, double s);

struct SynthScene {
    SceneSpec spec;
    GaussianCloud cloud;           // ground truth at frame time 0
    Trajectory trajectory;         // ground-truth world-to-camera poses
    std::vector<Vec3> velocities;  // per Gaussian, world units per frame
    std::vector<Vec3> waypoints;   // camera-center spline control points

    /// Pose at continuous frame parameter u in [0, n_frames - 1].
    CameraPose pose_at(double u) const;

    /// Cloud with moving Gaussians displaced to frame time u, plus an extra
    /// sub-exposure offset along each velocity direction.
    GaussianCloud cloud_at(double u, double sub_exposure_shift = 0.0) const;

    /// Total camera-center path length across all frames.
    double arc_length() const;

    /// Frame parameter at a given arc length (clamped to the path).
    double param_at_arc(double s) const;
};

SynthScene generate_scene(const SceneSpec& spec);

struct BlurFrame {
    ImageBuffer blurry;
    ImageBuffer sharp;
    DepthMap depth;  // from the sharp midpoint render
};

/// Long-exposure emulation: motion kinds average n_sub renders across the
/// exposure centered on the frame; defocus convolves the sharp render.
BlurFrame simulate_blur(const SynthScene& scene, int frame, const BlurSpec& spec,
                        const RenderOptions& opts = {});

/// 10 log10(1 / MSE) on the [0,1] range; identical images report 99 dB.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

/// Dataset layout consumed by the trainer: frames/, sharp/, depth/,
/// intr.json, gt_poses.jsonl, gt_cloud.ply.
void write_dataset(const SynthScene& scene, const BlurSpec& blur, const std::string& out_dir);

}  // namespace bs
