#pragma once

#include <string>
#include <vector>

#include "core/rasterizer.hpp"
#include "core/types.hpp"

namespace bs {

struct Trajectory {
    std::vector<CameraPose> poses;
    std::vector<int> frame_ids;

    size_t size() const { return poses.size(); }
};

void validate_trajectory(const Trajectory& traj);

// One JSON object per line: {"frame_id": i, "q": [w,x,y,z], "t": [x,y,z]}.
Trajectory load_trajectory(const std::string& path);
void save_trajectory(const Trajectory& traj, const std::string& path);

struct PoseOptimOptions {
    int max_iters = 300;
    double lr_rotation = 5e-3;
    double lr_translation = 5e-3;
    double min_improvement = 1e-6;  // loss decrease that counts as progress
    int patience = 20;              // stop after this many stagnant iterations
    double lambda_mix = 0.2;        // L1 share of the photometric loss
    // Coarse-to-fine schedule: downsampled passes widen the photometric
    // basin before the final full-resolution optimization; the reported
    // loss is always the full-resolution objective.
    int pyramid_levels = 3;
    int min_level_size = 16;
    RenderOptions render;
};

struct PoseOptimResult {
    CameraPose pose;
    double final_loss = 0;
    int iterations = 0;
    bool converged = false;
};

/// Raised when the photometric loss turns non-finite mid-optimization.
class PoseDivergence : public Error {
  public:
    PoseDivergence(const std::string& msg, const CameraPose& last, double loss)
        : Error(ErrorKind::Numeric, msg), last_finite_pose(last), last_finite_loss(loss) {}
    CameraPose last_finite_pose;
    double last_finite_loss;
};

/// Adam descent on the SE(3) tangent of the pose, minimizing the photometric
/// loss of the frozen cloud's render against the target. Returns the best
/// pose seen, so the final loss never exceeds the initial one.
PoseOptimResult estimate_pose(const GaussianCloud& frozen, const ImageBuffer& target,
                              const CameraPose& init, const CameraIntrinsics& intr,
                              const PoseOptimOptions& opts = {});

/// Appends rel * last (world-to-camera composition) under the next frame id.
Trajectory chain_relative(const Trajectory& traj, const CameraPose& rel, int frame_id);

struct Alignment {
    Trajectory aligned;
    double scale = 1;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
};

/// Similarity transform (scale, rotation, translation) minimizing the summed
/// squared distance between camera centers, applied to est. Closed form via
/// SVD of the centered cross-covariance.
Alignment procrustes_align(const Trajectory& est, const Trajectory& gt);

struct TrajectoryMetrics {
    double ate = 0;    // RMSE of camera-center error
    double rpe_t = 0;  // RMSE of consecutive relative-translation error
    double rpe_r = 0;  // RMSE of consecutive relative-rotation angle, degrees
};

TrajectoryMetrics trajectory_metrics(const Trajectory& est_aligned, const Trajectory& gt);

}  // namespace bs
