#pragma once

#include <string>
#include <vector>

#include "core/adam.hpp"
#include "core/blurnet.hpp"
#include "core/densify.hpp"
#include "core/losses.hpp"
#include "core/posekit.hpp"
#include "core/rng.hpp"
#include "core/types.hpp"

namespace bs {

struct TrainConfig {
    int total_iters = 20000;  // cap over all optimization steps
    int init_iters = 800;     // frame-0 fit
    int joint_iters = 250;    // refinement steps per newly added frame
    int global_refine_interval = 500;
    int pose_iters = 300;
    int pose_refine_rounds = 2;  // re-estimation rounds after the joint window
    int densify_start_iter = 2000;
    int densify_interval = 100;
    int densify_end_iter = 15000;
    double prune_opacity_threshold = 1e-2;
    double densify_grad_threshold = 5e-4;
    double depth_prune_multiplier = 3.0;
    int m_blur = 4;
    int sh_degree = 1;
    int pe_freqs_position = 10;
    int pe_freqs_view = 4;
    double lambda_p = 1e-2;
    double lambda_q = 1e-2;
    LossWeights loss;

    double lr_position = 1.6e-4;  // scaled by scene extent, decays 100x over total_iters
    double lr_sh = 2.5e-3;
    double lr_opacity = 5e-2;
    double lr_scale = 5e-3;
    double lr_rotation = 1e-3;
    double lr_mlp = 1e-3;
    double lr_mlp_heads = 1e-2;  // heads must outrun the cloud at absorbing
                                 // blur: offsets are scaled by lambda_p = 1e-2
    double lr_rho = 1e-4;  // slow, so the rho factors cannot launder scale
                           // out of the base cloud against the pose regularizer
    double lr_pose_rot = 5e-3;    // per-frame pose estimation
    double lr_pose_trans = 5e-3;
    double lr_refine_rot = 1e-4;  // gentler in-loop pose refinement
    double lr_refine_trans = 1e-4;

    // The frame-0 fit adapts appearance only; the depth-seeded geometry
    // stays locked until a second view can constrain it.
    bool init_lock_geometry = true;
    DensifyConfig densify;     // sparse-to-dense bootstrap expansion
    int bootstrap_points = 400;
    uint64_t seed = 42;
    int log_interval = 50;
    std::string dump_dir;  // when set, non-finite aborts dump state here
};

/// Adam over the per-Gaussian parameter groups, with row remapping so
/// optimizer state survives densification and pruning.
class CloudOptimizer {
  public:
    void init(const GaussianCloud& cloud);

    struct Rates {
        double position, rotation, log_scale, opacity, sh;
    };
    /// One step; renormalizes quaternions afterwards.
    void step(GaussianCloud& cloud, const RenderGradients& grads, const Rates& rates);

    /// Rebuild state rows: new row i copies old row src_rows[i]; -1 is fresh.
    void remap(const std::vector<int>& src_rows);

    size_t rows() const { return n_; }

  private:
    AdamState position_, rotation_, log_scale_, opacity_, sh_;
    int sh_coeffs_ = 0;
    size_t n_ = 0;
};

struct DensifyState {
    std::vector<double> grad_norm_accum;
    std::vector<int> grad_count;

    void resize(size_t n) {
        grad_norm_accum.assign(n, 0.0);
        grad_count.assign(n, 0);
    }
    void accumulate(const std::vector<Vec2>& d_mean2d);
};

struct DensifyPruneResult {
    int n_cloned = 0, n_split = 0, n_pruned = 0;
    std::vector<int> src_rows;  // new row -> old row, -1 for fresh samples
};

/// Clone/split Gaussians with large accumulated screen-space position
/// gradients, prune low-opacity ones and ones far beyond the median depth of
/// the given view, and remap optimizer rows to match.
DensifyPruneResult densify_and_prune(GaussianCloud& cloud, DensifyState& state,
                                     CloudOptimizer& opt, const TrainConfig& cfg,
                                     double scene_extent, const CameraPose& depth_view,
                                     CounterRng& rng);

struct FrameData {
    ImageBuffer blurry;
    DepthMap depth;
    bool has_depth = false;
};

struct TrainDataset {
    std::vector<FrameData> frames;
    CameraIntrinsics intr;
    GaussianCloud sparse;  // empty when the dataset ships no sparse.ply
};

/// Reads frames/%05d.png, optional depth/%05d.pfm, intr.json and optional
/// sparse.ply from a dataset directory.
TrainDataset load_dataset(const std::string& dir);

/// Back-projects a subsample of frame-0 depth into an isotropic seed cloud.
GaussianCloud bootstrap_sparse_cloud(const ImageBuffer& frame0, const DepthMap& depth0,
                                     const CameraIntrinsics& intr, int n_points, int sh_degree);

struct MetricsRecord {
    int iter = 0;
    int frame = 0;
    double l_image = 0, l_depth = 0, l_pose = 0, psnr = 0;
};

void save_metrics(const std::vector<MetricsRecord>& metrics, const std::string& path);

struct TrainResult {
    GaussianCloud cloud;
    BlurNet net;
    Trajectory trajectory;
    std::vector<MetricsRecord> metrics;
    std::vector<std::string> warnings;
};

/// Progressive pipeline: densify the seed cloud, fit frame 0 through the blur
/// model, then per frame estimate the pose against the frozen cloud and
/// jointly refine the cloud, the net and the recent poses, with periodic
/// global passes and scheduled densify/prune. Deterministic given the seed.
TrainResult train_progressive(const TrainDataset& data, const GaussianCloud& sparse_init,
                              const TrainConfig& cfg);

}  // namespace bs
