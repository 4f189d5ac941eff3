#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/rasterizer.hpp"
#include "core/types.hpp"

namespace bs {

/// Sinusoidal encoding: per input scalar v emits
/// [sin(2^0 pi v), cos(2^0 pi v), ..., sin(2^{L-1} pi v), cos(2^{L-1} pi v)].
std::vector<double> encode(std::span<const double> values, int num_freqs);

struct PositionalEncoding {
    int num_freqs = 1;
    bool include_input = false;
    int out_dim_per_scalar() const { return 2 * num_freqs + (include_input ? 1 : 0); }
};

/// 4-layer MLP: a 3-layer shared trunk (64 hidden units, ReLU) feeding three
/// linear heads that predict per-Gaussian position, rotation and scale
/// factors for each of the m transformed sets. Everything is Xavier
/// initialized; the small lambda mixing constants keep the initial
/// transforms close to the identity while the sets stay distinguishable.
struct BlurNet {
    int m = 4;
    int l_position = 10;  // encoding frequencies for gamma(mu)
    int l_view = 4;       // encoding frequencies for gamma(p)
    int hidden = 64;

    MatX w1, w2, w3;          // trunk
    VecX b1, b2, b3;
    MatX w_mu, w_r, w_s;      // heads: 3m, 4m, 3m outputs
    VecX b_mu, b_r, b_s;
    double rho_r = 1.0, rho_s = 1.0;      // learnable covariance scalars
    double lambda_p = 1e-2, lambda_q = 1e-2;  // fixed mixing constants

    int input_dim() const { return 6 * l_position + 4 + 3 + 6 * l_view; }

    static BlurNet create(int m, int l_position, int l_view, uint64_t seed);
};

void save_blurnet(const BlurNet& net, const std::string& path);
BlurNet load_blurnet(const std::string& path);

/// Per-Gaussian offsets for each set; sigmoid already applied to d_r and d_s.
struct BlurOffsets {
    MatX d_mu;  // n x 3m
    MatX d_r;   // n x 4m, in (0,1)
    MatX d_s;   // n x 3m, in (0,1)
};

/// Forward cache kept for the MLP backward pass.
struct BlurNetForward {
    MatX input;        // n x input_dim
    MatX h1, h2, h3;   // post-ReLU activations
    BlurOffsets offsets;
};

/// Net input per Gaussian: gamma(mu) | rotation | scale | gamma(camera center).
BlurNetForward predict_offsets(const BlurNet& net, const GaussianCloud& cloud,
                               const CameraPose& view);

/// The m transformed clouds G*(mu_hat, r_hat, s_hat):
///   mu_hat = mu + lambda_p * d_mu
///   r_hat  = normalize(r .* rho_r * min(1, lambda_q * d_r + 1 - lambda_q))
///   s_hat  = s .* rho_s * min(1, lambda_q * d_s + 1 - lambda_q)
/// Opacity and sh are shared with the base cloud.
std::vector<GaussianCloud> transform_sets(const GaussianCloud& cloud, const BlurOffsets& offsets,
                                          const BlurNet& net);

struct BlurRenderOutput {
    ImageBuffer color;        // mean of the m renders
    DepthMap depth;           // mean of the m depth composites
    ImageBuffer accum_alpha;  // mean accumulated opacity, 1 channel
};

BlurRenderOutput render_blurred(const GaussianCloud& cloud, const BlurNet& net,
                                const CameraPose& pose, const CameraIntrinsics& intr,
                                const RenderOptions& opts = {});

/// Plain rasterizer render of the base cloud; the net is not consulted.
ImageBuffer render_sharp(const GaussianCloud& cloud, const CameraPose& pose,
                         const CameraIntrinsics& intr, const RenderOptions& opts = {});

struct BlurNetGradients {
    MatX d_w1, d_w2, d_w3;
    VecX d_b1, d_b2, d_b3;
    MatX d_w_mu, d_w_r, d_w_s;
    VecX d_b_mu, d_b_r, d_b_s;
    double d_rho_r = 0, d_rho_s = 0;

    static BlurNetGradients zeros_like(const BlurNet& net);
};

struct BlurBackwardResult {
    RenderGradients cloud;   // w.r.t. base cloud parameters and the pose
    BlurNetGradients net;
    BlurOffsets d_offsets;   // w.r.t. the activated offsets (diagnostics/tests)
};

/// Full adjoint of render_blurred: gradients reach the base cloud directly
/// through the transforms and indirectly through the net input encoding.
BlurBackwardResult render_blurred_backward(const GaussianCloud& cloud, const BlurNet& net,
                                           const CameraPose& pose, const CameraIntrinsics& intr,
                                           const RenderUpstream& upstream,
                                           const RenderOptions& opts = {});

}  // namespace bs
