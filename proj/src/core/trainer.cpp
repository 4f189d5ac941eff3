#include "core/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <unordered_map>

#include "core/image_io.hpp"
#include "core/json_io.hpp"
#include "core/kdtree.hpp"
#include "core/ply.hpp"
#include "core/sh.hpp"
#include "core/synthbench.hpp"

namespace bs {

namespace fs = std::filesystem;

namespace {

constexpr double kRhoFloor = 1e-3;       // keeps log(rho_s) defined
constexpr double kSplitScaleDiv = 1.6;   // 3DGS split shrink
constexpr double kPositionLrDecay = 0.01;  // lr multiplier reached at total_iters

void group_remap(std::vector<double>& m, std::vector<double>& v, int width,
                 const std::vector<int>& src_rows) {
    std::vector<double> new_m(src_rows.size() * width, 0.0);
    std::vector<double> new_v(src_rows.size() * width, 0.0);
    for (size_t i = 0; i < src_rows.size(); ++i) {
        if (src_rows[i] < 0) continue;
        for (int c = 0; c < width; ++c) {
            new_m[i * width + c] = m[src_rows[i] * width + c];
            new_v[i * width + c] = v[src_rows[i] * width + c];
        }
    }
    m = std::move(new_m);
    v = std::move(new_v);
}

}  // namespace

void CloudOptimizer::init(const GaussianCloud& cloud) {
    n_ = cloud.size();
    sh_coeffs_ = cloud.sh_coeff_count();
    position_.init(n_ * 3);
    rotation_.init(n_ * 4);
    log_scale_.init(n_ * 3);
    opacity_.init(n_);
    sh_.init(n_ * sh_coeffs_);
}

void CloudOptimizer::step(GaussianCloud& cloud, const RenderGradients& grads,
                          const Rates& rates) {
    require(cloud.size() == n_, "CloudOptimizer: cloud size changed without remap");
    const size_t n = n_;
    std::vector<double> params(n * 4), grad(n * 4);

    for (size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) {
            params[i * 3 + c] = cloud.gaussians[i].position[c];
            grad[i * 3 + c] = grads.d_position[i][c];
        }
    position_.update(std::span<double>(params.data(), n * 3),
                     std::span<const double>(grad.data(), n * 3), rates.position);
    for (size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) cloud.gaussians[i].position[c] = params[i * 3 + c];

    for (size_t i = 0; i < n; ++i)
        for (int c = 0; c < 4; ++c) {
            params[i * 4 + c] = cloud.gaussians[i].rotation[c];
            grad[i * 4 + c] = grads.d_rotation[i][c];
        }
    rotation_.update(std::span<double>(params.data(), n * 4),
                     std::span<const double>(grad.data(), n * 4), rates.rotation);
    for (size_t i = 0; i < n; ++i) {
        Vec4 q(params[i * 4], params[i * 4 + 1], params[i * 4 + 2], params[i * 4 + 3]);
        cloud.gaussians[i].rotation = quat_normalized(q.norm() > 1e-12 ? q : Vec4(1, 0, 0, 0));
    }

    for (size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) {
            params[i * 3 + c] = cloud.gaussians[i].log_scale[c];
            grad[i * 3 + c] = grads.d_log_scale[i][c];
        }
    log_scale_.update(std::span<double>(params.data(), n * 3),
                      std::span<const double>(grad.data(), n * 3), rates.log_scale);
    for (size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) cloud.gaussians[i].log_scale[c] = params[i * 3 + c];

    for (size_t i = 0; i < n; ++i) {
        params[i] = cloud.gaussians[i].opacity_logit;
        grad[i] = grads.d_opacity_logit[i];
    }
    opacity_.update(std::span<double>(params.data(), n),
                    std::span<const double>(grad.data(), n), rates.opacity);
    for (size_t i = 0; i < n; ++i) cloud.gaussians[i].opacity_logit = params[i];

    std::vector<double> sh_params(n * sh_coeffs_);
    for (size_t i = 0; i < n; ++i)
        for (int c = 0; c < sh_coeffs_; ++c)
            sh_params[i * sh_coeffs_ + c] = cloud.gaussians[i].sh[c];
    sh_.update(sh_params, grads.d_sh, rates.sh);
    for (size_t i = 0; i < n; ++i)
        for (int c = 0; c < sh_coeffs_; ++c)
            cloud.gaussians[i].sh[c] = sh_params[i * sh_coeffs_ + c];
}

void CloudOptimizer::remap(const std::vector<int>& src_rows) {
    group_remap(position_.m, position_.v, 3, src_rows);
    group_remap(rotation_.m, rotation_.v, 4, src_rows);
    group_remap(log_scale_.m, log_scale_.v, 3, src_rows);
    group_remap(opacity_.m, opacity_.v, 1, src_rows);
    group_remap(sh_.m, sh_.v, sh_coeffs_, src_rows);
    n_ = src_rows.size();
}

void DensifyState::accumulate(const std::vector<Vec2>& d_mean2d) {
    if (grad_norm_accum.size() != d_mean2d.size()) resize(d_mean2d.size());
    for (size_t i = 0; i < d_mean2d.size(); ++i) {
        const double norm = d_mean2d[i].norm();
        if (norm > 0) {
            grad_norm_accum[i] += norm;
            grad_count[i] += 1;
        }
    }
}

DensifyPruneResult densify_and_prune(GaussianCloud& cloud, DensifyState& state,
                                     CloudOptimizer& opt, const TrainConfig& cfg,
                                     double scene_extent, const CameraPose& depth_view,
                                     CounterRng& rng) {
    const size_t n = cloud.size();
    require(state.grad_norm_accum.size() == n, "densify_and_prune: stale gradient stats");

    // Median camera-frame depth of the view, for the far-point prune.
    std::vector<double> depths;
    depths.reserve(n);
    const Mat3 rot = depth_view.rotation();
    for (const Gaussian3D& g : cloud.gaussians) {
        const double z = (rot * g.position + depth_view.t).z();
        if (z > 0) depths.push_back(z);
    }
    double depth_limit = std::numeric_limits<double>::infinity();
    if (!depths.empty()) {
        std::nth_element(depths.begin(), depths.begin() + depths.size() / 2, depths.end());
        depth_limit = cfg.depth_prune_multiplier * depths[depths.size() / 2];
    }

    DensifyPruneResult result;
    std::vector<Gaussian3D> kept;
    kept.reserve(n);
    std::vector<Gaussian3D> added;
    std::vector<int> kept_rows, added_rows;

    for (size_t i = 0; i < n; ++i) {
        const Gaussian3D& g = cloud.gaussians[i];
        const double z = (rot * g.position + depth_view.t).z();
        if (g.opacity() < cfg.prune_opacity_threshold || (z > 0 && z > depth_limit)) {
            ++result.n_pruned;
            continue;
        }
        const double mean_grad =
            state.grad_count[i] > 0 ? state.grad_norm_accum[i] / state.grad_count[i] : 0.0;
        if (mean_grad <= cfg.densify_grad_threshold) {
            kept.push_back(g);
            kept_rows.push_back(static_cast<int>(i));
            continue;
        }
        const Vec3 scale = g.scale();
        if (scale.maxCoeff() > 0.01 * scene_extent) {
            // Split: two samples drawn from the Gaussian, shrunk.
            ++result.n_split;
            ++result.n_pruned;  // the source is replaced
            const Mat3 chol = Eigen::LLT<Mat3>(build_covariance(g.rotation, scale)).matrixL();
            for (int s = 0; s < 2; ++s) {
                Gaussian3D child = g;
                const Vec3 draw(rng.normal(), rng.normal(), rng.normal());
                child.position = g.position + chol * draw;
                child.log_scale.array() -= std::log(kSplitScaleDiv);
                added.push_back(std::move(child));
                added_rows.push_back(-1);
            }
        } else {
            // Clone in place and keep the original.
            ++result.n_cloned;
            kept.push_back(g);
            kept_rows.push_back(static_cast<int>(i));
            added.push_back(g);
            added_rows.push_back(-1);
        }
    }

    cloud.gaussians = std::move(kept);
    cloud.gaussians.insert(cloud.gaussians.end(), added.begin(), added.end());
    result.src_rows = std::move(kept_rows);
    result.src_rows.insert(result.src_rows.end(), added_rows.begin(), added_rows.end());

    opt.remap(result.src_rows);
    state.resize(cloud.size());
    return result;
}

TrainDataset load_dataset(const std::string& dir) {
    TrainDataset data;
    data.intr = load_intrinsics_json((fs::path(dir) / "intr.json").string());

    char name[32];
    for (int t = 0;; ++t) {
        std::snprintf(name, sizeof(name), "%05d.png", t);
        const fs::path frame_path = fs::path(dir) / "frames" / name;
        if (!fs::exists(frame_path)) break;
        FrameData frame;
        frame.blurry = load_png(frame_path.string());
        require(frame.blurry.width == data.intr.width && frame.blurry.height == data.intr.height,
                "load_dataset: frame size does not match intrinsics");
        std::snprintf(name, sizeof(name), "%05d.pfm", t);
        const fs::path depth_path = fs::path(dir) / "depth" / name;
        if (fs::exists(depth_path)) {
            frame.depth = load_pfm(depth_path.string());
            frame.has_depth = true;
        }
        data.frames.push_back(std::move(frame));
    }
    require(!data.frames.empty(), "load_dataset: no frames/%05d.png found in " + dir);

    const fs::path sparse_path = fs::path(dir) / "sparse.ply";
    if (fs::exists(sparse_path)) data.sparse = load_ply(sparse_path.string());
    return data;
}

GaussianCloud bootstrap_sparse_cloud(const ImageBuffer& frame0, const DepthMap& depth0,
                                     const CameraIntrinsics& intr, int n_points, int sh_degree) {
    require(depth0.width == intr.width && depth0.height == intr.height,
            "bootstrap: depth size does not match intrinsics");
    std::vector<std::pair<int, int>> valid;
    for (int y = 0; y < depth0.height; ++y)
        for (int x = 0; x < depth0.width; ++x)
            if (depth0.at(x, y) > DepthMap::kNoSurface) valid.emplace_back(x, y);
    require(!valid.empty(), "bootstrap: frame-0 depth has no valid pixels");

    const int count = std::min<int>(n_points, static_cast<int>(valid.size()));
    GaussianCloud cloud;
    cloud.sh_degree = sh_degree;
    const int sh_coeffs = sh_coeffs_for_degree(sh_degree);

    std::vector<Vec3> positions;
    for (int i = 0; i < count; ++i) {
        const size_t pick = count == 1 ? 0 : i * (valid.size() - 1) / (count - 1);
        const auto [x, y] = valid[pick];
        const double z = depth0.at(x, y);
        Gaussian3D g;
        g.position = Vec3((x + 0.5 - intr.cx) / intr.fx * z, (y + 0.5 - intr.cy) / intr.fy * z, z);
        g.opacity_logit = logit(0.1);
        g.sh.assign(sh_coeffs, 0.0);
        for (int c = 0; c < 3; ++c)
            g.sh[c] = (std::clamp(frame0.at(x, y, frame0.channels == 3 ? c : 0), 0.02, 0.98) - 0.5) / kSH0;
        positions.push_back(g.position);
        cloud.gaussians.push_back(std::move(g));
    }

    // Isotropic size from the mean distance to the 3 nearest seeds.
    for (size_t i = 0; i < cloud.gaussians.size(); ++i) {
        const int k = std::min<int>(4, static_cast<int>(positions.size()));
        const auto hits = knn_query(positions, positions[i], k);
        double mean = 0;
        int used = 0;
        for (const auto& [idx, dist] : hits) {
            if (idx == static_cast<int>(i)) continue;
            mean += dist;
            ++used;
        }
        const double d = used > 0 ? mean / used : 0.1;
        cloud.gaussians[i].log_scale.setConstant(std::log(std::max(1e-6, d)));
    }
    return cloud;
}

void save_metrics(const std::vector<MetricsRecord>& metrics, const std::string& path) {
    std::string out;
    char buf[320];
    for (const MetricsRecord& m : metrics) {
        std::snprintf(buf, sizeof(buf),
                      "{\"iter\": %d, \"frame\": %d, \"l_image\": %.17g, \"l_depth\": %.17g, "
                      "\"l_pose\": %.17g, \"psnr\": %.17g}\n",
                      m.iter, m.frame, m.l_image, m.l_depth, m.l_pose, m.psnr);
        out += buf;
    }
    write_text_file(path, out);
}

namespace {

struct TrainState {
    GaussianCloud cloud;
    BlurNet net;
    Trajectory traj;
    CloudOptimizer cloud_opt;
    DensifyState densify_state;
    AdamState net_trunk_opt, net_heads_opt;
    AdamState rho_opt;
    std::unordered_map<int, AdamState> pose_rot_opt, pose_trans_opt;
    double scene_extent = 1.0;
    int global_iter = 0;
};

size_t net_trunk_count(const BlurNet& net) {
    return net.w1.size() + net.b1.size() + net.w2.size() + net.b2.size() + net.w3.size() +
           net.b3.size();
}

size_t net_heads_count(const BlurNet& net) {
    return net.w_mu.size() + net.b_mu.size() + net.w_r.size() + net.b_r.size() +
           net.w_s.size() + net.b_s.size();
}

template <typename Fn>
void for_each_trunk_param(BlurNet& net, Fn&& fn) {
    for (MatX* m : {&net.w1, &net.w2, &net.w3})
        for (int i = 0; i < m->size(); ++i) fn(m->data()[i]);
    for (VecX* v : {&net.b1, &net.b2, &net.b3})
        for (int i = 0; i < v->size(); ++i) fn(v->data()[i]);
}

template <typename Fn>
void for_each_heads_param(BlurNet& net, Fn&& fn) {
    for (MatX* m : {&net.w_mu, &net.w_r, &net.w_s})
        for (int i = 0; i < m->size(); ++i) fn(m->data()[i]);
    for (VecX* v : {&net.b_mu, &net.b_r, &net.b_s})
        for (int i = 0; i < v->size(); ++i) fn(v->data()[i]);
}

template <typename Fn>
void for_each_trunk_grad(const BlurNetGradients& g, Fn&& fn) {
    for (const MatX* m : {&g.d_w1, &g.d_w2, &g.d_w3})
        for (int i = 0; i < m->size(); ++i) fn(m->data()[i]);
    for (const VecX* v : {&g.d_b1, &g.d_b2, &g.d_b3})
        for (int i = 0; i < v->size(); ++i) fn(v->data()[i]);
}

template <typename Fn>
void for_each_heads_grad(const BlurNetGradients& g, Fn&& fn) {
    for (const MatX* m : {&g.d_w_mu, &g.d_w_r, &g.d_w_s})
        for (int i = 0; i < m->size(); ++i) fn(m->data()[i]);
    for (const VecX* v : {&g.d_b_mu, &g.d_b_r, &g.d_b_s})
        for (int i = 0; i < v->size(); ++i) fn(v->data()[i]);
}

double cloud_extent(const GaussianCloud& cloud) {
    Vec3 lo = cloud.gaussians.front().position, hi = lo;
    for (const Gaussian3D& g : cloud.gaussians) {
        lo = lo.cwiseMin(g.position);
        hi = hi.cwiseMax(g.position);
    }
    return std::max(1e-6, (hi - lo).norm());
}

// Frozen reference for the pose step: the union of the blur model's
// transformed sets with opacity split across the copies, so one static cloud
// renders approximately like the blurred prediction. Rendering the plain
// base cloud instead would bias the photometric optimum whenever the trained
// appearance lives in the transformed sets.
GaussianCloud pose_reference_cloud(const GaussianCloud& cloud, const BlurNet& net,
                                   const CameraPose& view) {
    const BlurNetForward fwd = predict_offsets(net, cloud, view);
    const std::vector<GaussianCloud> sets = transform_sets(cloud, fwd.offsets, net);
    GaussianCloud out;
    out.sh_degree = cloud.sh_degree;
    out.gaussians.reserve(cloud.size() * net.m);
    for (const GaussianCloud& set : sets) {
        for (const Gaussian3D& g : set.gaussians) {
            Gaussian3D copy = g;
            copy.opacity_logit = logit(std::clamp(copy.opacity() / net.m, 1e-4, 0.999));
            out.gaussians.push_back(std::move(copy));
        }
    }
    return out;
}

}  // namespace

TrainResult train_progressive(const TrainDataset& data, const GaussianCloud& sparse_init,
                              const TrainConfig& cfg) {
    require(data.frames.size() >= 2, "train_progressive: need at least 2 frames");
    require(!sparse_init.empty(), "train_progressive: sparse init cloud is empty");

    TrainState st;
    DensifyConfig densify_cfg = cfg.densify;
    densify_cfg.seed = cfg.seed;
    st.cloud = densify_cloud(sparse_init, densify_cfg);
    st.net = BlurNet::create(cfg.m_blur, cfg.pe_freqs_position, cfg.pe_freqs_view, cfg.seed);
    st.net.lambda_p = cfg.lambda_p;
    st.net.lambda_q = cfg.lambda_q;
    st.traj.poses.push_back(CameraPose{});
    st.traj.frame_ids.push_back(0);
    st.cloud_opt.init(st.cloud);
    st.densify_state.resize(st.cloud.size());
    st.net_trunk_opt.init(net_trunk_count(st.net));
    st.net_heads_opt.init(net_heads_count(st.net));
    st.rho_opt.init(2);
    st.scene_extent = cloud_extent(st.cloud);

    CounterRng densify_rng(cfg.seed, 0x64656e73ULL);

    TrainResult result;
    const RenderOptions render_opts;  // black background, defaults

    const auto position_lr = [&]() {
        const double progress = std::min(1.0, st.global_iter / std::max(1.0, double(cfg.total_iters)));
        return cfg.lr_position * st.scene_extent * std::pow(kPositionLrDecay, progress);
    };

    bool lock_geometry = cfg.init_lock_geometry;

    // One joint optimization step on frame f.
    const auto optimize_step = [&](int f, bool update_pose, bool log_metrics) {
        const FrameData& frame = data.frames[f];
        const CameraPose pose = st.traj.poses[f];

        const BlurRenderOutput pred = render_blurred(st.cloud, st.net, pose, data.intr, render_opts);
        const double l_image = loss_image(pred.color, frame.blurry, cfg.loss.lambda_image_mix);
        // The composite depth is alpha-weighted; compare surface-style depth
        // by dividing the accumulated opacity back out (treated as constant
        // in the backward pass).
        DepthMap pred_surface;
        std::vector<double> inv_accum;
        if (frame.has_depth) {
            pred_surface = pred.depth;
            inv_accum.resize(pred.depth.data.size());
            for (size_t i = 0; i < pred_surface.data.size(); ++i) {
                inv_accum[i] = 1.0 / std::max(0.1, pred.accum_alpha.data[i]);
                pred_surface.data[i] *= inv_accum[i];
            }
        }
        const double l_depth = frame.has_depth ? loss_depth(pred_surface, frame.depth) : 0.0;
        const double l_pose = loss_pose_reg(st.cloud, cfg.loss.eps_pose);
        double total = 0;
        try {
            total = total_loss(l_image, l_depth, l_pose, cfg.loss);
        } catch (const Error&) {
            if (!cfg.dump_dir.empty()) {
                fs::create_directories(cfg.dump_dir);
                save_ply(st.cloud, (fs::path(cfg.dump_dir) / "cloud.dump.ply").string());
                save_blurnet(st.net, (fs::path(cfg.dump_dir) / "blurnet.dump.bin").string());
            }
            throw_numeric("train_progressive: non-finite loss at iter " +
                          std::to_string(st.global_iter) + " frame " + std::to_string(f));
        }
        (void)total;

        RenderUpstream upstream;
        upstream.d_color = loss_image_backward(pred.color, frame.blurry, cfg.loss.lambda_image_mix);
        if (frame.has_depth) {
            upstream.d_depth = loss_depth_backward(pred_surface, frame.depth);
            for (size_t i = 0; i < upstream.d_depth.size(); ++i)
                upstream.d_depth[i] *= cfg.loss.lambda_depth * inv_accum[i];
        }

        BlurBackwardResult back =
            render_blurred_backward(st.cloud, st.net, pose, data.intr, upstream, render_opts);
        loss_pose_reg_backward(st.cloud, cfg.loss.eps_pose, cfg.loss.lambda_pose,
                               back.cloud.d_log_scale);

        st.densify_state.accumulate(back.cloud.d_mean2d);

        if (lock_geometry)
            st.cloud_opt.step(st.cloud, back.cloud, {0, 0, 0, cfg.lr_opacity, cfg.lr_sh});
        else
            st.cloud_opt.step(st.cloud, back.cloud, {position_lr(), cfg.lr_rotation,
                                                     cfg.lr_scale, cfg.lr_opacity, cfg.lr_sh});

        // MLP step, trunk and heads as separate groups.
        std::vector<double> params, grads;
        params.reserve(net_heads_count(st.net));
        for_each_trunk_param(st.net, [&](double& p) { params.push_back(p); });
        for_each_trunk_grad(back.net, [&](const double& g) { grads.push_back(g); });
        st.net_trunk_opt.update(params, grads, cfg.lr_mlp);
        size_t cursor = 0;
        for_each_trunk_param(st.net, [&](double& p) { p = params[cursor++]; });

        params.clear();
        grads.clear();
        for_each_heads_param(st.net, [&](double& p) { params.push_back(p); });
        for_each_heads_grad(back.net, [&](const double& g) { grads.push_back(g); });
        st.net_heads_opt.update(params, grads, cfg.lr_mlp_heads);
        cursor = 0;
        for_each_heads_param(st.net, [&](double& p) { p = params[cursor++]; });

        double rho[2] = {st.net.rho_r, st.net.rho_s};
        const double rho_grad[2] = {back.net.d_rho_r, back.net.d_rho_s};
        st.rho_opt.update(rho, rho_grad, cfg.lr_rho);
        st.net.rho_r = std::max(kRhoFloor, rho[0]);
        st.net.rho_s = std::max(kRhoFloor, rho[1]);

        if (update_pose && f > 0) {
            AdamState& rot_state = st.pose_rot_opt[f];
            AdamState& trans_state = st.pose_trans_opt[f];
            if (rot_state.m.empty()) {
                rot_state.init(3);
                trans_state.init(3);
            }
            double omega[3] = {0, 0, 0}, trans[3] = {0, 0, 0};
            rot_state.update(std::span<double>(omega, 3),
                             std::span<const double>(back.cloud.d_pose_omega.data(), 3),
                             cfg.lr_refine_rot);
            trans_state.update(std::span<double>(trans, 3),
                               std::span<const double>(back.cloud.d_pose_trans.data(), 3),
                               cfg.lr_refine_trans);
            st.traj.poses[f] = st.traj.poses[f].perturbed(Vec3(omega[0], omega[1], omega[2]),
                                                          Vec3(trans[0], trans[1], trans[2]));
        }

        if (log_metrics || st.global_iter % cfg.log_interval == 0)
            result.metrics.push_back({st.global_iter, f, l_image, l_depth, l_pose,
                                      psnr(pred.color, frame.blurry)});
        ++st.global_iter;

        const bool densify_due = st.global_iter >= cfg.densify_start_iter &&
                                 st.global_iter <= cfg.densify_end_iter &&
                                 st.global_iter % cfg.densify_interval == 0;
        if (densify_due) {
            densify_and_prune(st.cloud, st.densify_state, st.cloud_opt, cfg, st.scene_extent,
                              pose, densify_rng);
        }
    };

    // Phase 1: fit frame 0 through the blur model.
    for (int it = 0; it < cfg.init_iters && st.global_iter < cfg.total_iters; ++it)
        optimize_step(0, false, it == 0);

    // Phase 2: progressive frames.
    const int n_frames = static_cast<int>(data.frames.size());
    PoseOptimOptions pose_opts;
    pose_opts.max_iters = cfg.pose_iters;
    pose_opts.lr_rotation = cfg.lr_pose_rot;
    pose_opts.lr_translation = cfg.lr_pose_trans;
    pose_opts.lambda_mix = cfg.loss.lambda_image_mix;
    pose_opts.render = render_opts;

    const auto estimate = [&](int t, const CameraPose& init_pose) {
        CameraPose new_pose = init_pose;
        try {
            const GaussianCloud frozen = pose_reference_cloud(st.cloud, st.net, init_pose);
            new_pose = estimate_pose(frozen, data.frames[t].blurry, init_pose, data.intr,
                                     pose_opts).pose;
        } catch (const PoseDivergence& e) {
            result.warnings.push_back("frame " + std::to_string(t) +
                                      ": pose diverged, carrying previous pose (" + e.what() + ")");
        }
        return new_pose;
    };

    // Poses move only in the estimation rounds; inside a joint window the
    // cloud and net adapt to the current poses. Letting both drift at once
    // lets the cloud absorb pose error faster than the pose can correct it.
    const auto joint_window = [&](int t, int budget) {
        for (int it = 0; it < budget && st.global_iter < cfg.total_iters; ++it) {
            const int f = (it % 2 == 0) ? t : t - 1;  // two most recent frames
            optimize_step(f, false, it == 0);
            if (st.global_iter % cfg.global_refine_interval == 0) {
                for (int g = 0; g <= t && st.global_iter < cfg.total_iters; ++g)
                    optimize_step(g, false, false);
            }
        }
    };

    for (int t = 1; t < n_frames; ++t) {
        st.traj.poses.push_back(estimate(t, st.traj.poses.back()));
        st.traj.frame_ids.push_back(t);
        lock_geometry = false;  // a second view now constrains the geometry

        joint_window(t, cfg.joint_iters);
        // Re-estimate against the model that has now seen this frame, then
        // settle the window again briefly.
        for (int round = 0; round < cfg.pose_refine_rounds; ++round) {
            st.traj.poses[t] = estimate(t, st.traj.poses[t]);
            joint_window(t, cfg.joint_iters / 3);
        }
    }

    result.cloud = std::move(st.cloud);
    result.net = std::move(st.net);
    result.trajectory = std::move(st.traj);
    return result;
}

}  // namespace bs
