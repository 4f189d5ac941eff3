#include "core/posekit.hpp"

#include <Eigen/SVD>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/adam.hpp"
#include "core/json_io.hpp"
#include "core/losses.hpp"

namespace bs {

using nlohmann::json;

void validate_trajectory(const Trajectory& traj) {
    require(!traj.poses.empty(), "trajectory is empty");
    require(traj.poses.size() == traj.frame_ids.size(), "trajectory id/pose count mismatch");
    for (size_t i = 1; i < traj.frame_ids.size(); ++i)
        require(traj.frame_ids[i] > traj.frame_ids[i - 1],
                "trajectory frame ids must strictly increase");
}

Trajectory load_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_io("cannot open " + path);
    Trajectory traj;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("frame_id") || !j.contains("q") || !j.contains("t"))
            throw_format(path + ":" + std::to_string(line_no) + ": bad trajectory record");
        CameraPose pose;
        pose.q = quat_normalized(Vec4(j["q"][0].get<double>(), j["q"][1].get<double>(),
                                      j["q"][2].get<double>(), j["q"][3].get<double>()));
        pose.t = Vec3(j["t"][0].get<double>(), j["t"][1].get<double>(), j["t"][2].get<double>());
        traj.poses.push_back(pose);
        traj.frame_ids.push_back(j["frame_id"].get<int>());
    }
    validate_trajectory(traj);
    return traj;
}

void save_trajectory(const Trajectory& traj, const std::string& path) {
    validate_trajectory(traj);
    std::ostringstream out;
    char buf[512];
    for (size_t i = 0; i < traj.size(); ++i) {
        const CameraPose& p = traj.poses[i];
        std::snprintf(buf, sizeof(buf),
                      "{\"frame_id\": %d, \"q\": [%.17g, %.17g, %.17g, %.17g], "
                      "\"t\": [%.17g, %.17g, %.17g]}\n",
                      traj.frame_ids[i], p.q[0], p.q[1], p.q[2], p.q[3], p.t[0], p.t[1], p.t[2]);
        out << buf;
    }
    write_text_file(path, out.str());
}

namespace {

ImageBuffer downsample2(const ImageBuffer& img) {
    ImageBuffer out(img.width / 2, img.height / 2, img.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(x, y, c) = 0.25 * (img.at(2 * x, 2 * y, c) + img.at(2 * x + 1, 2 * y, c) +
                                          img.at(2 * x, 2 * y + 1, c) +
                                          img.at(2 * x + 1, 2 * y + 1, c));
    return out;
}

CameraIntrinsics downsample2(const CameraIntrinsics& intr) {
    CameraIntrinsics out = intr;
    out.fx /= 2;
    out.fy /= 2;
    out.cx /= 2;
    out.cy /= 2;
    out.width /= 2;
    out.height /= 2;
    return out;
}

// Single-resolution Adam descent; returns the best pose seen. An incumbent
// (pose, loss) pair seeds the best-so-far tracking, so a caller can hand in
// a known-good pose that descent must beat before the result moves.
PoseOptimResult optimize_level(const GaussianCloud& frozen, const ImageBuffer& target,
                               const CameraPose& init, const CameraIntrinsics& intr,
                               const PoseOptimOptions& opts, int budget,
                               const CameraPose* incumbent = nullptr,
                               double incumbent_loss = 0.0) {
    PoseOptimResult result;
    result.pose = incumbent ? *incumbent : init;
    result.final_loss = incumbent ? incumbent_loss : 0.0;

    AdamState adam_rot, adam_trans;
    adam_rot.init(3);
    adam_trans.init(3);
    CameraPose pose = init;
    double best_loss = incumbent ? incumbent_loss : std::numeric_limits<double>::infinity();
    int stagnant = 0;

    for (int iter = 0; iter <= budget; ++iter) {
        const RenderOutput rendered = render(frozen, pose, intr, opts.render);
        const double loss = loss_image(rendered.color, target, opts.lambda_mix);
        if (!std::isfinite(loss))
            throw PoseDivergence("estimate_pose: non-finite photometric loss at iteration " +
                                     std::to_string(iter),
                                 result.pose, result.final_loss);

        if (loss < best_loss - opts.min_improvement)
            stagnant = 0;
        else
            ++stagnant;
        if (loss < best_loss) {
            best_loss = loss;
            result.pose = pose;
            result.final_loss = loss;
        }
        result.iterations = iter;
        if (iter == budget) break;
        if (stagnant >= opts.patience) {
            result.converged = true;
            break;
        }

        RenderUpstream upstream;
        upstream.d_color = loss_image_backward(rendered.color, target, opts.lambda_mix);
        const RenderGradients grads = render_backward(frozen, pose, intr, upstream, opts.render);

        // Tangent step re-anchored at the current pose each iteration.
        double omega[3] = {0, 0, 0}, trans[3] = {0, 0, 0};
        adam_rot.update(std::span<double>(omega, 3),
                        std::span<const double>(grads.d_pose_omega.data(), 3),
                        opts.lr_rotation);
        adam_trans.update(std::span<double>(trans, 3),
                          std::span<const double>(grads.d_pose_trans.data(), 3),
                          opts.lr_translation);
        pose = pose.perturbed(Vec3(omega[0], omega[1], omega[2]),
                              Vec3(trans[0], trans[1], trans[2]));
    }
    return result;
}

}  // namespace

PoseOptimResult estimate_pose(const GaussianCloud& frozen, const ImageBuffer& target,
                              const CameraPose& init, const CameraIntrinsics& intr,
                              const PoseOptimOptions& opts) {
    require(!frozen.empty(), "estimate_pose: cloud is empty");
    require(target.width == intr.width && target.height == intr.height,
            "estimate_pose: target size does not match intrinsics");
    require(opts.pyramid_levels >= 1, "estimate_pose: need at least one pyramid level");

    // Build the usable pyramid (coarsest last).
    std::vector<ImageBuffer> targets = {target};
    std::vector<CameraIntrinsics> intrs = {intr};
    for (int level = 1; level < opts.pyramid_levels; ++level) {
        const CameraIntrinsics next = downsample2(intrs.back());
        if (std::min(next.width, next.height) < opts.min_level_size) break;
        targets.push_back(downsample2(targets.back()));
        intrs.push_back(next);
    }

    const int levels = static_cast<int>(targets.size());
    const int per_level = std::max(1, opts.max_iters / std::max(1, levels));

    CameraPose pose = init;
    int remaining = opts.max_iters;
    int coarse_iters = 0;
    for (int level = levels - 1; level >= 1 && remaining > 0; --level) {
        const PoseOptimResult coarse = optimize_level(frozen, targets[level], pose, intrs[level],
                                                      opts, std::min(per_level, remaining));
        pose = coarse.pose;
        coarse_iters += coarse.iterations;
        remaining -= coarse.iterations;
    }

    // The full-resolution pass must beat the original init before moving off
    // it; coarse optima are legitimately offset from the fine one.
    const double init_loss =
        loss_image(render(frozen, init, intr, opts.render).color, target, opts.lambda_mix);
    PoseOptimResult result =
        optimize_level(frozen, target, pose, intr, opts, remaining, &init, init_loss);
    result.iterations += coarse_iters;
    if (opts.max_iters == 0) result.pose = init;  // untouched by construction, stated contract
    return result;
}

Trajectory chain_relative(const Trajectory& traj, const CameraPose& rel, int frame_id) {
    validate_trajectory(traj);
    require(frame_id > traj.frame_ids.back(),
            "chain_relative: frame id must exceed the last one");
    Trajectory out = traj;
    out.poses.push_back(rel * traj.poses.back());
    out.frame_ids.push_back(frame_id);
    return out;
}

Alignment procrustes_align(const Trajectory& est, const Trajectory& gt) {
    require(est.size() == gt.size(), "procrustes_align: trajectory lengths differ");
    require(est.size() >= 3, "procrustes_align: need at least 3 poses");
    const int n = static_cast<int>(est.size());

    MatX src(3, n), dst(3, n);
    for (int i = 0; i < n; ++i) {
        src.col(i) = est.poses[i].camera_center();
        dst.col(i) = gt.poses[i].camera_center();
    }
    const Vec3 mu_src = src.rowwise().mean();
    const Vec3 mu_dst = dst.rowwise().mean();
    src.colwise() -= mu_src;
    dst.colwise() -= mu_dst;

    const Mat3 cov = dst * src.transpose() / n;
    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    if (sv[1] <= 1e-12 * std::max(sv[0], 1e-300))
        throw_invalid("procrustes_align: degenerate configuration (collinear camera centers)");

    Vec3 signs(1, 1, 1);
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) signs[2] = -1;
    const Mat3 rot = svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();

    const double var_src = src.squaredNorm() / n;
    if (var_src <= 1e-300)
        throw_invalid("procrustes_align: degenerate configuration (coincident camera centers)");
    const double scale = sv.dot(signs) / var_src;
    const Vec3 trans = mu_dst - scale * rot * mu_src;

    Alignment out;
    out.scale = scale;
    out.rotation = rot;
    out.translation = trans;
    out.aligned = est;
    for (size_t i = 0; i < est.size(); ++i) {
        const Mat3 r_cw = est.poses[i].rotation() * rot.transpose();
        const Vec3 center = scale * rot * est.poses[i].camera_center() + trans;
        out.aligned.poses[i].q = rot_to_quat(r_cw);
        out.aligned.poses[i].t = -(r_cw * center);
    }
    return out;
}

TrajectoryMetrics trajectory_metrics(const Trajectory& est_aligned, const Trajectory& gt) {
    require(est_aligned.size() == gt.size(), "trajectory_metrics: lengths differ");
    require(!gt.poses.empty(), "trajectory_metrics: empty trajectories");
    const size_t n = est_aligned.size();

    TrajectoryMetrics m;
    double ate_sq = 0;
    for (size_t i = 0; i < n; ++i)
        ate_sq += (est_aligned.poses[i].camera_center() - gt.poses[i].camera_center()).squaredNorm();
    m.ate = std::sqrt(ate_sq / n);

    if (n < 2) return m;
    double t_sq = 0, r_sq = 0;
    for (size_t i = 0; i + 1 < n; ++i) {
        const CameraPose rel_est = est_aligned.poses[i + 1] * est_aligned.poses[i].inverse();
        const CameraPose rel_gt = gt.poses[i + 1] * gt.poses[i].inverse();
        t_sq += (rel_est.t - rel_gt.t).squaredNorm();
        const double angle = rotation_angle(rel_est.rotation() * rel_gt.rotation().transpose());
        r_sq += angle * angle;
    }
    m.rpe_t = std::sqrt(t_sq / (n - 1));
    m.rpe_r = std::sqrt(r_sq / (n - 1)) * kDegPerRad;
    return m;
}

}  // namespace bs
