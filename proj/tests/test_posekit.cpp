#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "core/losses.hpp"
#include "core/posekit.hpp"
#include "core/rasterizer.hpp"
#include "oracles.hpp"

using namespace bs;

namespace {

Trajectory random_trajectory(oracle::SceneRng& rng, int n) {
    Trajectory traj;
    CameraPose pose;
    for (int i = 0; i < n; ++i) {
        pose = pose.perturbed(Vec3(rng.normal(), rng.normal(), rng.normal()).normalized() *
                                  rng.uniform(0.0, 0.2),
                              Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                                   rng.uniform(-0.5, 0.5)));
        traj.poses.push_back(pose);
        traj.frame_ids.push_back(i);
    }
    return traj;
}

Trajectory apply_similarity(const Trajectory& traj, double s, const Mat3& r, const Vec3& t) {
    Trajectory out = traj;
    for (size_t i = 0; i < traj.size(); ++i) {
        const Mat3 r_cw = traj.poses[i].rotation() * r.transpose();
        const Vec3 center = s * r * traj.poses[i].camera_center() + t;
        out.poses[i].q = rot_to_quat(r_cw);
        out.poses[i].t = -(r_cw * center);
    }
    return out;
}

}  // namespace

TEST_CASE("estimate_pose: fixed point at the true pose") {
    oracle::SceneRng rng(91);
    const GaussianCloud cloud = oracle::random_cloud(rng, 40, 1);
    const CameraIntrinsics intr = oracle::test_intrinsics(32, 40);
    const CameraPose pose = oracle::random_pose(rng, 0.05, 0.1);
    const ImageBuffer target = render(cloud, pose, intr).color;

    PoseOptimOptions opts;
    opts.max_iters = 100;
    const PoseOptimResult result = estimate_pose(cloud, target, pose, intr, opts);
    CHECK(result.converged);
    CHECK(result.final_loss < 1e-9);
    const double angle = rotation_angle(result.pose.rotation() * pose.rotation().transpose());
    CHECK(angle < 1e-3);
    CHECK((result.pose.camera_center() - pose.camera_center()).norm() < 1e-4);
}

TEST_CASE("estimate_pose: zero-iteration budget returns init unchanged") {
    oracle::SceneRng rng(92);
    const GaussianCloud cloud = oracle::random_cloud(rng, 10, 1);
    const CameraIntrinsics intr = oracle::test_intrinsics();
    const CameraPose init = oracle::random_pose(rng, 0.02, 0.05);
    const ImageBuffer target = render(cloud, CameraPose{}, intr).color;

    PoseOptimOptions opts;
    opts.max_iters = 0;
    const PoseOptimResult result = estimate_pose(cloud, target, init, intr, opts);
    CHECK_FALSE(result.converged);
    CHECK(result.iterations == 0);
    CHECK((result.pose.q - init.q).norm() == 0.0);
    CHECK((result.pose.t - init.t).norm() == 0.0);
}

TEST_CASE("estimate_pose: final loss never exceeds the initial loss") {
    oracle::SceneRng rng(93);
    const GaussianCloud cloud = oracle::random_cloud(rng, 30, 1);
    const CameraIntrinsics intr = oracle::test_intrinsics(32, 40);
    const ImageBuffer target = render(cloud, CameraPose{}, intr).color;
    const CameraPose init =
        CameraPose{}.perturbed(Vec3(0.01, -0.015, 0.008), Vec3(0.02, -0.01, 0.02));

    PoseOptimOptions opts;
    opts.max_iters = 60;
    const PoseOptimResult result = estimate_pose(cloud, target, init, intr, opts);
    const double initial_loss = loss_image(render(cloud, init, intr).color, target, 0.2);
    CHECK(result.final_loss <= initial_loss + 1e-12);
}

TEST_CASE("chain_relative: identity and pure translations") {
    Trajectory traj;
    traj.poses.push_back(CameraPose{});
    traj.frame_ids.push_back(0);

    Trajectory chained = chain_relative(traj, CameraPose{}, 1);
    CHECK((chained.poses[1].t - Vec3::Zero()).norm() == 0.0);

    CameraPose step;
    step.t = Vec3(0, 0, 1);
    chained = chain_relative(chained, step, 2);
    chained = chain_relative(chained, step, 3);
    CHECK((chained.poses[3].t - Vec3(0, 0, 2)).norm() < 1e-15);

    CHECK_THROWS_AS(chain_relative(chained, step, 2), Error);
}

TEST_CASE("chain_relative: random chain matches the 4x4 matrix oracle") {
    oracle::SceneRng rng(94);
    Trajectory traj;
    traj.poses.push_back(oracle::random_pose(rng));
    traj.frame_ids.push_back(0);
    Mat4 product = traj.poses[0].matrix();
    for (int i = 1; i <= 10; ++i) {
        const CameraPose rel = oracle::random_pose(rng, 0.3, 0.5);
        traj = chain_relative(traj, rel, i);
        product = rel.matrix() * product;
        CHECK((traj.poses.back().matrix() - product).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("chain_relative: composing a*b equals chaining b then a") {
    oracle::SceneRng rng(95);
    const CameraPose a = oracle::random_pose(rng, 0.4, 1.0);
    const CameraPose b = oracle::random_pose(rng, 0.4, 1.0);
    Trajectory traj;
    traj.poses.push_back(CameraPose{});
    traj.frame_ids.push_back(0);

    const Trajectory two_steps = chain_relative(chain_relative(traj, b, 1), a, 2);
    const Trajectory one_step = chain_relative(traj, a * b, 1);
    CHECK((two_steps.poses[2].matrix() - one_step.poses[1].matrix()).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("procrustes: est equal to gt recovers the identity") {
    oracle::SceneRng rng(96);
    const Trajectory traj = random_trajectory(rng, 8);
    const Alignment a = procrustes_align(traj, traj);
    CHECK(a.scale == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((a.rotation - Mat3::Identity()).norm() < 1e-9);
    CHECK(a.translation.norm() < 1e-9);
    const TrajectoryMetrics m = trajectory_metrics(a.aligned, traj);
    CHECK(m.ate < 1e-9);
}

TEST_CASE("procrustes: undoes a known similarity exactly") {
    oracle::SceneRng rng(97);
    const Trajectory gt = random_trajectory(rng, 10);
    const Mat3 rot90 = so3_exp(Vec3(0, 0, M_PI / 2));
    const Trajectory est = apply_similarity(gt, 2.0, rot90, Vec3(1, -2, 3));

    const Alignment a = procrustes_align(est, gt);
    CHECK(a.scale == doctest::Approx(0.5).epsilon(1e-9));
    CHECK((a.rotation - rot90.transpose()).norm() < 1e-9);
    for (size_t i = 0; i < gt.size(); ++i)
        CHECK((a.aligned.poses[i].camera_center() - gt.poses[i].camera_center()).norm() < 1e-9);
}

TEST_CASE("procrustes: noisy similarity recovered to noise level") {
    oracle::SceneRng rng(98);
    const Trajectory gt = random_trajectory(rng, 20);
    Mat3 rot = so3_exp(Vec3(0.3, -0.2, 0.9));
    Trajectory est = apply_similarity(gt, 1.7, rot, Vec3(0.4, 0.1, -0.6));
    for (CameraPose& p : est.poses) p.t += Vec3(rng.normal(), rng.normal(), rng.normal()) * 1e-3;

    const Alignment a = procrustes_align(est, gt);
    double rms = 0;
    for (size_t i = 0; i < gt.size(); ++i)
        rms += (a.aligned.poses[i].camera_center() - gt.poses[i].camera_center()).squaredNorm();
    rms = std::sqrt(rms / gt.size());
    CHECK(rms <= 3e-3);
}

TEST_CASE("procrustes: collinear centers are a degenerate-configuration error") {
    Trajectory line;
    for (int i = 0; i < 5; ++i) {
        CameraPose p;
        p.t = Vec3(0, 0, -double(i));  // centers on the z axis
        line.poses.push_back(p);
        line.frame_ids.push_back(i);
    }
    CHECK_THROWS_AS(procrustes_align(line, line), Error);
}

TEST_CASE("trajectory_metrics: identical trajectories give zeros") {
    oracle::SceneRng rng(99);
    const Trajectory traj = random_trajectory(rng, 7);
    const TrajectoryMetrics m = trajectory_metrics(traj, traj);
    CHECK(m.ate == 0.0);
    CHECK(m.rpe_t == 0.0);
    CHECK(m.rpe_r < 1e-9);
}

TEST_CASE("trajectory_metrics: constant center offset leaves relatives untouched") {
    oracle::SceneRng rng(100);
    const Trajectory gt = random_trajectory(rng, 6);
    Trajectory est = gt;
    for (CameraPose& p : est.poses) {
        const Vec3 center = p.camera_center() + Vec3(0.1, 0, 0);
        p.t = -(p.rotation() * center);
    }
    const TrajectoryMetrics m = trajectory_metrics(est, gt);
    CHECK(m.ate == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(m.rpe_r < 1e-9);
}

TEST_CASE("trajectory_metrics: matches the per-definition oracle") {
    oracle::SceneRng rng(101);
    const Trajectory gt = random_trajectory(rng, 10);
    const Trajectory est = random_trajectory(rng, 10);
    const TrajectoryMetrics m = trajectory_metrics(est, gt);

    double ate = 0;
    for (size_t i = 0; i < 10; ++i) {
        const Vec3 ce = -est.poses[i].rotation().transpose() * est.poses[i].t;
        const Vec3 cg = -gt.poses[i].rotation().transpose() * gt.poses[i].t;
        ate += (ce - cg).squaredNorm();
    }
    ate = std::sqrt(ate / 10);
    CHECK(m.ate == doctest::Approx(ate).epsilon(1e-12));

    double t_sq = 0, r_sq = 0;
    for (size_t i = 0; i + 1 < 10; ++i) {
        const Mat4 de = est.poses[i + 1].matrix() * est.poses[i].matrix().inverse();
        const Mat4 dg = gt.poses[i + 1].matrix() * gt.poses[i].matrix().inverse();
        t_sq += (de.topRightCorner<3, 1>() - dg.topRightCorner<3, 1>()).squaredNorm();
        const Mat3 dr = de.topLeftCorner<3, 3>() * dg.topLeftCorner<3, 3>().transpose();
        const double angle = std::acos(std::clamp((dr.trace() - 1) / 2, -1.0, 1.0));
        r_sq += angle * angle;
    }
    CHECK(m.rpe_t == doctest::Approx(std::sqrt(t_sq / 9)).epsilon(1e-9));
    CHECK(m.rpe_r == doctest::Approx(std::sqrt(r_sq / 9) * 180 / M_PI).epsilon(1e-9));
}

TEST_CASE("alignment is invariant to pre-applied similarity transforms") {
    oracle::SceneRng rng(102);
    const Trajectory gt = random_trajectory(rng, 9);
    Trajectory est = random_trajectory(rng, 9);

    const TrajectoryMetrics base = trajectory_metrics(procrustes_align(est, gt).aligned, gt);
    const Trajectory warped = apply_similarity(est, 3.1, so3_exp(Vec3(0.2, 0.8, -0.4)),
                                               Vec3(5, -1, 2));
    const TrajectoryMetrics warped_m =
        trajectory_metrics(procrustes_align(warped, gt).aligned, gt);
    CHECK(std::abs(base.ate - warped_m.ate) < 1e-9);
    CHECK(std::abs(base.rpe_t - warped_m.rpe_t) < 1e-9);
    CHECK(std::abs(base.rpe_r - warped_m.rpe_r) < 1e-9);
}

TEST_CASE("trajectory jsonl round-trip") {
    oracle::SceneRng rng(103);
    const Trajectory traj = random_trajectory(rng, 5);
    const auto dir = std::filesystem::path("test_tmp") / "posekit";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "traj.jsonl").string();
    save_trajectory(traj, path);
    const Trajectory loaded = load_trajectory(path);
    REQUIRE(loaded.size() == traj.size());
    for (size_t i = 0; i < traj.size(); ++i) {
        CHECK(loaded.frame_ids[i] == traj.frame_ids[i]);
        CHECK((loaded.poses[i].q - traj.poses[i].q).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((loaded.poses[i].t - traj.poses[i].t).cwiseAbs().maxCoeff() < 1e-15);
    }
}
