#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/parallel.hpp"
#include "core/rasterizer.hpp"
#include "core/sh.hpp"
#include "oracles.hpp"

using namespace bs;

namespace {

GaussianCloud single_gaussian(const Vec3& pos, double scale, double opacity, const Vec3& rgb) {
    GaussianCloud cloud;
    cloud.sh_degree = 0;
    Gaussian3D g;
    g.position = pos;
    g.log_scale.setConstant(std::log(scale));
    g.opacity_logit = logit(opacity);
    g.sh = {(rgb[0] - 0.5) / kSH0, (rgb[1] - 0.5) / kSH0, (rgb[2] - 0.5) / kSH0};
    cloud.gaussians.push_back(g);
    return cloud;
}

}  // namespace

TEST_CASE("project: on-axis gaussian lands at the principal point") {
    const GaussianCloud cloud = single_gaussian(Vec3(0, 0, 5), 0.1, 0.8, Vec3(1, 0, 0));
    CameraIntrinsics intr;
    intr.fx = intr.fy = 100;
    intr.cx = intr.cy = 32;
    intr.width = intr.height = 64;
    const ProjectResult res = project(cloud, CameraPose{}, intr);
    REQUIRE(res.visible[0] == 1);
    CHECK(res.gaussians[0].mean2d.x() == doctest::Approx(32.0));
    CHECK(res.gaussians[0].mean2d.y() == doctest::Approx(32.0));
    CHECK(res.gaussians[0].depth == doctest::Approx(5.0));
}

TEST_CASE("project: gaussian behind the camera is masked") {
    const GaussianCloud cloud = single_gaussian(Vec3(0, 0, -1), 0.1, 0.8, Vec3(1, 0, 0));
    const ProjectResult res = project(cloud, CameraPose{}, oracle::test_intrinsics());
    CHECK(res.visible[0] == 0);
}

TEST_CASE("project: isotropic covariance follows the perspective Jacobian") {
    // Sigma = I at z = 2 with fx = fy = 100 gives cov2d = (100/2)^2 I + floor.
    const GaussianCloud cloud = single_gaussian(Vec3(0, 0, 2), 1.0, 0.5, Vec3(0.5, 0.5, 0.5));
    CameraIntrinsics intr;
    intr.fx = intr.fy = 100;
    intr.cx = intr.cy = 32;
    intr.width = intr.height = 64;
    const ProjectResult res = project(cloud, CameraPose{}, intr);
    const Mat2 want = 2500.0 * Mat2::Identity() + kLowPassFloor * Mat2::Identity();
    CHECK((res.gaussians[0].cov2d - want).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("render: fully masked cloud gives background, zero alpha, sentinel depth") {
    const GaussianCloud cloud = single_gaussian(Vec3(0, 0, -2), 0.1, 0.9, Vec3(1, 1, 1));
    RenderOptions opts;
    opts.background = Vec3(0.25, 0.5, 0.75);
    const RenderOutput out = render(cloud, CameraPose{}, oracle::test_intrinsics(), opts);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            CHECK(out.color.at(x, y, 0) == doctest::Approx(0.25));
            CHECK(out.color.at(x, y, 2) == doctest::Approx(0.75));
            CHECK(out.accum_alpha.at(x, y, 0) == 0.0);
            CHECK(out.depth.at(x, y) == DepthMap::kNoSurface);
        }
}

TEST_CASE("render: single opaque on-axis gaussian saturates at the alpha cap") {
    // sigma -> 1 and a large footprint: the center pixel alpha hits 0.99.
    const GaussianCloud cloud = single_gaussian(Vec3(0, 0, 5), 3.0, 0.999999, Vec3(0.9, 0.1, 0.2));
    CameraIntrinsics intr = oracle::test_intrinsics(16, 100);
    RenderOptions opts;
    opts.background = Vec3(0.0, 0.0, 1.0);
    const RenderOutput out = render(cloud, CameraPose{}, intr, opts);
    const int cx = 8, cy = 8;
    CHECK(out.depth.at(cx, cy) == doctest::Approx(0.99 * 5.0).epsilon(1e-6));
    CHECK(out.color.at(cx, cy, 0) == doctest::Approx(0.99 * 0.9).epsilon(1e-5));
    CHECK(out.color.at(cx, cy, 2) == doctest::Approx(0.99 * 0.2 + 0.01 * 1.0).epsilon(1e-4));
    CHECK(out.accum_alpha.at(cx, cy, 0) == doctest::Approx(0.99));
}

TEST_CASE("render: 10 random gaussians match the naive oracle within 4e-3") {
    for (uint64_t seed : {31, 32, 33, 34, 35}) {
        oracle::SceneRng rng(seed);
        const GaussianCloud cloud = oracle::random_cloud(rng, 10, 1);
        const CameraIntrinsics intr = oracle::test_intrinsics();
        const CameraPose pose = oracle::random_pose(rng);
        RenderOptions opts;
        opts.background = Vec3(0.1, 0.1, 0.1);
        const RenderOutput out = render(cloud, pose, intr, opts);
        const auto naive = oracle::naive_render(cloud, pose, intr, opts.background);
        for (int y = 0; y < intr.height; ++y)
            for (int x = 0; x < intr.width; ++x) {
                const auto& px = naive[static_cast<size_t>(y) * intr.width + x];
                for (int c = 0; c < 3; ++c)
                    CHECK(std::abs(out.color.at(x, y, c) - px.color[c]) < 4e-3);
            }
    }
}

TEST_CASE("render: transmittance telescoping without early termination") {
    oracle::SceneRng rng(36);
    const GaussianCloud cloud = oracle::random_cloud(rng, 15, 1);
    const CameraIntrinsics intr = oracle::test_intrinsics();
    RenderOptions opts;
    opts.early_termination = false;
    opts.background = Vec3::Zero();
    const RenderOutput out = render(cloud, CameraPose{}, intr, opts);
    // With a black background: sum(alpha_i T_i) = accum_alpha and the
    // telescoping identity makes accum + T_final = 1 exactly.
    for (int y = 0; y < intr.height; ++y)
        for (int x = 0; x < intr.width; ++x) {
            const double accum = out.accum_alpha.at(x, y, 0);
            CHECK(accum >= 0.0);
            CHECK(accum <= 1.0 + 1e-12);
        }
}

TEST_CASE("render: front-to-back agrees with back-to-front over compositing") {
    oracle::SceneRng rng(37);
    const GaussianCloud cloud = oracle::random_cloud(rng, 12, 1);
    const CameraIntrinsics intr = oracle::test_intrinsics();
    const auto fwd = oracle::naive_render(cloud, CameraPose{}, intr, Vec3(0.2, 0.3, 0.4), false);
    const auto bwd = oracle::naive_render(cloud, CameraPose{}, intr, Vec3(0.2, 0.3, 0.4), true);
    for (size_t i = 0; i < fwd.size(); ++i) {
        CHECK((fwd[i].color - bwd[i].color).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(std::abs(fwd[i].depth - bwd[i].depth) < 1e-6);
        CHECK(std::abs(fwd[i].accum_alpha - bwd[i].accum_alpha) < 1e-6);
    }
}

TEST_CASE("render: single-gaussian depth equals accum_alpha times its depth") {
    const GaussianCloud cloud = single_gaussian(Vec3(0.1, -0.2, 4), 0.4, 0.7, Vec3(0.6, 0.6, 0.6));
    const CameraIntrinsics intr = oracle::test_intrinsics();
    const RenderOutput out = render(cloud, CameraPose{}, intr);
    for (int y = 0; y < intr.height; ++y)
        for (int x = 0; x < intr.width; ++x)
            CHECK(out.depth.at(x, y) ==
                  doctest::Approx(out.accum_alpha.at(x, y, 0) * 4.0).epsilon(1e-9));
}

TEST_CASE("render: deterministic and thread-count invariant") {
    oracle::SceneRng rng(38);
    const GaussianCloud cloud = oracle::random_cloud(rng, 40, 1);
    const CameraIntrinsics intr = oracle::test_intrinsics(48, 60);
    const CameraPose pose = oracle::random_pose(rng);

    set_thread_count(1);
    const RenderOutput a = render(cloud, pose, intr);
    const RenderOutput b = render(cloud, pose, intr);
    CHECK(a.color.data == b.color.data);

    set_thread_count(4);
    const RenderOutput c = render(cloud, pose, intr);
    set_thread_count(1);
    CHECK(a.color.data == c.color.data);
    CHECK(a.depth.data == c.depth.data);
}

TEST_CASE("render: empty cloud is a precondition error") {
    CHECK_THROWS_AS(render(GaussianCloud{}, CameraPose{}, oracle::test_intrinsics()), Error);
}

TEST_CASE("render: ties in depth are broken by index, matching the oracle") {
    // Two gaussians at the same depth on purpose.
    GaussianCloud cloud = single_gaussian(Vec3(-0.05, 0, 4), 0.3, 0.8, Vec3(1, 0, 0));
    GaussianCloud second = single_gaussian(Vec3(0.05, 0, 4), 0.3, 0.8, Vec3(0, 1, 0));
    cloud.gaussians.push_back(second.gaussians[0]);
    const CameraIntrinsics intr = oracle::test_intrinsics();
    const RenderOutput out = render(cloud, CameraPose{}, intr);
    const auto naive = oracle::naive_render(cloud, CameraPose{}, intr);
    for (int y = 0; y < intr.height; ++y)
        for (int x = 0; x < intr.width; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(std::abs(out.color.at(x, y, c) -
                               naive[static_cast<size_t>(y) * intr.width + x].color[c]) < 4e-3);
}
