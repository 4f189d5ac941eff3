#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/losses.hpp"
#include "core/ssim.hpp"
#include "oracles.hpp"

using namespace bs;

namespace {

ImageBuffer random_image(oracle::SceneRng& rng, int w, int h, int c = 3) {
    ImageBuffer img(w, h, c);
    for (double& v : img.data) v = rng.uniform(0, 1);
    return img;
}

ImageBuffer checkerboard(int w, int h) {
    ImageBuffer img(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = ((x / 2 + y / 2) % 2) ? 0.9 : 0.1;
    return img;
}

}  // namespace

TEST_CASE("ssim: identical images score 1") {
    oracle::SceneRng rng(51);
    const ImageBuffer img = random_image(rng, 16, 16);
    CHECK(ssim(img, img) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim: matches the sliding-window reference on 5 random pairs") {
    oracle::SceneRng rng(52);
    for (int trial = 0; trial < 5; ++trial) {
        const ImageBuffer a = random_image(rng, 20, 14);
        const ImageBuffer b = random_image(rng, 20, 14);
        CHECK(std::abs(ssim(a, b) - oracle::ssim_reference(a, b)) < 1e-6);
    }
}

TEST_CASE("ssim: high-contrast image vs its negative scores low") {
    const ImageBuffer img = checkerboard(24, 24);
    ImageBuffer neg = img;
    for (double& v : neg.data) v = 1.0 - v;
    CHECK(ssim(img, neg) < 0.1);
}

TEST_CASE("ssim: symmetric within 1e-9 and errors when under the window") {
    oracle::SceneRng rng(53);
    const ImageBuffer a = random_image(rng, 13, 17);
    const ImageBuffer b = random_image(rng, 13, 17);
    CHECK(std::abs(ssim(a, b) - ssim(b, a)) < 1e-9);
    const ImageBuffer tiny = random_image(rng, 8, 8);
    CHECK_THROWS_AS(ssim(tiny, tiny), Error);
}

TEST_CASE("ssim_backward: matches finite differences") {
    oracle::SceneRng rng(54);
    ImageBuffer a = random_image(rng, 13, 12, 1);
    const ImageBuffer b = random_image(rng, 13, 12, 1);
    const std::vector<double> grad = ssim_backward(a, b);
    for (int trial = 0; trial < 25; ++trial) {
        const size_t i = static_cast<size_t>(rng.uniform(0, static_cast<double>(a.data.size())));
        const double fd = oracle::central_diff([&](double v) { a.data[i] = v; },
                                               [&] { return ssim(a, b); }, a.data[i], 1e-5);
        CHECK(oracle::rel_error(grad[i], fd) < 1e-5);
    }
}

TEST_CASE("loss_image: zero for identical inputs") {
    oracle::SceneRng rng(55);
    const ImageBuffer img = random_image(rng, 16, 16);
    CHECK(loss_image(img, img, 0.2) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("loss_image: constant offset on a flat image") {
    ImageBuffer target(16, 16, 3, 0.4);
    ImageBuffer pred(16, 16, 3, 0.5);
    // L1 term: 0.2 * 0.1. SSIM term checked against the reference directly.
    const double ref_dssim = (1.0 - oracle::ssim_reference(pred, target)) / 2.0;
    CHECK(loss_image(pred, target, 0.2) ==
          doctest::Approx(0.2 * 0.1 + 0.8 * ref_dssim).epsilon(1e-9));
}

TEST_CASE("loss_image: lambda = 1 reduces to mean absolute error") {
    oracle::SceneRng rng(56);
    const ImageBuffer a = random_image(rng, 12, 9);
    const ImageBuffer b = random_image(rng, 12, 9);
    double l1 = 0;
    for (size_t i = 0; i < a.data.size(); ++i) l1 += std::abs(a.data[i] - b.data[i]);
    l1 /= a.data.size();
    CHECK(loss_image(a, b, 1.0) == doctest::Approx(l1).epsilon(1e-12));
}

TEST_CASE("loss_image: dimension mismatch rejected") {
    ImageBuffer a(16, 16, 3), b(16, 15, 3);
    CHECK_THROWS_AS(loss_image(a, b, 0.2), Error);
}

TEST_CASE("loss_image_backward: matches finite differences") {
    oracle::SceneRng rng(57);
    ImageBuffer pred = random_image(rng, 13, 13);
    const ImageBuffer target = random_image(rng, 13, 13);
    const std::vector<double> grad = loss_image_backward(pred, target, 0.2);
    for (int trial = 0; trial < 20; ++trial) {
        const size_t i =
            static_cast<size_t>(rng.uniform(0, static_cast<double>(pred.data.size())));
        const double fd =
            oracle::central_diff([&](double v) { pred.data[i] = v; },
                                 [&] { return loss_image(pred, target, 0.2); }, pred.data[i], 1e-5);
        CHECK(oracle::rel_error(grad[i], fd) < 1e-4);
    }
}

TEST_CASE("loss_depth: identical, constant offset, sentinel exclusion") {
    DepthMap a(8, 8, 5.0), b(8, 8, 5.0);
    CHECK(loss_depth(a, b) == 0.0);

    DepthMap pred(8, 8, 5.5);
    CHECK(loss_depth(pred, a) == doctest::Approx(0.5));

    DepthMap ref(8, 8, 5.0);
    ref.at(0, 0) = DepthMap::kNoSurface;
    pred.at(0, 0) = 100.0;  // excluded pixel must not contribute
    CHECK(loss_depth(pred, ref) == doctest::Approx(0.5));

    DepthMap all_invalid(8, 8, DepthMap::kNoSurface);
    bool no_valid = false;
    CHECK(loss_depth(pred, all_invalid, &no_valid) == 0.0);
    CHECK(no_valid);
}

TEST_CASE("loss_depth: random maps match the per-pixel oracle") {
    oracle::SceneRng rng(58);
    DepthMap pred(9, 7), ref(9, 7);
    for (double& v : pred.data) v = rng.uniform(0.1, 10);
    for (double& v : ref.data) v = rng.uniform(0.1, 10);
    ref.data[11] = DepthMap::kNoSurface;
    double want = 0;
    int n = 0;
    for (size_t i = 0; i < ref.data.size(); ++i) {
        if (ref.data[i] == DepthMap::kNoSurface) continue;
        want += std::abs(pred.data[i] - ref.data[i]);
        ++n;
    }
    CHECK(loss_depth(pred, ref) == doctest::Approx(want / n).epsilon(1e-12));
}

TEST_CASE("loss_pose_reg: closed form at the clamp") {
    GaussianCloud cloud;
    cloud.sh_degree = 0;
    const double eps = 1e-2;
    Gaussian3D g;
    g.sh = {0, 0, 0};
    g.log_scale.setConstant(std::log(eps));
    cloud.gaussians.push_back(g);
    CHECK(loss_pose_reg(cloud, eps) == doctest::Approx(std::sqrt(3.0) * eps).epsilon(1e-9));

    // Scales below the clamp give the same value.
    cloud.gaussians[0].log_scale.setConstant(std::log(1e-9));
    CHECK(loss_pose_reg(cloud, eps) == doctest::Approx(std::sqrt(3.0) * eps).epsilon(1e-9));
}

TEST_CASE("loss_pose_reg: random cloud matches the scalar oracle") {
    oracle::SceneRng rng(59);
    const GaussianCloud cloud = oracle::random_cloud(rng, 25, 0);
    const double eps = 0.05;
    double want = 0;
    for (const Gaussian3D& g : cloud.gaussians) {
        double sq = 0;
        for (int c = 0; c < 3; ++c) {
            const double s = std::max(std::exp(g.log_scale[c]), eps);
            sq += s * s;
        }
        want += std::sqrt(sq);
    }
    want /= cloud.size();
    CHECK(loss_pose_reg(cloud, eps) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("loss_pose_reg_backward: matches finite differences away from the clamp") {
    oracle::SceneRng rng(60);
    GaussianCloud cloud = oracle::random_cloud(rng, 6, 0);
    const double eps = 1e-3;  // all scales comfortably above it
    std::vector<Vec3> grad(cloud.size(), Vec3::Zero());
    loss_pose_reg_backward(cloud, eps, 1.0, grad);
    for (size_t i = 0; i < cloud.size(); ++i)
        for (int c = 0; c < 3; ++c) {
            const double fd = oracle::central_diff(
                [&](double v) { cloud.gaussians[i].log_scale[c] = v; },
                [&] { return loss_pose_reg(cloud, eps); }, cloud.gaussians[i].log_scale[c], 1e-6);
            CHECK(oracle::rel_error(grad[i][c], fd) < 1e-6);
        }
}

TEST_CASE("total_loss: paper weights and error naming") {
    LossWeights w;  // lambda_depth = 0.01, lambda_pose = 1
    CHECK(total_loss(0, 0, 0, w) == 0.0);
    CHECK(total_loss(0.5, 1.0, 0.2, w) == doctest::Approx(0.71).epsilon(1e-12));

    oracle::SceneRng rng(61);
    for (int i = 0; i < 20; ++i) {
        const double a = rng.uniform(0, 2), b = rng.uniform(0, 2), c = rng.uniform(0, 2);
        CHECK(total_loss(a, b, c, w) ==
              doctest::Approx(a + 0.01 * b + 1.0 * c).epsilon(1e-12));
    }

    try {
        total_loss(std::numeric_limits<double>::quiet_NaN(), 0, 0, w);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("image") != std::string::npos);
    }
    try {
        total_loss(0, 0, std::numeric_limits<double>::infinity(), w);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("pose") != std::string::npos);
    }
}
