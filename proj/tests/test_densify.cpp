#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/densify.hpp"
#include "core/kdtree.hpp"
#include "oracles.hpp"

using namespace bs;

namespace {

GaussianCloud cloud_from_points(const std::vector<Vec3>& points, uint64_t seed = 1) {
    oracle::SceneRng rng(seed);
    GaussianCloud cloud = oracle::random_cloud(rng, static_cast<int>(points.size()), 1);
    for (size_t i = 0; i < points.size(); ++i) cloud.gaussians[i].position = points[i];
    return cloud;
}

std::vector<Vec3> positions_of(const GaussianCloud& cloud) {
    std::vector<Vec3> out;
    for (const auto& g : cloud.gaussians) out.push_back(g.position);
    return out;
}

}  // namespace

TEST_CASE("knn_query: hand-checkable three points") {
    const std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}, {5, 0, 0}};
    const auto hits = knn_query(pts, Vec3(0.9, 0, 0), 2);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].first == 1);
    CHECK(hits[0].second == doctest::Approx(0.1));
    CHECK(hits[1].first == 0);
    CHECK(hits[1].second == doctest::Approx(0.9));
}

TEST_CASE("knn_query: query equal to a point returns it first at distance 0") {
    const std::vector<Vec3> pts = {{0, 0, 0}, {1, 1, 1}, {2, 0, 1}};
    const auto hits = knn_query(pts, Vec3(1, 1, 1), 3);
    CHECK(hits[0].first == 1);
    CHECK(hits[0].second == 0.0);
}

TEST_CASE("knn_query: k beyond point count is an argument error") {
    const std::vector<Vec3> pts = {{0, 0, 0}};
    CHECK_THROWS_AS(knn_query(pts, Vec3::Zero(), 2), Error);
}

TEST_CASE("knn_query: 200 random points match the exhaustive scan exactly") {
    oracle::SceneRng rng(21);
    std::vector<Vec3> pts(200);
    for (auto& p : pts) p = Vec3(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 q(rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(-6, 6));
        const auto got = knn_query(pts, q, 4);
        const auto want = oracle::knn_scan(pts, q, 4);
        REQUIRE(got.size() == want.size());
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].first == want[i].first);
            CHECK(got[i].second == doctest::Approx(want[i].second).epsilon(1e-12));
        }
    }
}

TEST_CASE("kdtree: matches the scan on larger sets, including duplicates") {
    oracle::SceneRng rng(22);
    std::vector<Vec3> pts(600);
    for (auto& p : pts) p = Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    // Ties: exact duplicates must resolve by lower index on both paths.
    pts[100] = pts[50];
    pts[200] = pts[50];
    const KdTree3 tree(pts);
    for (int trial = 0; trial < 40; ++trial) {
        const Vec3 q = trial == 0 ? pts[50]
                                  : Vec3(rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4));
        const auto got = tree.knn(q, 6);
        const auto want = oracle::knn_scan(pts, q, 6);
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].first == want[i].first);
            CHECK(got[i].second == doctest::Approx(want[i].second).epsilon(1e-12));
        }
    }
}

TEST_CASE("densify: n_new = 0 is the identity") {
    oracle::SceneRng rng(23);
    const GaussianCloud sparse = oracle::random_cloud(rng, 20, 1);
    DensifyConfig cfg;
    cfg.n_new = 0;
    const GaussianCloud dense = densify_cloud(sparse, cfg);
    REQUIRE(dense.size() == sparse.size());
    for (size_t i = 0; i < sparse.size(); ++i)
        CHECK(dense.gaussians[i].position == sparse.gaussians[i].position);
}

TEST_CASE("densify: paper defaults keep every accepted point within t_d") {
    oracle::SceneRng rng(24);
    std::vector<Vec3> pts(100);
    for (auto& p : pts) p = Vec3(rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4));
    const GaussianCloud sparse = cloud_from_points(pts);

    DensifyConfig cfg;  // K = 4, t_d = 2 defaults
    cfg.n_new = 8;
    cfg.seed = 99;
    const GaussianCloud dense = densify_cloud(sparse, cfg);
    CHECK(dense.size() > sparse.size());

    for (size_t i = sparse.size(); i < dense.size(); ++i) {
        const auto nn = oracle::knn_scan(pts, dense.gaussians[i].position, 1);
        CHECK(nn[0].second <= cfg.dist_threshold);
    }
}

TEST_CASE("densify: sparse prefix is bitwise unchanged and output grows") {
    oracle::SceneRng rng(25);
    const GaussianCloud sparse = oracle::random_cloud(rng, 40, 1);
    DensifyConfig cfg;
    cfg.n_new = 4;
    const GaussianCloud dense = densify_cloud(sparse, cfg);
    REQUIRE(dense.size() >= sparse.size());
    for (size_t i = 0; i < sparse.size(); ++i) {
        CHECK(dense.gaussians[i].position == sparse.gaussians[i].position);
        CHECK(dense.gaussians[i].rotation == sparse.gaussians[i].rotation);
        CHECK(dense.gaussians[i].log_scale == sparse.gaussians[i].log_scale);
        CHECK(dense.gaussians[i].opacity_logit == sparse.gaussians[i].opacity_logit);
        CHECK(dense.gaussians[i].sh == sparse.gaussians[i].sh);
    }
}

TEST_CASE("densify: attributes come from the brute-force nearest neighbor") {
    oracle::SceneRng rng(26);
    const GaussianCloud sparse = oracle::random_cloud(rng, 60, 1);
    const std::vector<Vec3> pts = positions_of(sparse);

    DensifyConfig cfg;
    cfg.n_new = 6;
    cfg.seed = 7;
    const GaussianCloud dense = densify_cloud(sparse, cfg);
    for (size_t i = sparse.size(); i < dense.size(); ++i) {
        const Gaussian3D& g = dense.gaussians[i];
        const int nn = oracle::knn_scan(pts, g.position, 1)[0].first;
        const Gaussian3D& src = sparse.gaussians[nn];
        CHECK(g.sh == src.sh);
        CHECK(g.opacity_logit == src.opacity_logit);
        CHECK(g.rotation == src.rotation);
        // Scale shrink: log-scale shifted by log(1/2).
        CHECK((g.log_scale - src.log_scale + Vec3::Constant(std::log(2.0))).norm() <
              1e-12);
    }
}

TEST_CASE("densify: single sparse point degenerates to copies at the point") {
    GaussianCloud sparse = cloud_from_points({Vec3(1, 2, 3)});
    DensifyConfig cfg;
    cfg.n_new = 5;
    const GaussianCloud dense = densify_cloud(sparse, cfg);
    REQUIRE(dense.size() == 6);  // degenerate box: all candidates at the point
    for (size_t i = 1; i < dense.size(); ++i) {
        CHECK((dense.gaussians[i].position - Vec3(1, 2, 3)).norm() == 0.0);
    }
}

TEST_CASE("densify: deterministic for a fixed seed") {
    oracle::SceneRng rng(27);
    const GaussianCloud sparse = oracle::random_cloud(rng, 30, 1);
    DensifyConfig cfg;
    cfg.n_new = 8;
    cfg.seed = 1234;
    const GaussianCloud a = densify_cloud(sparse, cfg);
    const GaussianCloud b = densify_cloud(sparse, cfg);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(a.gaussians[i].position == b.gaussians[i].position);

    cfg.seed = 1235;
    const GaussianCloud c = densify_cloud(sparse, cfg);
    bool any_differs = c.size() != a.size();
    for (size_t i = sparse.size(); !any_differs && i < std::min(a.size(), c.size()); ++i)
        any_differs = a.gaussians[i].position != c.gaussians[i].position;
    CHECK(any_differs);
}

TEST_CASE("densify: invalid config rejected") {
    GaussianCloud sparse = cloud_from_points({Vec3::Zero(), Vec3(1, 0, 0)});
    DensifyConfig cfg;
    cfg.k = 0;
    CHECK_THROWS_AS(densify_cloud(sparse, cfg), Error);
    cfg.k = 4;
    cfg.dist_threshold = 0;
    CHECK_THROWS_AS(densify_cloud(sparse, cfg), Error);
    CHECK_THROWS_AS(densify_cloud(GaussianCloud{}, DensifyConfig{}), Error);
}
