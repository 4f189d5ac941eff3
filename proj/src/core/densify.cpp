#include "core/densify.hpp"

#include <cmath>
#include <memory>

#include "core/error.hpp"
#include "core/kdtree.hpp"
#include "core/rng.hpp"

namespace bs {

namespace {

constexpr double kScaleShrink = 0.5;

// Brute-force fallback below this size keeps small runs cheap; both paths are
// exact with identical tie handling.
constexpr size_t kKdTreeMinPoints = 256;

class NeighborIndex {
  public:
    explicit NeighborIndex(const std::vector<Vec3>& points) : points_(points) {
        if (points.size() >= kKdTreeMinPoints) tree_ = std::make_unique<KdTree3>(points);
    }

    std::vector<std::pair<int, double>> knn(const Vec3& q, int k) const {
        if (tree_) return tree_->knn(q, k);
        return knn_query(points_, q, k);
    }

    std::pair<int, double> nearest(const Vec3& q) const { return knn(q, 1).front(); }

  private:
    const std::vector<Vec3>& points_;
    std::unique_ptr<KdTree3> tree_;
};

}  // namespace

GaussianCloud densify_cloud(const GaussianCloud& sparse, const DensifyConfig& cfg) {
    require(!sparse.empty(), "densify_cloud: sparse cloud is empty");
    require(cfg.n_new >= 0, "densify_cloud: n_new must be >= 0");
    require(cfg.k >= 1, "densify_cloud: k must be >= 1");
    require(cfg.dist_threshold > 0, "densify_cloud: dist_threshold must be > 0");

    GaussianCloud dense = sparse;
    if (cfg.n_new == 0) return dense;

    const int n = static_cast<int>(sparse.size());
    std::vector<Vec3> positions(n);
    for (int i = 0; i < n; ++i) positions[i] = sparse.gaussians[i].position;
    const NeighborIndex index(positions);

    for (int i = 0; i < n; ++i) {
        // Neighborhood box of the point and its k nearest other sparse points.
        const auto hits = index.knn(positions[i], std::min(cfg.k + 1, n));
        Vec3 lo = positions[i], hi = positions[i];
        int kept = 0;
        for (const auto& [idx, dist] : hits) {
            if (idx == i) continue;
            if (kept++ == cfg.k) break;
            lo = lo.cwiseMin(positions[idx]);
            hi = hi.cwiseMax(positions[idx]);
        }

        CounterRng rng(cfg.seed, static_cast<uint64_t>(i));
        for (int j = 0; j < cfg.n_new; ++j) {
            Vec3 candidate;
            for (int a = 0; a < 3; ++a) candidate[a] = rng.uniform(lo[a], hi[a]);

            const auto [nn_idx, nn_dist] = index.nearest(candidate);
            if (nn_dist > cfg.dist_threshold) continue;

            Gaussian3D g = sparse.gaussians[nn_idx];
            g.position = candidate;
            g.log_scale.array() += std::log(kScaleShrink);
            dense.gaussians.push_back(std::move(g));
        }
    }
    return dense;
}

}  // namespace bs
