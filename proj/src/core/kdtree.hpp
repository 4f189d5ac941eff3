#pragma once

#include <utility>
#include <vector>

#include "core/math.hpp"

namespace bs {

/// Exact 3D nearest-neighbor search. Results are ordered by squared distance
/// with ties broken by lower point index, so a brute-force scan with the same
/// comparator reproduces them exactly.
class KdTree3 {
  public:
    explicit KdTree3(std::vector<Vec3> points);

    /// k nearest points to query, ascending by (distance, index).
    std::vector<std::pair<int, double>> knn(const Vec3& query, int k) const;

    std::pair<int, double> nearest(const Vec3& query) const;

    size_t size() const { return points_.size(); }

  private:
    struct Hit {
        double d2;
        int index;
    };

    void build(int lo, int hi, int depth);
    void search(int lo, int hi, int depth, const Vec3& query, int k,
                std::vector<Hit>& heap) const;

    std::vector<Vec3> points_;
    std::vector<int> order_;  // tree layout: node at midpoint of each [lo, hi)
};

/// One-shot query over a point list (brute force below 256 points).
/// Throws if k exceeds the point count.
std::vector<std::pair<int, double>> knn_query(const std::vector<Vec3>& points,
                                              const Vec3& query, int k);

}  // namespace bs
