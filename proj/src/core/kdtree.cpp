#include "core/kdtree.hpp"

#include <algorithm>
#include <numeric>

#include "core/error.hpp"

namespace bs {

namespace {

// Heap comparator; with std::push_heap this keeps the worst hit on top
// (largest distance, highest index among equals).
inline bool hit_better(double a_d2, int a_idx, double b_d2, int b_idx) {
    return a_d2 < b_d2 || (a_d2 == b_d2 && a_idx < b_idx);
}

}  // namespace

KdTree3::KdTree3(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!points_.empty()) build(0, static_cast<int>(points_.size()), 0);
}

void KdTree3::build(int lo, int hi, int depth) {
    if (hi - lo <= 1) return;
    const int axis = depth % 3;
    const int mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](int a, int b) {
                         const double pa = points_[a][axis], pb = points_[b][axis];
                         return pa < pb || (pa == pb && a < b);
                     });
    build(lo, mid, depth + 1);
    build(mid + 1, hi, depth + 1);
}

void KdTree3::search(int lo, int hi, int depth, const Vec3& query, int k,
                     std::vector<Hit>& heap) const {
    if (hi <= lo) return;
    const int axis = depth % 3;
    const int mid = lo + (hi - lo) / 2;
    const int idx = order_[mid];

    const auto comp = [](const Hit& a, const Hit& b) {
        return hit_better(a.d2, a.index, b.d2, b.index);
    };

    const double d2 = (points_[idx] - query).squaredNorm();
    const Hit cand{d2, idx};
    if (static_cast<int>(heap.size()) < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), comp);
    } else if (hit_better(cand.d2, cand.index, heap.front().d2, heap.front().index)) {
        std::pop_heap(heap.begin(), heap.end(), comp);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), comp);
    }

    const double plane = query[axis] - points_[idx][axis];
    const int near_lo = plane <= 0 ? lo : mid + 1;
    const int near_hi = plane <= 0 ? mid : hi;
    const int far_lo = plane <= 0 ? mid + 1 : lo;
    const int far_hi = plane <= 0 ? hi : mid;

    search(near_lo, near_hi, depth + 1, query, k, heap);
    // Equal plane distance can still hide a lower-index tie, so prune strictly.
    if (static_cast<int>(heap.size()) < k || plane * plane <= heap.front().d2)
        search(far_lo, far_hi, depth + 1, query, k, heap);
}

std::vector<std::pair<int, double>> KdTree3::knn(const Vec3& query, int k) const {
    require(!points_.empty(), "knn: empty point set");
    if (k > static_cast<int>(points_.size()))
        throw_invalid("knn: k=" + std::to_string(k) + " exceeds point count " +
                      std::to_string(points_.size()));
    std::vector<Hit> heap;
    heap.reserve(k);
    search(0, static_cast<int>(points_.size()), 0, query, k, heap);
    std::sort(heap.begin(), heap.end(), [](const Hit& a, const Hit& b) {
        return hit_better(a.d2, a.index, b.d2, b.index);
    });
    std::vector<std::pair<int, double>> out;
    out.reserve(heap.size());
    for (const Hit& h : heap) out.emplace_back(h.index, std::sqrt(h.d2));
    return out;
}

std::pair<int, double> KdTree3::nearest(const Vec3& query) const {
    return knn(query, 1).front();
}

std::vector<std::pair<int, double>> knn_query(const std::vector<Vec3>& points,
                                              const Vec3& query, int k) {
    require(!points.empty(), "knn_query: empty point set");
    if (k > static_cast<int>(points.size()))
        throw_invalid("knn_query: k=" + std::to_string(k) + " exceeds point count " +
                      std::to_string(points.size()));
    if (points.size() >= 256) return KdTree3(points).knn(query, k);

    std::vector<std::pair<double, int>> hits(points.size());
    for (size_t i = 0; i < points.size(); ++i)
        hits[i] = {(points[i] - query).squaredNorm(), static_cast<int>(i)};
    std::sort(hits.begin(), hits.end());
    std::vector<std::pair<int, double>> out(k);
    for (int i = 0; i < k; ++i) out[i] = {hits[i].second, std::sqrt(hits[i].first)};
    return out;
}

}  // namespace bs
