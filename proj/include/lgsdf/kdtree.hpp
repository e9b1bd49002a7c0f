#pragma once

#include "lgsdf/core.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

namespace lgsdf {

struct NearestResult {
    std::size_t index = 0;
    double squared_distance = std::numeric_limits<double>::infinity();
};

/// Exhaustive scan; ties go to the lowest index.
inline NearestResult nearest_brute_force(const std::vector<Vec3>& points, const Vec3& q) {
    NearestResult best;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double d2 = (q - points[i]).squaredNorm();
        if (d2 < best.squared_distance) best = {i, d2};
    }
    return best;
}

/// Static 3-d tree over a point set. Queries return the same point as
/// nearest_brute_force, including its lowest-index tie rule.
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        if (!points_.empty()) build(0, points_.size());
    }

    std::size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }

    NearestResult nearest(const Vec3& q) const {
        NearestResult best;
        if (!nodes_.empty()) search(0, q, best);
        return best;
    }

private:
    static constexpr std::size_t kLeafSize = 8;

    struct Node {
        std::size_t lo = 0, hi = 0;  // range in order_
        int axis = -1;               // -1 for leaves
        int left = -1, right = -1;
    };

    int build(std::size_t lo, std::size_t hi) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({lo, hi});
        if (hi - lo <= kLeafSize) return id;

        Vec3 mn = Vec3::Constant(std::numeric_limits<double>::infinity());
        Vec3 mx = -mn;
        for (std::size_t i = lo; i < hi; ++i) {
            mn = mn.cwiseMin(points_[order_[i]]);
            mx = mx.cwiseMax(points_[order_[i]]);
        }
        int axis = 0;
        (mx - mn).maxCoeff(&axis);
        const std::size_t mid = lo + (hi - lo) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](std::size_t a, std::size_t b) {
                             const double ca = points_[a][axis], cb = points_[b][axis];
                             return ca < cb || (ca == cb && a < b);
                         });
        const int left = build(lo, mid);
        const int right = build(mid + 1, hi);
        nodes_[id].axis = axis;
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    void consider(std::size_t idx, const Vec3& q, NearestResult& best) const {
        const double d2 = (q - points_[idx]).squaredNorm();
        if (d2 < best.squared_distance || (d2 == best.squared_distance && idx < best.index))
            best = {idx, d2};
    }

    void search(int id, const Vec3& q, NearestResult& best) const {
        const Node& node = nodes_[id];
        if (node.axis < 0) {
            for (std::size_t i = node.lo; i < node.hi; ++i) consider(order_[i], q, best);
            return;
        }
        const std::size_t pivot = order_[node.lo + (node.hi - node.lo) / 2];
        const double diff = q[node.axis] - points_[pivot][node.axis];
        const int near_child = diff <= 0 ? node.left : node.right;
        const int far_child = diff <= 0 ? node.right : node.left;
        search(near_child, q, best);
        consider(pivot, q, best);
        // Equal-distance candidates across the split may carry lower indices,
        // so only strictly farther half-spaces are pruned.
        if (diff * diff <= best.squared_distance) search(far_child, q, best);
    }

    std::vector<Vec3> points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
};

}  // namespace lgsdf
