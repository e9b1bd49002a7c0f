#pragma once

#include "lgsdf/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace lgsdf {

struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Vec3> normals;  ///< per vertex; empty or same length as vertices

    bool empty() const { return triangles.empty(); }

    /// Area-weighted average of incident face normals.
    void compute_normals() {
        normals.assign(vertices.size(), Vec3::Zero());
        for (const auto& t : triangles) {
            const Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
            for (int i : t) normals[i] += n;
        }
        for (auto& n : normals) {
            const double len = n.norm();
            n = len > 0 ? Vec3(n / len) : Vec3::UnitZ();
        }
    }

    void validate() const {
        const int n = static_cast<int>(vertices.size());
        for (const auto& t : triangles) {
            for (int i : t)
                if (i < 0 || i >= n) throw Error("mesh: triangle index out of range");
            if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) throw Error("mesh: degenerate triangle");
        }
        if (!normals.empty() && normals.size() != vertices.size())
            throw Error("mesh: normal count does not match vertex count");
    }
};

inline std::string encode_ply(const Mesh& mesh) {
    mesh.validate();
    const bool with_normals = !mesh.normals.empty();
    std::ostringstream os;
    os.precision(9);
    os << "ply\nformat ascii 1.0\nelement vertex " << mesh.vertices.size()
       << "\nproperty float x\nproperty float y\nproperty float z\n";
    if (with_normals) os << "property float nx\nproperty float ny\nproperty float nz\n";
    os << "element face " << mesh.triangles.size() << "\nproperty list uchar int vertex_indices\nend_header\n";
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& v = mesh.vertices[i];
        os << v.x() << ' ' << v.y() << ' ' << v.z();
        if (with_normals) os << ' ' << mesh.normals[i].x() << ' ' << mesh.normals[i].y() << ' ' << mesh.normals[i].z();
        os << '\n';
    }
    for (const auto& t : mesh.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    return os.str();
}

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

/// Closest point to `p` on triangle abc (Voronoi-region walk).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return a;
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    const double denom = va + vb + vc;
    if (!(std::abs(denom) > 0)) {
        // Degenerate (zero-area) triangle: nearest of its three edges.
        auto seg = [&](const Vec3& s, const Vec3& e) {
            const Vec3 d = e - s;
            const double len2 = d.squaredNorm();
            const double t = len2 > 0 ? std::clamp((p - s).dot(d) / len2, 0.0, 1.0) : 0.0;
            return Vec3(s + t * d);
        };
        Vec3 best = seg(a, b);
        for (const Vec3& q : {seg(b, c), seg(c, a)})
            if ((q - p).squaredNorm() < (best - p).squaredNorm()) best = q;
        return best;
    }
    const double v = vb / denom, w = vc / denom;
    return a + ab * v + ac * w;
}

inline double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    return (closest_point_on_triangle(p, a, b, c) - p).norm();
}

struct TriangleHit {
    int triangle = -1;
    double distance = std::numeric_limits<double>::infinity();
};

/// Exhaustive nearest-triangle scan; reference for the accelerated query.
inline TriangleHit nearest_triangle_brute_force(const Mesh& mesh, const Vec3& p) {
    TriangleHit best;
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        const double d = point_triangle_distance(p, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
        if (d < best.distance) best = {static_cast<int>(i), d};
    }
    return best;
}

/// Bounding-volume hierarchy over mesh triangles for nearest-surface queries.
class TriangleBvh {
public:
    explicit TriangleBvh(const Mesh& mesh) : mesh_(&mesh) {
        const std::size_t n = mesh.triangles.size();
        order_.resize(n);
        std::iota(order_.begin(), order_.end(), 0);
        centroid_.resize(n);
        box_lo_.resize(n);
        box_hi_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& t = mesh.triangles[i];
            const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
            centroid_[i] = (a + b + c) / 3.0;
            box_lo_[i] = a.cwiseMin(b).cwiseMin(c);
            box_hi_[i] = a.cwiseMax(b).cwiseMax(c);
        }
        if (n > 0) build(0, n);
    }

    TriangleHit nearest(const Vec3& p) const {
        TriangleHit best;
        if (nodes_.empty()) return best;
        double best_sq = std::numeric_limits<double>::infinity();
        search(0, p, best, best_sq);
        return best;
    }

private:
    struct Node {
        Vec3 lo, hi;
        std::size_t begin = 0, end = 0;
        int left = -1, right = -1;
    };
    static constexpr std::size_t kLeafSize = 4;

    int build(std::size_t begin, std::size_t end) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
        Vec3 clo = lo, chi = hi;
        for (std::size_t i = begin; i < end; ++i) {
            lo = lo.cwiseMin(box_lo_[order_[i]]);
            hi = hi.cwiseMax(box_hi_[order_[i]]);
            clo = clo.cwiseMin(centroid_[order_[i]]);
            chi = chi.cwiseMax(centroid_[order_[i]]);
        }
        nodes_[id].lo = lo;
        nodes_[id].hi = hi;
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        if (end - begin <= kLeafSize) return id;
        int axis;
        (chi - clo).maxCoeff(&axis);
        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::size_t a, std::size_t b) {
                             return centroid_[a][axis] < centroid_[b][axis] ||
                                    (centroid_[a][axis] == centroid_[b][axis] && a < b);
                         });
        const int left = build(begin, mid);
        const int right = build(mid, end);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    static double box_sq_distance(const Node& n, const Vec3& p) {
        return (n.lo - p).cwiseMax(p - n.hi).cwiseMax(0.0).squaredNorm();
    }

    void search(int id, const Vec3& p, TriangleHit& best, double& best_sq) const {
        const Node& node = nodes_[id];
        if (node.left < 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                const std::size_t tri = order_[i];
                const auto& t = mesh_->triangles[tri];
                const double d = (closest_point_on_triangle(p, mesh_->vertices[t[0]], mesh_->vertices[t[1]],
                                                            mesh_->vertices[t[2]]) - p).squaredNorm();
                if (d < best_sq || (d == best_sq && static_cast<int>(tri) < best.triangle)) {
                    best_sq = d;
                    best = {static_cast<int>(tri), std::sqrt(d)};
                }
            }
            return;
        }
        const double dl = box_sq_distance(nodes_[node.left], p);
        const double dr = box_sq_distance(nodes_[node.right], p);
        const int first = dl <= dr ? node.left : node.right;
        const int second = dl <= dr ? node.right : node.left;
        if (std::min(dl, dr) <= best_sq) search(first, p, best, best_sq);
        if (std::max(dl, dr) <= best_sq) search(second, p, best, best_sq);
    }

    const Mesh* mesh_;
    std::vector<std::size_t> order_;
    std::vector<Vec3> centroid_, box_lo_, box_hi_;
    std::vector<Node> nodes_;
};

/// Area-weighted uniform samples on the mesh surface.
inline std::vector<Vec3> sample_mesh_surface(const Mesh& mesh, std::size_t n, Rng& rng) {
    if (mesh.empty()) throw Error("sample_mesh_surface: mesh has no triangles");
    std::vector<double> cumulative(mesh.triangles.size());
    double total = 0;
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        total += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
        cumulative[i] = total;
    }
    if (!(total > 0)) throw Error("sample_mesh_surface: mesh has zero area");
    std::vector<Vec3> out;
    out.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        const double r = uniform01(rng) * total;
        const std::size_t i = std::min<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin(), cumulative.size() - 1);
        const auto& t = mesh.triangles[i];
        double u = uniform01(rng), v = uniform01(rng);
        if (u + v > 1) {
            u = 1 - u;
            v = 1 - v;
        }
        const Vec3& a = mesh.vertices[t[0]];
        out.push_back(a + u * (mesh.vertices[t[1]] - a) + v * (mesh.vertices[t[2]] - a));
    }
    return out;
}

}  // namespace lgsdf
