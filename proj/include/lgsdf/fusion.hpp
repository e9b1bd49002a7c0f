#pragma once

// Local updating: per-point signed distances are approximated against the
// current frame's sampled surface points and fused into a sparse grid of
// axis-aligned cells with exponentially decaying weights.

#include "lgsdf/core.hpp"
#include "lgsdf/io.hpp"
#include "lgsdf/kdtree.hpp"
#include "lgsdf/sampling.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace lgsdf {

struct FusionConfig {
    double decay = 50.0;         // epsilon
    double min_weight = 1e-5;    // w_min
    double max_weight = 10.0;    // W_max
    double resolution = 0.05;    // cell edge, meters
    Vec3 origin = Vec3::Zero();  // corner of cell (0, 0, 0)

    void validate() const {
        if (!(decay > 0)) throw Error("fusion.decay must be > 0");
        if (!(min_weight > 0 && min_weight <= 1)) throw Error("fusion.min_weight must be in (0, 1]");
        if (!(max_weight > 0)) throw Error("fusion.max_weight must be > 0");
        if (!(resolution > 0)) throw Error("fusion.resolution must be > 0");
    }
};

/// Surface points of the current frame, one per sampled ray, with
/// camera-facing unit normals.
class SurfaceSet {
public:
    SurfaceSet() = default;
    SurfaceSet(std::vector<Vec3> points, std::vector<Vec3> normals)
        : normals_(std::move(normals)), tree_(std::move(points)) {
        if (normals_.size() != tree_.size()) throw Error("SurfaceSet: point/normal count mismatch");
    }

    /// Surface points of `rays`; pixels without a valid normal fall back to
    /// the reversed viewing direction.
    static SurfaceSet from_rays(const std::vector<RaySample>& rays, const NormalImage& normals) {
        std::vector<Vec3> pts;
        std::vector<Vec3> nrm;
        pts.reserve(rays.size());
        nrm.reserve(rays.size());
        for (const auto& ray : rays) {
            pts.push_back(ray.surface().point);
            const auto n = normals.normal(ray.pixel.u, ray.pixel.v);
            nrm.push_back(n ? *n : Vec3(-ray.direction));
        }
        return SurfaceSet(std::move(pts), std::move(nrm));
    }

    std::size_t size() const { return tree_.size(); }
    bool empty() const { return tree_.size() == 0; }
    const std::vector<Vec3>& points() const { return tree_.points(); }
    const std::vector<Vec3>& normals() const { return normals_; }
    NearestResult nearest(const Vec3& q) const { return tree_.nearest(q); }

private:
    std::vector<Vec3> normals_;
    KdTree tree_;
};

/// Approximate signed distance and SDF gradient direction of one sample.
struct Capture {
    double distance = 0.0;
    Vec3 gradient = Vec3::Zero();  ///< unit; points away from the surface into free space
};

/// `surface_index` names the ray's own surface point in `surface`. The sign
/// comes from whether the sample lies before or behind the observed depth;
/// the gradient is the unit offset from the nearest surface point, flipped
/// behind the surface, and the pixel normal for the surface sample itself.
inline Capture capture_distance(const PointSample& sample, double surface_range,
                                std::size_t surface_index, const SurfaceSet& surface) {
    if (surface.empty()) throw Error("capture_distance: empty surface set");
    if (sample.kind == SampleKind::Surface) return {0.0, surface.normals().at(surface_index)};

    const NearestResult hit = surface.nearest(sample.point);
    const double dist = std::sqrt(hit.squared_distance);
    const double gap = surface_range - sample.range;
    const double sign = gap > 0 ? 1.0 : (gap < 0 ? -1.0 : 0.0);
    Capture c;
    c.distance = sign * dist;
    if (dist > 0) {
        c.gradient = (sample.point - surface.points()[hit.index]) / dist;
        if (gap < 0) c.gradient = -c.gradient;
    } else {
        c.gradient = surface.normals()[hit.index];
    }
    return c;
}

inline double point_weight(double distance, const FusionConfig& cfg) {
    return std::max(std::exp(-cfg.decay * std::abs(distance)), cfg.min_weight);
}

struct GridCell {
    double distance = 0.0;          // D
    double weight = 0.0;            // W
    Vec3 gradient = Vec3::Zero();   // G, unit length once observed
    int last_frame = -1;
};

/// Weighted running average of distance and gradient; the weight saturates at
/// `max_weight` while the averages still use the unclamped previous weight.
inline GridCell fuse_point(GridCell cell, double distance, double weight, const Vec3& gradient,
                           double max_weight) {
    const double denom = cell.weight + weight;
    cell.distance = (cell.weight * cell.distance + weight * distance) / denom;
    Vec3 g = (cell.weight * cell.gradient + weight * gradient) / denom;
    const double len = g.norm();
    cell.gradient = len > 0 ? Vec3(g / len) : g;
    cell.weight = std::min(cell.weight + weight, max_weight);
    return cell;
}

struct CellIndex {
    int x = 0, y = 0, z = 0;
    bool operator==(const CellIndex&) const = default;
};

struct CellIndexHash {
    std::size_t operator()(const CellIndex& c) const noexcept {
        std::size_t h = static_cast<std::uint32_t>(c.x) * 73856093u;
        h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(c.y)) * 19349663u;
        h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(c.z)) * 83492791u;
        return h;
    }
};

/// Sparse fused grid. A cell is in the history list iff its weight is
/// positive; `current()` lists cells touched by the latest frame.
class GridStore {
public:
    GridStore() = default;
    GridStore(double resolution, const Vec3& origin) : resolution_(resolution), origin_(origin) {
        if (!(resolution > 0)) throw Error("GridStore: resolution must be positive");
    }
    explicit GridStore(const FusionConfig& cfg) : GridStore(cfg.resolution, cfg.origin) {}

    double resolution() const { return resolution_; }
    const Vec3& origin() const { return origin_; }

    CellIndex cell_of(const Vec3& p) const {
        const Vec3 s = (p - origin_) / resolution_;
        return {static_cast<int>(std::floor(s.x())), static_cast<int>(std::floor(s.y())),
                static_cast<int>(std::floor(s.z()))};
    }
    Vec3 center(const CellIndex& c) const {
        return origin_ + resolution_ * Vec3(c.x + 0.5, c.y + 0.5, c.z + 0.5);
    }

    const GridCell* find(const CellIndex& c) const {
        const auto it = cells_.find(c);
        return it == cells_.end() ? nullptr : &it->second;
    }
    std::size_t size() const { return cells_.size(); }

    const std::vector<CellIndex>& history() const { return history_; }
    const std::vector<CellIndex>& current() const { return current_; }

    void begin_frame() { current_.clear(); current_set_.clear(); }
    bool in_current(const CellIndex& c) const { return current_set_.count(c) != 0; }

    /// Fuses one observation into the cell containing `p`.
    void fuse(const Vec3& p, double distance, double weight, const Vec3& gradient, double max_weight,
              int frame_index) {
        const CellIndex idx = cell_of(p);
        GridCell& cell = cells_[idx];
        if (cell.weight == 0.0) history_.push_back(idx);
        if (current_set_.insert(idx).second) current_.push_back(idx);
        cell = fuse_point(cell, distance, weight, gradient, max_weight);
        cell.last_frame = frame_index;
    }

    /// Restores a cell verbatim (snapshot import).
    void insert(const CellIndex& idx, const GridCell& cell) {
        if (!(cell.weight > 0)) throw Error("GridStore::insert: cell weight must be positive");
        if (cells_.emplace(idx, cell).second) history_.push_back(idx);
        else cells_[idx] = cell;
    }

    /// Axis-aligned bounds of all updated cell boxes.
    std::pair<Vec3, Vec3> history_bounds() const {
        if (history_.empty()) throw Error("GridStore: no updated cells");
        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
        Vec3 hi = -lo;
        for (const auto& c : history_) {
            const Vec3 ctr = center(c);
            lo = lo.cwiseMin(ctr);
            hi = hi.cwiseMax(ctr);
        }
        const Vec3 half = Vec3::Constant(0.5 * resolution_);
        return {lo - half, hi + half};
    }

private:
    double resolution_ = 0.05;
    Vec3 origin_ = Vec3::Zero();
    std::unordered_map<CellIndex, GridCell, CellIndexHash> cells_;
    std::vector<CellIndex> history_;
    std::vector<CellIndex> current_;
    std::unordered_set<CellIndex, CellIndexHash> current_set_;
};

/// Fuses all samples of one frame, ray-major then sample-minor. `rays[i]`
/// must own surface point `i` of `surface`.
inline void integrate_frame(GridStore& store, const std::vector<RaySample>& rays,
                            const SurfaceSet& surface, const FusionConfig& cfg, int frame_index) {
    store.begin_frame();
    if (rays.empty()) return;
    if (surface.size() != rays.size()) throw Error("integrate_frame: rays and surface set disagree");
    for (std::size_t r = 0; r < rays.size(); ++r) {
        const RaySample& ray = rays[r];
        for (const PointSample& s : ray.samples) {
            const Capture c = capture_distance(s, ray.surface_range, r, surface);
            store.fuse(s.point, c.distance, point_weight(c.distance, cfg), c.gradient,
                       cfg.max_weight, frame_index);
        }
    }
}

// ---------------------------------------------------------------------------
// Snapshot text format:
//
//   lgsdf-grid 1
//   resolution <r>
//   origin <x> <y> <z>
//   cells <n>
//   <i> <j> <k> <D> <W> <Gx> <Gy> <Gz> <last_frame>     (n lines, history order)

inline std::string export_grid(const GridStore& store) {
    std::ostringstream out;
    out.precision(17);
    out << "lgsdf-grid 1\n";
    out << "resolution " << store.resolution() << "\n";
    out << "origin " << store.origin().x() << ' ' << store.origin().y() << ' ' << store.origin().z()
        << "\n";
    out << "cells " << store.history().size() << "\n";
    for (const CellIndex& idx : store.history()) {
        const GridCell& c = *store.find(idx);
        out << idx.x << ' ' << idx.y << ' ' << idx.z << ' ' << c.distance << ' ' << c.weight << ' '
            << c.gradient.x() << ' ' << c.gradient.y() << ' ' << c.gradient.z() << ' '
            << c.last_frame << "\n";
    }
    return out.str();
}

inline GridStore import_grid(const std::string& text) {
    std::istringstream in(text);
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "lgsdf-grid" || version != 1) throw Error("import_grid: bad header");
    double res = 0;
    Vec3 origin;
    std::size_t n = 0;
    in >> tag >> res;
    if (tag != "resolution") throw Error("import_grid: missing resolution");
    in >> tag >> origin.x() >> origin.y() >> origin.z();
    if (tag != "origin") throw Error("import_grid: missing origin");
    in >> tag >> n;
    if (tag != "cells" || !in) throw Error("import_grid: missing cell count");
    GridStore store(res, origin);
    for (std::size_t i = 0; i < n; ++i) {
        CellIndex idx;
        GridCell c;
        in >> idx.x >> idx.y >> idx.z >> c.distance >> c.weight >> c.gradient.x() >> c.gradient.y() >>
            c.gradient.z() >> c.last_frame;
        if (!in) throw Error("import_grid: truncated at cell " + std::to_string(i));
        store.insert(idx, c);
    }
    return store;
}

}  // namespace lgsdf
