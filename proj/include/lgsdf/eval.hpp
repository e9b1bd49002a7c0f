#pragma once

// Field queries, ESDF slices, and the two accuracy metrics: mean absolute SDF
// error over a sampled region and mesh completion (mean distance from
// ground-truth surface samples to the nearest predicted triangle).

#include "lgsdf/field.hpp"
#include "lgsdf/fusion.hpp"
#include "lgsdf/kdtree.hpp"
#include "lgsdf/marching_cubes.hpp"
#include "lgsdf/mesh.hpp"
#include "lgsdf/scene.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace lgsdf {

struct Aabb {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Ones();

    void validate() const {
        if (!lo.allFinite() || !hi.allFinite() || !(hi.array() > lo.array()).all())
            throw Error("region bounds are degenerate");
    }
    bool contains(const Vec3& p, double slack = 0.0) const {
        return (p.array() >= lo.array() - slack).all() && (p.array() <= hi.array() + slack).all();
    }
    nlohmann::json to_json() const {
        return {{"lo", {lo.x(), lo.y(), lo.z()}}, {"hi", {hi.x(), hi.y(), hi.z()}}};
    }
};

template <typename S>
std::vector<double> query_field(const FieldParams<S>& params, const std::vector<Vec3>& points) {
    const std::vector<S> v = query(params, points);
    return {v.begin(), v.end()};
}

template <typename S>
FieldFn field_fn(const FieldParams<S>& params) {
    return [&params](const std::vector<Vec3>& pts) { return query_field(params, pts); };
}

using TruthFn = std::function<double(const Vec3&)>;

inline TruthFn scene_truth(const Scene& scene) {
    if (scene.primitives.empty()) throw Error("scene_truth: scene has no primitives");
    return [&scene](const Vec3& q) { return scene.sdf(q); };
}

/// Fused-grid ground truth; cells never updated read as 0.
inline TruthFn grid_truth(const GridStore& store) {
    return [&store](const Vec3& q) {
        const GridCell* c = store.find(store.cell_of(q));
        return c ? c->distance : 0.0;
    };
}

// ---------------------------------------------------------------------------
// SDF error

struct SdfErrorSpec {
    std::size_t n_samples = 20000;
    std::uint64_t seed = 0;
    std::optional<Aabb> region;   ///< default: bounds of all updated grid cells
    bool free_space_only = true;  ///< keep only samples with truth >= 0
};

struct SdfErrorReport {
    double mean = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
    Aabb region;
    bool free_space_only = true;

    nlohmann::json to_json() const {
        return {{"sdf_error_m", mean},
                {"n_samples", n_samples},
                {"seed", seed},
                {"region", region.to_json()},
                {"free_space_only", free_space_only}};
    }
};

/// Seeded uniform samples inside `region`, optionally restricted to truth >= 0.
inline std::vector<Vec3> sample_eval_points(const Aabb& region, const TruthFn& truth, std::size_t n,
                                            std::uint64_t seed, bool free_space_only) {
    region.validate();
    Rng rng(seed);
    std::vector<Vec3> out;
    out.reserve(n);
    const std::size_t max_attempts = 1000 * std::max<std::size_t>(n, 1);
    for (std::size_t attempt = 0; out.size() < n; ++attempt) {
        if (attempt >= max_attempts) throw Error("sdf_error: evaluation region contains no free space");
        const Vec3 p(uniform(rng, region.lo.x(), region.hi.x()), uniform(rng, region.lo.y(), region.hi.y()),
                     uniform(rng, region.lo.z(), region.hi.z()));
        if (free_space_only && !(truth(p) >= 0)) continue;
        out.push_back(p);
    }
    return out;
}

inline SdfErrorReport sdf_error(const FieldFn& field, const TruthFn& truth, const SdfErrorSpec& spec,
                                const GridStore* store = nullptr) {
    if (spec.n_samples == 0) throw Error("sdf_error: n_samples must be >= 1");
    SdfErrorReport report;
    if (spec.region) report.region = *spec.region;
    else if (store) {
        const auto [lo, hi] = store->history_bounds();
        report.region = {lo, hi};
    } else throw Error("sdf_error: no evaluation region and no grid to derive one from");
    report.n_samples = spec.n_samples;
    report.seed = spec.seed;
    report.free_space_only = spec.free_space_only;
    const std::vector<Vec3> pts =
        sample_eval_points(report.region, truth, spec.n_samples, spec.seed, spec.free_space_only);
    const std::vector<double> pred = field(pts);
    double sum = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) sum += std::abs(pred[i] - truth(pts[i]));
    report.mean = sum / static_cast<double>(pts.size());
    return report;
}

// ---------------------------------------------------------------------------
// Mesh completion

/// Keeps ground-truth surface points that the mapper actually observed: points
/// within `radius` of an updated cell whose fused |D| is at most `radius`.
class ObservedSurfaceFilter {
public:
    ObservedSurfaceFilter(const GridStore& store, double radius) : radius_(radius) {
        std::vector<Vec3> centers;
        for (const auto& idx : store.history()) {
            const GridCell* c = store.find(idx);
            if (std::abs(c->distance) <= radius) centers.push_back(store.center(idx));
        }
        if (!centers.empty()) tree_.emplace(std::move(centers));
    }
    bool operator()(const Vec3& p) const {
        return tree_ && tree_->nearest(p).squared_distance <= radius_ * radius_;
    }

private:
    double radius_;
    std::optional<KdTree> tree_;
};

struct SurfacePatch {
    enum class Kind { Sphere, Rectangle } kind;
    Vec3 origin;  ///< sphere center or rectangle corner
    Vec3 u, v;    ///< rectangle edge vectors
    double radius = 0.0;
    double area = 0.0;
};

/// Axis-aligned rectangle of a plane clipped to `bounds`; planes with a
/// non-axis normal are not supported.
inline std::optional<SurfacePatch> plane_patch(const Plane& plane, const Aabb& bounds) {
    int axis = -1;
    for (int a = 0; a < 3; ++a)
        if (std::abs(std::abs(plane.normal[a]) - 1.0) < 1e-9) axis = a;
    if (axis < 0) throw Error("mesh_completion: only axis-aligned planes can be sampled");
    const double c = plane.point[axis];
    if (c < bounds.lo[axis] || c > bounds.hi[axis]) return std::nullopt;
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    SurfacePatch p{SurfacePatch::Kind::Rectangle, bounds.lo, Vec3::Zero(), Vec3::Zero()};
    p.origin[axis] = c;
    p.u[a1] = bounds.hi[a1] - bounds.lo[a1];
    p.v[a2] = bounds.hi[a2] - bounds.lo[a2];
    p.area = p.u.norm() * p.v.norm();
    return p;
}

inline std::vector<SurfacePatch> scene_patches(const Scene& scene, const Aabb& bounds) {
    std::vector<SurfacePatch> patches;
    for (const auto& prim : scene.primitives) {
        if (const auto* s = std::get_if<Sphere>(&prim)) {
            SurfacePatch p{SurfacePatch::Kind::Sphere, s->center, Vec3::Zero(), Vec3::Zero(), s->radius};
            p.area = 4.0 * kPi * s->radius * s->radius;
            patches.push_back(p);
        } else if (const auto* b = std::get_if<Box>(&prim)) {
            const Vec3 lo = b->center - b->half_extents;
            const Vec3 size = 2.0 * b->half_extents;
            for (int axis = 0; axis < 3; ++axis) {
                const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
                for (int side = 0; side < 2; ++side) {
                    SurfacePatch p{SurfacePatch::Kind::Rectangle, lo, Vec3::Zero(), Vec3::Zero()};
                    p.origin[axis] += side * size[axis];
                    p.u[a1] = size[a1];
                    p.v[a2] = size[a2];
                    p.area = size[a1] * size[a2];
                    patches.push_back(p);
                }
            }
        } else if (const auto* pl = std::get_if<Plane>(&prim)) {
            if (auto p = plane_patch(*pl, bounds)) patches.push_back(*p);
        }
    }
    return patches;
}

/// Area-weighted samples on the scene's visible surface inside `bounds`.
/// Candidates hidden inside another solid (|sdf| > tolerance) or rejected by
/// `keep` are redrawn.
inline std::vector<Vec3> sample_scene_surface(const Scene& scene, const Aabb& bounds, std::size_t n,
                                              std::uint64_t seed, double tolerance = 1e-6,
                                              const std::function<bool(const Vec3&)>& keep = {}) {
    bounds.validate();
    const std::vector<SurfacePatch> patches = scene_patches(scene, bounds);
    std::vector<double> cumulative;
    double total = 0.0;
    for (const auto& p : patches) cumulative.push_back(total += p.area);
    if (!(total > 0)) throw Error("mesh_completion: scene has no surface inside the bounds");
    Rng rng(seed);
    std::vector<Vec3> out;
    out.reserve(n);
    const std::size_t max_attempts = 1000 * std::max<std::size_t>(n, 1);
    for (std::size_t attempt = 0; out.size() < n; ++attempt) {
        if (attempt >= max_attempts) throw Error("mesh_completion: could not sample enough ground-truth surface");
        const double r = uniform01(rng) * total;
        const std::size_t i = std::min<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin(), patches.size() - 1);
        const SurfacePatch& patch = patches[i];
        Vec3 p;
        if (patch.kind == SurfacePatch::Kind::Sphere) {
            const double z = uniform(rng, -1.0, 1.0);
            const double phi = uniform(rng, 0.0, 2.0 * kPi);
            const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
            p = patch.origin + patch.radius * Vec3(s * std::cos(phi), s * std::sin(phi), z);
        } else {
            const double a = uniform01(rng), b = uniform01(rng);
            p = patch.origin + a * patch.u + b * patch.v;
        }
        if (!bounds.contains(p, 1e-9)) continue;
        if (std::abs(scene.sdf(p)) > tolerance) continue;
        if (keep && !keep(p)) continue;
        out.push_back(p);
    }
    return out;
}

struct CompletionReport {
    double mean = std::numeric_limits<double>::infinity();
    bool empty_prediction = true;
    std::size_t n_samples = 0;

    nlohmann::json to_json() const {
        nlohmann::json j = {{"empty_prediction", empty_prediction}, {"n_samples", n_samples}};
        j["mesh_completion_m"] = std::isfinite(mean) ? nlohmann::json(mean) : nlohmann::json(nullptr);
        return j;
    }
};

/// Mean exact point-to-triangle distance from each ground-truth sample to the
/// predicted mesh. An empty prediction yields +inf with the flag set.
inline CompletionReport mesh_completion(const std::vector<Vec3>& truth_samples, const Mesh& pred) {
    if (truth_samples.empty()) throw Error("mesh_completion: n_samples must be >= 1");
    CompletionReport report;
    report.n_samples = truth_samples.size();
    if (pred.empty()) return report;
    report.empty_prediction = false;
    const TriangleBvh bvh(pred);
    double sum = 0.0;
    for (const Vec3& p : truth_samples) sum += bvh.nearest(p).distance;
    report.mean = sum / static_cast<double>(truth_samples.size());
    return report;
}

// ---------------------------------------------------------------------------
// Slices

/// Axis-aligned slice at `coordinate` along `axis`. The in-plane axes (u, v)
/// are the remaining two world axes in increasing order. Cells are sampled at
/// their centers.
struct SliceSpec {
    int axis = 2;
    double coordinate = 0.0;
    Eigen::Vector2d lo = Eigen::Vector2d(-1, -1);
    Eigen::Vector2d hi = Eigen::Vector2d(1, 1);
    double resolution = 0.05;
    double mask_radius = 0.0;  ///< 0 disables the unknown-region mask

    void validate() const {
        if (axis < 0 || axis > 2) throw Error("slice.axis must be 0, 1 or 2");
        if (!(resolution > 0)) throw Error("slice.resolution must be > 0");
        if (!(hi.array() > lo.array()).all()) throw Error("slice bounds are degenerate");
        if (mask_radius < 0) throw Error("slice.mask_radius must be >= 0");
    }
    int u_axis() const { return axis == 0 ? 1 : 0; }
    int v_axis() const { return axis == 2 ? 1 : 2; }
    int cols() const { return static_cast<int>(std::ceil((hi.x() - lo.x()) / resolution - 1e-9)); }
    int rows() const { return static_cast<int>(std::ceil((hi.y() - lo.y()) / resolution - 1e-9)); }
    Vec3 point(int row, int col) const {
        Vec3 p;
        p[axis] = coordinate;
        p[u_axis()] = lo.x() + (col + 0.5) * resolution;
        p[v_axis()] = lo.y() + (row + 0.5) * resolution;
        return p;
    }
};

struct Slice {
    SliceSpec spec;
    int rows = 0;
    int cols = 0;
    std::vector<double> values;        ///< row-major, row 0 at the lowest v
    std::vector<std::uint8_t> masked;  ///< 1 where no updated cell lies within mask_radius

    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

inline Slice compute_slice(const FieldFn& field, const SliceSpec& spec, const GridStore* store = nullptr) {
    spec.validate();
    Slice s;
    s.spec = spec;
    s.rows = spec.rows();
    s.cols = spec.cols();
    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(s.rows) * s.cols);
    for (int r = 0; r < s.rows; ++r)
        for (int c = 0; c < s.cols; ++c) pts.push_back(spec.point(r, c));
    s.values = field(pts);
    s.masked.assign(pts.size(), 0);
    if (spec.mask_radius > 0 && store) {
        std::vector<Vec3> centers;
        for (const auto& idx : store->history()) centers.push_back(store->center(idx));
        if (centers.empty()) {
            s.masked.assign(pts.size(), 1);
        } else {
            const KdTree tree(std::move(centers));
            const double r2 = spec.mask_radius * spec.mask_radius;
            for (std::size_t i = 0; i < pts.size(); ++i) s.masked[i] = tree.nearest(pts[i]).squared_distance > r2;
        }
    }
    return s;
}

inline std::string encode_slice_csv(const Slice& s) {
    static const char* names = "xyz";
    std::ostringstream os;
    os.precision(9);
    os << "# axis=" << names[s.spec.axis] << " coordinate=" << s.spec.coordinate << " u=" << names[s.spec.u_axis()]
       << " v=" << names[s.spec.v_axis()] << " u_range=" << s.spec.lo.x() << ',' << s.spec.hi.x()
       << " v_range=" << s.spec.lo.y() << ',' << s.spec.hi.y() << " resolution=" << s.spec.resolution
       << " rows=" << s.rows << " cols=" << s.cols << '\n';
    for (int r = 0; r < s.rows; ++r) {
        for (int c = 0; c < s.cols; ++c) os << (c ? "," : "") << s.at(r, c);
        os << '\n';
    }
    return os.str();
}

inline constexpr double kSliceColorClip = 0.5;

/// Diverging colormap: white at 0, saturating to red at +0.5 m and blue at
/// -0.5 m. Cells adjacent to a sign change are black; masked cells are
/// darkened to half intensity. Image rows run from high v (top) to low v.
inline std::array<std::uint8_t, 3> slice_color(double d) {
    const double t = std::clamp(d / kSliceColorClip, -1.0, 1.0);
    const auto fade = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - std::abs(t))));
    if (t >= 0) return {255, fade, fade};
    return {fade, fade, 255};
}

inline std::string encode_slice_ppm(const Slice& s) {
    std::ostringstream os;
    os << "P6\n" << s.cols << ' ' << s.rows << "\n255\n";
    for (int r = s.rows - 1; r >= 0; --r) {
        for (int c = 0; c < s.cols; ++c) {
            const double d = s.at(r, c);
            bool contour = false;
            if (c + 1 < s.cols) contour |= (d < 0) != (s.at(r, c + 1) < 0);
            if (r + 1 < s.rows) contour |= (d < 0) != (s.at(r + 1, c) < 0);
            std::array<std::uint8_t, 3> rgb = contour ? std::array<std::uint8_t, 3>{0, 0, 0} : slice_color(d);
            if (s.masked[static_cast<std::size_t>(r) * s.cols + c])
                for (auto& ch : rgb) ch = static_cast<std::uint8_t>(ch / 2);
            os.write(reinterpret_cast<const char*>(rgb.data()), 3);
        }
    }
    return os.str();
}

}  // namespace lgsdf
