#pragma once

#include "lgsdf/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace lgsdf {

// ---------------------------------------------------------------------------
// Analytic primitives. Signed distances are positive in free space and
// negative inside the solid.

struct Sphere {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;

    double sdf(const Vec3& q) const { return (q - center).norm() - radius; }
};

/// Axis-aligned box given by its center and half extents.
struct Box {
    Vec3 center = Vec3::Zero();
    Vec3 half_extents = Vec3::Constant(0.5);

    double sdf(const Vec3& q) const {
        const Vec3 d = (q - center).cwiseAbs() - half_extents;
        const double outside = d.cwiseMax(0.0).norm();
        const double inside = std::min(d.maxCoeff(), 0.0);
        return outside + inside;
    }
};

/// Half-space whose solid side lies opposite the unit normal.
struct Plane {
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();

    double sdf(const Vec3& q) const { return normal.dot(q - point); }
};

using Primitive = std::variant<Sphere, Box, Plane>;

inline double primitive_sdf(const Primitive& p, const Vec3& q) {
    return std::visit([&](const auto& shape) { return shape.sdf(q); }, p);
}

/// Union of primitives. The union SDF is the pointwise minimum, which is exact
/// everywhere in free space and for disjoint solids; inside overlapping solids
/// it only bounds the true distance.
struct Scene {
    std::vector<Primitive> primitives;

    double sdf(const Vec3& q) const {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : primitives) best = std::min(best, primitive_sdf(p, q));
        return best;
    }
};

inline double scene_sdf(const Scene& scene, const Vec3& q) {
    if (scene.primitives.empty()) throw Error("scene_sdf: scene has no primitives");
    return scene.sdf(q);
}

/// Closed room: six inward-facing walls spanning [lo, hi].
inline std::vector<Primitive> room_walls(const Vec3& lo, const Vec3& hi) {
    std::vector<Primitive> walls;
    for (int axis = 0; axis < 3; ++axis) {
        Plane low;
        low.point = Vec3::Zero();
        low.point[axis] = lo[axis];
        low.normal = Vec3::Unit(axis);
        Plane high;
        high.point = Vec3::Zero();
        high.point[axis] = hi[axis];
        high.normal = -Vec3::Unit(axis);
        walls.emplace_back(low);
        walls.emplace_back(high);
    }
    return walls;
}

// ---------------------------------------------------------------------------
// Camera and frames

struct CameraModel {
    double fx = 130.0;
    double fy = 130.0;
    double cx = 79.5;
    double cy = 59.5;
    int width = 160;
    int height = 120;
    double near_clip = 0.05;
    double far_clip = 8.0;

    void validate() const {
        if (!(fx > 0 && fy > 0)) throw Error("camera: fx and fy must be positive");
        if (width <= 0 || height <= 0) throw Error("camera: image size must be positive");
        if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
            throw Error("camera: principal point outside the image");
        if (!(near_clip > 0 && near_clip < far_clip)) throw Error("camera: need 0 < near < far");
    }

    /// K^-1 [u, v, 1]: camera-frame ray with unit z component.
    Vec3 unproject(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }
};

/// One posed depth observation. Depths are z-coordinates in the camera frame;
/// pixels without a return hold no value.
class DepthFrame {
public:
    DepthFrame() = default;
    DepthFrame(const CameraModel& camera, const Pose& world_from_camera, int index)
        : camera_(camera), pose_(world_from_camera), index_(index),
          depth_(static_cast<std::size_t>(camera.width) * camera.height,
                 std::numeric_limits<double>::quiet_NaN()) {}

    const CameraModel& camera() const { return camera_; }
    const Pose& pose() const { return pose_; }
    int index() const { return index_; }
    int width() const { return camera_.width; }
    int height() const { return camera_.height; }

    std::optional<double> depth(int u, int v) const {
        const double d = depth_[offset(u, v)];
        if (std::isnan(d)) return std::nullopt;
        return d;
    }
    bool valid(int u, int v) const { return !std::isnan(depth_[offset(u, v)]); }
    void set_depth(int u, int v, std::optional<double> d) {
        depth_[offset(u, v)] = d ? *d : std::numeric_limits<double>::quiet_NaN();
    }

    std::size_t valid_count() const {
        return static_cast<std::size_t>(
            std::count_if(depth_.begin(), depth_.end(), [](double d) { return !std::isnan(d); }));
    }

    /// Camera center in world coordinates.
    Vec3 origin() const { return pose_.translation(); }

    /// World-frame point observed at pixel (u, v); requires a valid depth.
    Vec3 back_project(int u, int v) const {
        const double d = depth_[offset(u, v)];
        return pose_ * (camera_.unproject(u, v) * d);
    }

    /// Raw storage, NaN marking invalid pixels; row-major, v-major.
    const std::vector<double>& raw() const { return depth_; }

    void validate() const {
        camera_.validate();
        if (!is_rigid(pose_)) throw Error("frame " + std::to_string(index_) + ": pose is not rigid");
        for (double d : depth_) {
            if (!std::isnan(d) && !(d > camera_.near_clip && d < camera_.far_clip))
                throw Error("frame " + std::to_string(index_) + ": depth outside (near, far)");
        }
    }

private:
    std::size_t offset(int u, int v) const {
        return static_cast<std::size_t>(v) * camera_.width + u;
    }

    CameraModel camera_;
    Pose pose_ = Pose::Identity();
    int index_ = 0;
    std::vector<double> depth_;
};

// ---------------------------------------------------------------------------
// Rendering

struct RenderOptions {
    double surface_tolerance = 1e-4;
    int max_steps = 512;
    double noise_stddev = 0.0;  ///< optional Gaussian depth noise, meters
};

/// Distance along a unit ray to the first surface crossing, if any before
/// `max_t`.
inline std::optional<double> sphere_trace(const Scene& scene, const Vec3& origin, const Vec3& dir,
                                          double max_t, const RenderOptions& opts) {
    double t = 0.0;
    for (int step = 0; step < opts.max_steps; ++step) {
        const double s = scene.sdf(origin + t * dir);
        if (std::abs(s) < opts.surface_tolerance) return t;
        t += s;
        if (t > max_t || t < 0.0) return std::nullopt;
    }
    return std::nullopt;
}

inline DepthFrame render_depth(const Scene& scene, const Pose& world_from_camera,
                               const CameraModel& camera, int index = 0,
                               const RenderOptions& opts = {}, Rng* noise_rng = nullptr) {
    camera.validate();
    if (!is_rigid(world_from_camera)) throw Error("render_depth: pose is not rigid");
    if (scene.primitives.empty()) throw Error("render_depth: empty scene");
    if (opts.noise_stddev > 0 && noise_rng == nullptr)
        throw Error("render_depth: noise requested without an RNG");

    DepthFrame frame(camera, world_from_camera, index);
    const Vec3 origin = world_from_camera.translation();
    const Mat3 rot = world_from_camera.linear();
    for (int v = 0; v < camera.height; ++v) {
        for (int u = 0; u < camera.width; ++u) {
            const Vec3 ray_cam = camera.unproject(u, v);
            const double len = ray_cam.norm();
            if (!(len > 0) || !std::isfinite(len)) throw Error("render_depth: degenerate ray");
            const double dir_z = 1.0 / len;  // z component of the unit camera ray
            const Vec3 dir = rot * (ray_cam / len);
            const auto t = sphere_trace(scene, origin, dir, camera.far_clip / dir_z, opts);
            if (!t) continue;
            double depth = *t * dir_z;
            if (opts.noise_stddev > 0) depth += normal(*noise_rng, 0.0, opts.noise_stddev);
            if (depth > camera.near_clip && depth < camera.far_clip) frame.set_depth(u, v, depth);
        }
    }
    return frame;
}

// ---------------------------------------------------------------------------
// Trajectories

/// Camera pose at `eye` looking at `target`; camera axes follow the
/// x-right, y-down, z-forward convention with world z up.
inline Pose look_at(const Vec3& eye, const Vec3& target) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 up = Vec3::UnitZ();
    if (std::abs(forward.dot(up)) > 0.999) up = Vec3::UnitY();
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right);
    Pose pose = Pose::Identity();
    pose.linear().col(0) = right;
    pose.linear().col(1) = down;
    pose.linear().col(2) = forward;
    pose.translation() = eye;
    return pose;
}

enum class TrajectoryPolicy { Orbit, Lawnmower };

struct TrajectoryConfig {
    TrajectoryPolicy policy = TrajectoryPolicy::Orbit;
    int n_frames = 100;
    Vec3 target = Vec3::Zero();  ///< point every camera looks at
    double margin = 0.1;         ///< required clearance from any surface, meters

    // orbit: circle of `radius` around target at z = target.z + height
    double radius = 1.5;
    double height = 0.5;
    double start_deg = 0.0;
    double sweep_deg = 360.0;

    // lawnmower: serpentine grid over [x_min, x_max] x [y_min, y_max] at z = z_level
    double x_min = -1.0, x_max = 1.0;
    double y_min = -1.0, y_max = 1.0;
    double z_level = 1.0;
};

inline std::vector<Pose> generate_trajectory(const Scene& scene, const TrajectoryConfig& cfg) {
    if (cfg.n_frames < 1) throw Error("generate_trajectory: n_frames must be >= 1");
    std::vector<Vec3> eyes;
    eyes.reserve(cfg.n_frames);
    if (cfg.policy == TrajectoryPolicy::Orbit) {
        const bool closed = std::abs(cfg.sweep_deg) >= 360.0;
        const int divisions = closed ? cfg.n_frames : std::max(cfg.n_frames - 1, 1);
        for (int i = 0; i < cfg.n_frames; ++i) {
            const double deg = cfg.start_deg + cfg.sweep_deg * i / divisions;
            const double a = deg * kPi / 180.0;
            eyes.emplace_back(cfg.target + Vec3(cfg.radius * std::cos(a), cfg.radius * std::sin(a),
                                                cfg.height));
        }
    } else {
        const int rows = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.n_frames))));
        const int cols = (cfg.n_frames + rows - 1) / rows;
        for (int r = 0; r < rows && static_cast<int>(eyes.size()) < cfg.n_frames; ++r) {
            const double y = rows == 1 ? 0.5 * (cfg.y_min + cfg.y_max)
                                       : cfg.y_min + (cfg.y_max - cfg.y_min) * r / (rows - 1);
            for (int c = 0; c < cols && static_cast<int>(eyes.size()) < cfg.n_frames; ++c) {
                const int cc = (r % 2 == 0) ? c : cols - 1 - c;
                const double x = cols == 1 ? 0.5 * (cfg.x_min + cfg.x_max)
                                           : cfg.x_min + (cfg.x_max - cfg.x_min) * cc / (cols - 1);
                eyes.emplace_back(x, y, cfg.z_level);
            }
        }
    }

    std::vector<Pose> poses;
    poses.reserve(eyes.size());
    for (std::size_t i = 0; i < eyes.size(); ++i) {
        const double clearance = scene_sdf(scene, eyes[i]);
        if (clearance < cfg.margin) {
            std::ostringstream msg;
            msg << "generate_trajectory: pose " << i << " at (" << eyes[i].transpose()
                << ") has clearance " << clearance << " m, below margin " << cfg.margin << " m";
            throw Error(msg.str());
        }
        if ((cfg.target - eyes[i]).norm() < 1e-9)
            throw Error("generate_trajectory: pose " + std::to_string(i) + " coincides with target");
        poses.push_back(look_at(eyes[i], cfg.target));
    }
    return poses;
}

}  // namespace lgsdf
