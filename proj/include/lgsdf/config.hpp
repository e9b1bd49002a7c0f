#pragma once

// Run configuration as a JSON tree. Every key is optional except `seed`;
// unknown keys are rejected with their full path.

#include "lgsdf/eval.hpp"
#include "lgsdf/io.hpp"
#include "lgsdf/scene.hpp"
#include "lgsdf/trainer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace lgsdf {

struct EvalConfig {
    std::size_t sdf_samples = 20000;
    std::size_t completion_samples = 20000;
    std::uint64_t seed = 0;
    double mesh_resolution = 0.05;
    std::optional<Aabb> mesh_bounds;   ///< default: room bounds, else updated-cell bounds
    std::optional<Aabb> region;        ///< SDF-error region; default: updated-cell bounds
    bool observed_only = true;         ///< completion truth restricted to observed surface
    double observed_radius = 0.10;
    bool completion_at_checkpoints = false;
    std::optional<SliceSpec> slice;

    void validate() const {
        if (sdf_samples == 0) throw Error("eval.sdf_samples must be >= 1");
        if (completion_samples == 0) throw Error("eval.completion_samples must be >= 1");
        if (!(mesh_resolution > 0)) throw Error("eval.mesh_resolution must be > 0");
        if (!(observed_radius > 0)) throw Error("eval.observed_radius must be > 0");
        if (mesh_bounds) mesh_bounds->validate();
        if (region) region->validate();
        if (slice) slice->validate();
    }
};

struct RunConfig {
    std::optional<std::uint64_t> seed;
    std::string output_dir = "out";
    int checkpoint_every = 10;
    bool f64 = false;

    std::optional<Scene> scene;
    std::optional<Aabb> room;  ///< walls added to the scene when present
    std::string dataset;       ///< on-disk dataset directory (instead of a scene)

    CameraModel camera;
    RenderOptions render;
    std::vector<TrajectoryConfig> trajectory = {TrajectoryConfig{}};

    PipelineConfig pipeline;
    EvalConfig eval;

    void validate() const {
        if (!seed) throw Error("seed: required");
        if (checkpoint_every < 1) throw Error("checkpoint_every must be >= 1");
        if (scene && !dataset.empty()) throw Error("scene and dataset are mutually exclusive");
        if (!scene && dataset.empty()) throw Error("one of scene or dataset is required");
        if (scene && scene->primitives.empty()) throw Error("scene.primitives must not be empty");
        if (room) room->validate();
        if (trajectory.empty()) throw Error("trajectory must contain at least one segment");
        for (const auto& t : trajectory)
            if (t.n_frames < 1) throw Error("trajectory.n_frames must be >= 1");
        camera.validate();
        if (render.noise_stddev < 0) throw Error("render.noise_stddev must be >= 0");
        pipeline.validate();
        eval.validate();
    }
};

namespace detail {

/// Reads typed members of one JSON object and rejects keys never read.
class ObjectReader {
public:
    ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw Error("config: " + label() + " must be an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const nlohmann::json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        if (!has(key)) return;
        const nlohmann::json& v = raw(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) fail(key, "expected a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) fail(key, "expected an integer");
            if constexpr (std::is_unsigned_v<T>)
                if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
                    fail(key, "expected a nonnegative integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) fail(key, "expected a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) fail(key, "expected a string");
        }
        try {
            out = v.get<T>();
        } catch (const nlohmann::json::exception&) {
            fail(key, "wrong value type");
        }
    }

    void vec3(const std::string& key, Vec3& out) {
        if (!has(key)) return;
        out = parse_vec3(raw(key), key_path(key));
    }

    ObjectReader child(const std::string& key) { return ObjectReader(raw(key), key_path(key)); }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw Error("config: unknown key '" + key_path(it.key()) + "'");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw Error("config: " + key_path(key) + ": " + what);
    }

    static Vec3 parse_vec3(const nlohmann::json& v, const std::string& path) {
        if (!v.is_array() || v.size() != 3) throw Error("config: " + path + ": expected [x, y, z]");
        Vec3 out;
        for (int i = 0; i < 3; ++i) {
            if (!v[i].is_number()) throw Error("config: " + path + ": expected [x, y, z]");
            out[i] = v[i].get<double>();
        }
        return out;
    }

private:
    std::string label() const { return path_.empty() ? "document" : path_; }

    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline Aabb parse_aabb(ObjectReader r) {
    Aabb box;
    if (!r.has("lo") || !r.has("hi")) r.fail("lo", "box needs both lo and hi");
    r.vec3("lo", box.lo);
    r.vec3("hi", box.hi);
    r.finish();
    return box;
}

inline Primitive parse_primitive(ObjectReader r) {
    std::string type;
    r.get("type", type);
    Primitive out;
    if (type == "sphere") {
        Sphere s;
        r.vec3("center", s.center);
        r.get("radius", s.radius);
        if (!(s.radius > 0)) r.fail("radius", "must be > 0");
        out = s;
    } else if (type == "box") {
        Box b;
        r.vec3("center", b.center);
        r.vec3("half_extents", b.half_extents);
        if (!(b.half_extents.array() > 0).all()) r.fail("half_extents", "must be > 0");
        out = b;
    } else if (type == "plane") {
        Plane p;
        r.vec3("point", p.point);
        r.vec3("normal", p.normal);
        if (!(p.normal.norm() > 0)) r.fail("normal", "must be nonzero");
        p.normal.normalize();
        out = p;
    } else {
        r.fail("type", "expected sphere, box or plane");
    }
    r.finish();
    return out;
}

inline TrajectoryConfig parse_trajectory(ObjectReader r) {
    TrajectoryConfig t;
    std::string policy = "orbit";
    r.get("policy", policy);
    if (policy == "orbit") t.policy = TrajectoryPolicy::Orbit;
    else if (policy == "lawnmower") t.policy = TrajectoryPolicy::Lawnmower;
    else r.fail("policy", "expected orbit or lawnmower");
    r.get("n_frames", t.n_frames);
    r.vec3("target", t.target);
    r.get("margin", t.margin);
    r.get("radius", t.radius);
    r.get("height", t.height);
    r.get("start_deg", t.start_deg);
    r.get("sweep_deg", t.sweep_deg);
    r.get("x_min", t.x_min);
    r.get("x_max", t.x_max);
    r.get("y_min", t.y_min);
    r.get("y_max", t.y_max);
    r.get("z_level", t.z_level);
    r.finish();
    return t;
}

inline SliceSpec parse_slice(ObjectReader r) {
    SliceSpec s;
    std::string axis = "z";
    r.get("axis", axis);
    if (axis == "x") s.axis = 0;
    else if (axis == "y") s.axis = 1;
    else if (axis == "z") s.axis = 2;
    else r.fail("axis", "expected x, y or z");
    r.get("coordinate", s.coordinate);
    std::array<double, 2> lo{s.lo.x(), s.lo.y()}, hi{s.hi.x(), s.hi.y()};
    r.get("lo", lo);
    r.get("hi", hi);
    s.lo = {lo[0], lo[1]};
    s.hi = {hi[0], hi[1]};
    r.get("resolution", s.resolution);
    r.get("mask_radius", s.mask_radius);
    r.finish();
    return s;
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    using detail::ObjectReader;
    RunConfig cfg;
    ObjectReader r(j, "");
    if (r.has("seed")) {
        std::uint64_t seed = 0;
        r.get("seed", seed);
        cfg.seed = seed;
    }
    r.get("output_dir", cfg.output_dir);
    r.get("checkpoint_every", cfg.checkpoint_every);
    if (r.has("precision")) {
        std::string p;
        r.get("precision", p);
        if (p == "f32") cfg.f64 = false;
        else if (p == "f64") cfg.f64 = true;
        else r.fail("precision", "expected f32 or f64");
    }
    r.get("dataset", cfg.dataset);

    if (r.has("scene")) {
        ObjectReader s = r.child("scene");
        Scene scene;
        if (s.has("room")) {
            cfg.room = detail::parse_aabb(s.child("room"));
            scene.primitives = room_walls(cfg.room->lo, cfg.room->hi);
        }
        if (s.has("primitives")) {
            const nlohmann::json& list = s.raw("primitives");
            if (!list.is_array()) s.fail("primitives", "expected a list");
            for (std::size_t i = 0; i < list.size(); ++i)
                scene.primitives.push_back(
                    detail::parse_primitive(ObjectReader(list[i], s.key_path("primitives") + "[" + std::to_string(i) + "]")));
        }
        s.finish();
        cfg.scene = std::move(scene);
    }

    if (r.has("camera")) {
        ObjectReader c = r.child("camera");
        c.get("fx", cfg.camera.fx);
        c.get("fy", cfg.camera.fy);
        c.get("cx", cfg.camera.cx);
        c.get("cy", cfg.camera.cy);
        c.get("width", cfg.camera.width);
        c.get("height", cfg.camera.height);
        c.get("near_clip", cfg.camera.near_clip);
        c.get("far_clip", cfg.camera.far_clip);
        c.finish();
    }
    if (r.has("render")) {
        ObjectReader c = r.child("render");
        c.get("surface_tolerance", cfg.render.surface_tolerance);
        c.get("max_steps", cfg.render.max_steps);
        c.get("noise_stddev", cfg.render.noise_stddev);
        c.finish();
    }
    if (r.has("trajectory")) {
        const nlohmann::json& t = r.raw("trajectory");
        cfg.trajectory.clear();
        if (t.is_array()) {
            for (std::size_t i = 0; i < t.size(); ++i)
                cfg.trajectory.push_back(
                    detail::parse_trajectory(ObjectReader(t[i], "trajectory[" + std::to_string(i) + "]")));
        } else {
            cfg.trajectory.push_back(detail::parse_trajectory(ObjectReader(t, "trajectory")));
        }
    }

    PipelineConfig& p = cfg.pipeline;
    if (r.has("sampling")) {
        ObjectReader c = r.child("sampling");
        c.get("pixels_per_frame", p.sampling.pixels_per_frame);
        c.get("lambda_depth", p.sampling.lambda_depth);
        c.get("lambda_normal", p.sampling.lambda_normal);
        c.get("n_stratified", p.sampling.n_stratified);
        c.get("n_near_surface", p.sampling.n_near_surface);
        c.get("min_depth", p.sampling.min_depth);
        c.get("behind_surface", p.sampling.behind_surface);
        c.get("near_surface_std", p.sampling.near_surface_std);
        if (c.has("mode")) {
            std::string m;
            c.get("mode", m);
            if (m == "irregularity") p.sampling.mode = PixelSamplingMode::Irregularity;
            else if (m == "uniform") p.sampling.mode = PixelSamplingMode::UniformRandom;
            else c.fail("mode", "expected irregularity or uniform");
        }
        if (c.has("rounding")) {
            std::string m;
            c.get("rounding", m);
            if (m == "randomized") p.sampling.rounding = QuotaRounding::Randomized;
            else if (m == "largest_remainder") p.sampling.rounding = QuotaRounding::LargestRemainder;
            else c.fail("rounding", "expected randomized or largest_remainder");
        }
        c.finish();
    }
    if (r.has("fusion")) {
        ObjectReader c = r.child("fusion");
        c.get("decay", p.fusion.decay);
        c.get("min_weight", p.fusion.min_weight);
        c.get("max_weight", p.fusion.max_weight);
        c.get("resolution", p.fusion.resolution);
        c.vec3("origin", p.fusion.origin);
        c.finish();
    }
    if (r.has("embedding")) {
        ObjectReader c = r.child("embedding");
        c.get("octaves", p.embedding.octaves);
        c.get("base_frequency", p.embedding.base_frequency);
        c.get("include_input", p.embedding.include_input);
        c.finish();
    }
    if (r.has("network")) {
        ObjectReader c = r.child("network");
        c.get("hidden_layers", p.network.hidden_layers);
        c.get("width", p.network.width);
        c.get("skip_layer", p.network.skip_layer);
        c.get("output_init_scale", p.network.output_init_scale);
        c.finish();
    }
    if (r.has("loss")) {
        ObjectReader c = r.child("loss");
        c.get("truncation", p.loss.truncation);
        c.get("beta", p.loss.beta);
        c.get("lambda_near", p.loss.lambda_near);
        c.get("lambda_grad", p.loss.lambda_grad);
        c.get("lambda_eik", p.loss.lambda_eik);
        c.get("iterations", p.loss.iterations);
        c.get("n_history", p.loss.n_history);
        c.get("use_current", p.loss.use_current);
        c.get("use_history", p.loss.use_history);
        c.get("grad_near_surface_only", p.loss.grad_near_surface_only);
        c.finish();
    }
    if (r.has("optimizer")) {
        ObjectReader c = r.child("optimizer");
        c.get("learning_rate", p.optimizer.learning_rate);
        c.get("weight_decay", p.optimizer.weight_decay);
        c.get("beta1", p.optimizer.beta1);
        c.get("beta2", p.optimizer.beta2);
        c.get("epsilon", p.optimizer.epsilon);
        c.get("decay_biases", p.optimizer.decay_biases);
        c.finish();
    }
    if (r.has("eval")) {
        ObjectReader c = r.child("eval");
        EvalConfig& e = cfg.eval;
        c.get("sdf_samples", e.sdf_samples);
        c.get("completion_samples", e.completion_samples);
        c.get("seed", e.seed);
        c.get("mesh_resolution", e.mesh_resolution);
        if (c.has("mesh_bounds")) e.mesh_bounds = detail::parse_aabb(c.child("mesh_bounds"));
        if (c.has("region")) e.region = detail::parse_aabb(c.child("region"));
        c.get("observed_only", e.observed_only);
        c.get("observed_radius", e.observed_radius);
        c.get("completion_at_checkpoints", e.completion_at_checkpoints);
        if (c.has("slice")) e.slice = detail::parse_slice(c.child("slice"));
        c.finish();
    }
    r.finish();
    if (cfg.seed) p.seed = *cfg.seed;
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("config: " + path.string() + ": " + e.what());
    }
    return parse_run_config(j);
}

inline const char* kAblations[] = {"random-sampling", "no-current-grids", "no-history-grids"};

inline void apply_ablation(RunConfig& cfg, const std::string& name) {
    if (name == "random-sampling") cfg.pipeline.sampling.mode = PixelSamplingMode::UniformRandom;
    else if (name == "no-current-grids") cfg.pipeline.loss.use_current = false;
    else if (name == "no-history-grids") cfg.pipeline.loss.use_history = false;
    else throw Error("unknown ablation '" + name + "' (expected random-sampling, no-current-grids or no-history-grids)");
}

}  // namespace lgsdf
