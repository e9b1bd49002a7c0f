#pragma once

// End-to-end orchestration shared by the command-line tool and the test
// suites: frame production, the training loop with periodic checkpoints, and
// evaluation of a parameter snapshot.

#include "lgsdf/checkpoint.hpp"
#include "lgsdf/config.hpp"
#include "lgsdf/dataset.hpp"
#include "lgsdf/eval.hpp"
#include "lgsdf/io.hpp"
#include "lgsdf/marching_cubes.hpp"
#include "lgsdf/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace lgsdf {

/// Depth-noise engine derived from the run seed.
inline Rng noise_rng_for(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x6e6f6973u};
    return Rng(seq);
}

inline std::vector<Pose> trajectory_poses(const RunConfig& cfg) {
    if (!cfg.scene) throw Error("trajectory requires a scene");
    std::vector<Pose> poses;
    for (const auto& seg : cfg.trajectory) {
        const auto part = generate_trajectory(*cfg.scene, seg);
        poses.insert(poses.end(), part.begin(), part.end());
    }
    return poses;
}

inline std::vector<DepthFrame> render_frames(const RunConfig& cfg) {
    const std::vector<Pose> poses = trajectory_poses(cfg);
    Rng noise = noise_rng_for(cfg.seed.value_or(0));
    std::vector<DepthFrame> frames;
    frames.reserve(poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i)
        frames.push_back(render_depth(*cfg.scene, poses[i], cfg.camera, static_cast<int>(i), cfg.render,
                                      cfg.render.noise_stddev > 0 ? &noise : nullptr));
    return frames;
}

/// Ordered frames from either a rendered scene or an on-disk dataset.
class FrameStream {
public:
    explicit FrameStream(const RunConfig& cfg) {
        if (cfg.scene) frames_ = render_frames(cfg);
        else reader_.emplace(cfg.dataset);
    }
    explicit FrameStream(std::vector<DepthFrame> frames) : frames_(std::move(frames)) {}

    std::size_t size() const { return reader_ ? reader_->size() : frames_.size(); }
    DepthFrame get(std::size_t i) const { return reader_ ? reader_->frame(i) : frames_.at(i); }

private:
    std::vector<DepthFrame> frames_;
    std::optional<DatasetReader> reader_;
};

struct Metrics {
    int checkpoint = 0;
    SdfErrorReport sdf;
    std::optional<CompletionReport> completion;

    nlohmann::json to_json() const {
        nlohmann::json j = sdf.to_json();
        j["checkpoint"] = checkpoint;
        if (completion) {
            j["mesh_completion_m"] = completion->to_json()["mesh_completion_m"];
            j["mesh_completion_empty"] = completion->empty_prediction;
            j["completion_samples"] = completion->n_samples;
        } else {
            j["mesh_completion_m"] = nullptr;
        }
        return j;
    }
};

inline Aabb mesh_bounds_for(const RunConfig& cfg, const GridStore& store) {
    if (cfg.eval.mesh_bounds) return *cfg.eval.mesh_bounds;
    if (cfg.room) return *cfg.room;
    const auto [lo, hi] = store.history_bounds();
    return {lo, hi};
}

/// Metrics of one parameter snapshot. Truth is the analytic scene when one is
/// configured, otherwise the fused grid. Completion needs a scene.
template <typename S>
Metrics evaluate_snapshot(const FieldParams<S>& params, const GridStore& store, const RunConfig& cfg,
                          int checkpoint, bool with_completion, Mesh* mesh_out = nullptr) {
    Metrics m;
    m.checkpoint = checkpoint;
    const FieldFn field = field_fn(params);
    const TruthFn truth = cfg.scene ? scene_truth(*cfg.scene) : grid_truth(store);
    SdfErrorSpec spec;
    spec.n_samples = cfg.eval.sdf_samples;
    spec.seed = cfg.eval.seed;
    spec.region = cfg.eval.region;
    m.sdf = sdf_error(field, truth, spec, &store);
    if (with_completion && cfg.scene) {
        const Aabb bounds = mesh_bounds_for(cfg, store);
        Mesh mesh = extract_mesh(field, bounds.lo, bounds.hi, cfg.eval.mesh_resolution);
        std::function<bool(const Vec3&)> keep;
        std::optional<ObservedSurfaceFilter> filter;
        if (cfg.eval.observed_only) {
            filter.emplace(store, cfg.eval.observed_radius);
            keep = [&filter](const Vec3& p) { return (*filter)(p); };
        }
        const auto samples =
            sample_scene_surface(*cfg.scene, bounds, cfg.eval.completion_samples, cfg.eval.seed, 1e-6, keep);
        m.completion = mesh_completion(samples, mesh);
        if (mesh_out) *mesh_out = std::move(mesh);
    }
    return m;
}

inline std::string checkpoint_name(int frames) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "ckpt_%06d.bin", frames);
    return buf;
}
inline std::string grid_name(int frames) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "grid_%06d.txt", frames);
    return buf;
}

struct RunResult {
    std::vector<Metrics> series;
    SequenceSummary summary;

    const Metrics& final_metrics() const { return series.back(); }
    nlohmann::json metrics_json() const {
        nlohmann::json s = nlohmann::json::array();
        for (const auto& m : series) s.push_back(m.to_json());
        return {{"final", series.back().to_json()}, {"series", s}};
    }
};

struct RunOptions {
    std::optional<std::filesystem::path> output_dir;  ///< artifacts are written only when set
    std::ostream* progress = nullptr;
};

template <typename S>
RunResult run_pipeline(const RunConfig& cfg, const FrameStream& frames, const RunOptions& opts = {},
                       Pipeline<S>* external = nullptr) {
    cfg.validate();
    std::optional<Pipeline<S>> local;
    Pipeline<S>& pipeline = external ? *external : local.emplace(cfg.pipeline);

    namespace fs = std::filesystem;
    std::string log_text;
    if (opts.output_dir) fs::create_directories(*opts.output_dir / "checkpoints");

    RunResult result;
    const int n = static_cast<int>(frames.size());
    auto on_report = [&](const FrameReport& r) {
        if (opts.progress) {
            *opts.progress << "frame " << r.frame_index;
            if (r.skipped) *opts.progress << " skipped: " << r.warning;
            else
                *opts.progress << " loss " << r.iterations.front().loss.total << " -> " << r.iterations.back().loss.total
                               << " cells " << r.n_history_cells << " (" << r.seconds << " s)";
            *opts.progress << '\n';
        }
        if (opts.output_dir) {
            log_text += r.to_json().dump() + "\n";
            write_file_atomic(*opts.output_dir / "log.ndjson", log_text);
        }
    };
    auto on_checkpoint = [&](int consumed, const Pipeline<S>& p) {
        const bool last = consumed == n;
        Mesh mesh;
        result.series.push_back(evaluate_snapshot(p.params(), p.grid(), cfg, consumed,
                                                  last || cfg.eval.completion_at_checkpoints, &mesh));
        if (opts.progress) *opts.progress << "checkpoint " << consumed << ": " << result.series.back().to_json().dump() << '\n';
        if (!opts.output_dir) return;
        const fs::path dir = *opts.output_dir;
        save_checkpoint(dir / "checkpoints" / checkpoint_name(consumed), p.params());
        write_file_atomic(dir / "checkpoints" / grid_name(consumed), export_grid(p.grid()));
        if (last) {
            if (!mesh.vertices.empty() || cfg.scene) write_file_atomic(dir / "mesh.ply", encode_ply(mesh));
            if (cfg.eval.slice) {
                const Slice s = compute_slice(field_fn(p.params()), *cfg.eval.slice, &p.grid());
                write_file_atomic(dir / "slice.csv", encode_slice_csv(s));
                write_file_atomic(dir / "slice.ppm", encode_slice_ppm(s));
            }
        }
        write_file_atomic(dir / "metrics.json", result.metrics_json().dump(2) + "\n");
    };
    result.summary = run_sequence<S>(
        pipeline, frames.size(), [&](std::size_t i) { return frames.get(i); }, cfg.checkpoint_every, on_checkpoint,
        on_report);
    return result;
}

inline RunResult run_config(const RunConfig& cfg, const RunOptions& opts = {}) {
    const FrameStream frames(cfg);
    return cfg.f64 ? run_pipeline<double>(cfg, frames, opts) : run_pipeline<float>(cfg, frames, opts);
}

/// Re-evaluates a saved checkpoint against its grid snapshot.
inline Metrics evaluate_checkpoint_file(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                        const std::filesystem::path& grid, int checkpoint_index,
                                        Mesh* mesh_out = nullptr) {
    if (!std::filesystem::exists(checkpoint)) throw Error("checkpoint not found: " + checkpoint.string());
    if (!std::filesystem::exists(grid)) throw Error("grid snapshot not found: " + grid.string());
    cfg.eval.validate();
    const std::string bytes = read_file(checkpoint);
    const GridStore store = import_grid(read_file(grid));
    if (checkpoint_scalar_bytes(bytes) == 8) {
        const auto shape = FieldParams<double>::zeros(cfg.pipeline.embedding, cfg.pipeline.network);
        const auto params = decode_checkpoint<double>(bytes, &shape);
        return evaluate_snapshot(params, store, cfg, checkpoint_index, true, mesh_out);
    }
    const auto shape = FieldParams<float>::zeros(cfg.pipeline.embedding, cfg.pipeline.network);
    const auto params = decode_checkpoint<float>(bytes, &shape);
    return evaluate_snapshot(params, store, cfg, checkpoint_index, true, mesh_out);
}

}  // namespace lgsdf
