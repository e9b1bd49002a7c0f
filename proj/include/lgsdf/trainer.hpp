#pragma once

// Continual global learning: every frame is sampled, fused into the grid, and
// followed by a fixed number of optimizer iterations on the currently updated
// cells plus a fresh uniform sample of historically updated cells.

#include "lgsdf/fusion.hpp"
#include "lgsdf/field.hpp"
#include "lgsdf/losses.hpp"
#include "lgsdf/optim.hpp"
#include "lgsdf/sampling.hpp"
#include "lgsdf/scene.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <functional>
#include <unordered_set>
#include <vector>

namespace lgsdf {

/// Uniform sample of `k` distinct indices from [0, n) (Floyd's algorithm),
/// in draw order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> out;
    if (k >= n) {
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = i;
        return out;
    }
    std::unordered_set<std::size_t> chosen;
    chosen.reserve(2 * k);
    out.reserve(k);
    for (std::size_t j = n - k; j < n; ++j) {
        const std::size_t t = uniform_index(rng, j + 1);
        const std::size_t pick = chosen.count(t) ? j : t;
        chosen.insert(pick);
        out.push_back(pick);
    }
    return out;
}

inline TrainItem make_item(const GridStore& store, const CellIndex& idx, CellSource source,
                           const LossConfig& cfg) {
    const GridCell& cell = *store.find(idx);
    TrainItem item;
    item.position = store.center(idx);
    item.distance = cell.distance;
    item.gradient = cell.gradient;
    item.near_surface = std::abs(cell.distance) < cfg.truncation;
    item.source = source;
    return item;
}

/// All cells touched by the latest frame plus `n_history` cells drawn
/// uniformly without replacement from every updated cell; history draws that
/// duplicate a current cell are dropped.
inline TrainBatch select_train_grids(const GridStore& store, const LossConfig& cfg, Rng& rng) {
    TrainBatch batch;
    if (cfg.use_current) {
        batch.reserve(store.current().size() + static_cast<std::size_t>(cfg.n_history));
        for (const auto& idx : store.current()) batch.push_back(make_item(store, idx, CellSource::Current, cfg));
    }
    if (cfg.use_history && !store.history().empty()) {
        const auto& hist = store.history();
        for (std::size_t i : sample_without_replacement(hist.size(), static_cast<std::size_t>(cfg.n_history), rng)) {
            if (cfg.use_current && store.in_current(hist[i])) continue;
            batch.push_back(make_item(store, hist[i], CellSource::History, cfg));
        }
    }
    if (batch.empty()) throw Error("select_train_grids: no updated cells to train on");
    return batch;
}

struct PipelineConfig {
    SamplingConfig sampling;
    FusionConfig fusion;
    EmbeddingConfig embedding;
    NetworkConfig network;
    LossConfig loss;
    AdamConfig optimizer;
    std::uint64_t seed = 0;

    void validate() const {
        sampling.validate();
        fusion.validate();
        embedding.validate();
        network.validate();
        loss.validate();
        optimizer.validate();
    }
};

struct IterationLog {
    LossTerms loss;
    std::size_t n_current = 0;
    std::size_t n_history = 0;
};

struct FrameReport {
    int frame_index = 0;
    bool skipped = false;
    std::string warning;
    std::size_t n_pixels = 0;
    std::size_t n_points = 0;
    std::size_t n_current_cells = 0;
    std::size_t n_history_cells = 0;
    std::vector<IterationLog> iterations;
    double seconds = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j = {{"frame", frame_index},
                            {"skipped", skipped},
                            {"pixels", n_pixels},
                            {"points", n_points},
                            {"current_cells", n_current_cells},
                            {"history_cells", n_history_cells},
                            {"seconds", seconds}};
        if (!warning.empty()) j["warning"] = warning;
        nlohmann::json its = nlohmann::json::array();
        for (const auto& it : iterations)
            its.push_back({{"total", it.loss.total},
                           {"sdf", it.loss.sdf},
                           {"grad", it.loss.grad},
                           {"eik", it.loss.eik},
                           {"batch_current", it.n_current},
                           {"batch_history", it.n_history}});
        j["iterations"] = its;
        return j;
    }
};

/// Complete mapping state: fused grid, network, optimizer, and the single RNG
/// every random decision draws from.
template <typename S>
class Pipeline {
public:
    explicit Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed), store_(cfg_.fusion) {
        cfg_.validate();
        params_ = init_params<S>(cfg_.embedding, cfg_.network, rng_);
        adam_ = AdamState<S>::fresh(params_, cfg_.optimizer);
        grads_ = FieldParams<S>::zeros(cfg_.embedding, cfg_.network);
    }

    const PipelineConfig& config() const { return cfg_; }
    const GridStore& grid() const { return store_; }
    const FieldParams<S>& params() const { return params_; }
    const AdamState<S>& optimizer() const { return adam_; }
    int frames_processed() const { return frames_processed_; }

    /// Active sampling and local fusion of one frame (no training).
    FrameReport integrate(const DepthFrame& frame) {
        FrameReport report;
        report.frame_index = frame.index();
        const std::size_t valid = frame.valid_count();
        if (valid == 0) {
            report.skipped = true;
            report.warning = "frame has no valid pixels";
            store_.begin_frame();
            return report;
        }
        const NormalImage normals = normal_render(frame);
        const BlockValues xi = block_irregularity(frame, normals, cfg_.sampling);
        const PixelSample pixels = sample_pixels(frame, xi, cfg_.sampling, rng_);
        std::vector<RaySample> rays;
        rays.reserve(pixels.pixels.size());
        for (const Pixel& px : pixels.pixels) {
            // Surfaces closer than the minimum sampling depth cannot host a ray.
            const double range = *frame.depth(px.u, px.v) * frame.camera().unproject(px.u, px.v).norm();
            if (range + cfg_.sampling.behind_surface <= cfg_.sampling.min_depth) continue;
            rays.push_back(sample_points(frame, px, cfg_.sampling, rng_));
        }
        const SurfaceSet surface = SurfaceSet::from_rays(rays, normals);
        integrate_frame(store_, rays, surface, cfg_.fusion, frame.index());
        report.n_pixels = rays.size();
        for (const auto& r : rays) report.n_points += r.samples.size();
        report.n_current_cells = store_.current().size();
        report.n_history_cells = store_.history().size();
        return report;
    }

    /// One optimizer iteration on a freshly selected batch.
    IterationLog train_iteration() {
        const TrainBatch batch = select_train_grids(store_, cfg_.loss, rng_);
        IterationLog log;
        for (const auto& item : batch) (item.source == CellSource::Current ? log.n_current : log.n_history)++;
        log.loss = ws_.loss_and_gradients(params_, batch, cfg_.loss, grads_);
        adam_step(params_, grads_, adam_);
        return log;
    }

    FrameReport train_frame(const DepthFrame& frame) {
        const auto start = std::chrono::steady_clock::now();
        FrameReport report = integrate(frame);
        if (!report.skipped) {
            for (int it = 0; it < cfg_.loss.iterations; ++it) report.iterations.push_back(train_iteration());
            ++frames_processed_;
        }
        report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return report;
    }

private:
    PipelineConfig cfg_;
    Rng rng_;
    GridStore store_;
    FieldParams<S> params_;
    AdamState<S> adam_;
    FieldParams<S> grads_;
    FieldWorkspace<S> ws_;
    int frames_processed_ = 0;
};

struct SequenceSummary {
    std::vector<FrameReport> reports;
    std::vector<int> checkpoint_frames;  ///< 1-based count of frames consumed at each checkpoint
};

/// Feeds `n_frames` frames from `get_frame` through the pipeline in order.
/// A checkpoint callback fires every `checkpoint_every` frames and after the
/// last one. Frames whose loading or processing fails are skipped with a
/// warning report.
template <typename S>
SequenceSummary run_sequence(Pipeline<S>& pipeline, std::size_t n_frames,
                             const std::function<DepthFrame(std::size_t)>& get_frame, int checkpoint_every,
                             const std::function<void(int, const Pipeline<S>&)>& on_checkpoint = {},
                             const std::function<void(const FrameReport&)>& on_report = {}) {
    if (n_frames == 0) throw Error("run_sequence: empty frame stream");
    if (checkpoint_every < 1) throw Error("run_sequence: checkpoint interval must be >= 1");
    SequenceSummary summary;
    for (std::size_t i = 0; i < n_frames; ++i) {
        FrameReport report;
        try {
            report = pipeline.train_frame(get_frame(i));
        } catch (const Error& e) {
            report.frame_index = static_cast<int>(i);
            report.skipped = true;
            report.warning = e.what();
        }
        if (on_report) on_report(report);
        summary.reports.push_back(std::move(report));
        const int consumed = static_cast<int>(i + 1);
        if (consumed % checkpoint_every == 0 || i + 1 == n_frames) {
            summary.checkpoint_frames.push_back(consumed);
            if (on_checkpoint) on_checkpoint(consumed, pipeline);
        }
    }
    return summary;
}

}  // namespace lgsdf
