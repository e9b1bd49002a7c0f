// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Criteria can be selected by name: `acceptance A3 A6`.

#include "lgsdf/run.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

using namespace lgsdf;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string config_path(const char* name) { return std::string(LGSDF_SOURCE_DIR) + "/configs/" + name; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double relative_error(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale < 1e-9 ? std::abs(a - b) / 1e-9 : std::abs(a - b) / scale;
}

// Shared state between the room-scene reconstruction and the gradient-norm check.
struct RoomRun {
    RunConfig cfg;
    std::optional<Pipeline<float>> pipeline;
    RunResult result;
    double seconds = 0;
};

RoomRun& room_run() {
    static std::optional<RoomRun> run;
    if (run) return *run;
    run.emplace();
    run->cfg = load_run_config(config_path("room.json"));
    const auto t0 = std::chrono::steady_clock::now();
    const FrameStream frames(run->cfg);
    run->pipeline.emplace(run->cfg.pipeline);
    RunOptions opts;
    opts.progress = &std::cerr;
    run->result = run_pipeline<float>(run->cfg, frames, opts, &*run->pipeline);
    run->seconds = seconds_since(t0);
    return *run;
}

Outcome a1_room_reconstruction() {
    RoomRun& run = room_run();
    const Metrics& m = run.result.final_metrics();
    const double sdf = m.sdf.mean;
    const double comp = m.completion ? m.completion->mean : std::numeric_limits<double>::infinity();
    const bool pass = sdf <= 0.05 && comp <= 0.10 && run.seconds <= 15 * 60;
    return {pass, fmt("sdf_error=%.4f m (<= 0.05) completion=%.4f m (<= 0.10) runtime=%.0f s (<= 900) frames=%d",
                      sdf, comp, run.seconds, run.pipeline->frames_processed())};
}

NetworkConfig net_2x8() {
    NetworkConfig net;
    net.hidden_layers = 2;
    net.width = 8;
    net.skip_layer = 2;
    return net;
}

Outcome a2_gradient_check() {
    Rng rng(17);
    auto p = init_params<double>(EmbeddingConfig{}, net_2x8(), rng);
    for (auto& l : p.layers)
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = uniform(rng, -0.3, 0.3);

    const LossConfig cfg;
    TrainBatch batch;
    for (int i = 0; i < 6; ++i) {
        TrainItem item;
        item.position = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
        item.distance = i % 2 == 0 ? uniform(rng, -0.08, 0.08) : uniform(rng, 0.2, 1.0);
        item.gradient = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)).normalized();
        item.near_surface = std::abs(item.distance) < cfg.truncation;
        batch.push_back(item);
    }

    const auto grads = loss_gradients(p, batch, cfg);
    const double h = 1e-5;
    double worst_param = 0;
    std::size_t n_param = 0;
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
        for (int part = 0; part < 2; ++part) {
            const Eigen::Index n = part == 0 ? p.layers[li].weight.size() : p.layers[li].bias.size();
            for (Eigen::Index j = 0; j < n; ++j) {
                auto plus = p, minus = p;
                (part == 0 ? plus.layers[li].weight.data() : plus.layers[li].bias.data())[j] += h;
                (part == 0 ? minus.layers[li].weight.data() : minus.layers[li].bias.data())[j] -= h;
                const double fd = (total_loss(plus, batch, cfg).total - total_loss(minus, batch, cfg).total) / (2 * h);
                const double an = (part == 0 ? grads.layers[li].weight.data() : grads.layers[li].bias.data())[j];
                worst_param = std::max(worst_param, relative_error(an, fd));
                ++n_param;
            }
        }
    }

    const double hx = 1e-4;
    double worst_input = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 q(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
        const Vec3 g = input_gradient(p, q);
        for (int a = 0; a < 3; ++a) {
            const Vec3 e = Vec3::Unit(a) * hx;
            const double fd = (forward(p, Vec3(q + e)) - forward(p, Vec3(q - e))) / (2 * hx);
            worst_input = std::max(worst_input, relative_error(g[a], fd));
        }
    }
    return {worst_param < 1e-4 && worst_input < 1e-5,
            fmt("params=%zu worst_rel=%.2e (< 1e-4) input worst_rel=%.2e (< 1e-5)", n_param, worst_param,
                worst_input)};
}

Outcome a3_fusion_oracle() {
    RunConfig cfg = load_run_config(config_path("room.json"));
    cfg.trajectory.front().n_frames = 10;
    const std::vector<DepthFrame> frames = render_frames(cfg);
    const SamplingConfig& sc = cfg.pipeline.sampling;
    const FusionConfig& fc = cfg.pipeline.fusion;

    GridStore store(fc);
    std::map<std::tuple<int, int, int>, std::pair<double, double>> oracle;  // D, W
    Rng rng(3);
    double worst_capture = 0;
    std::size_t n_captures = 0;
    for (const DepthFrame& frame : frames) {
        const NormalImage normals = normal_render(frame);
        const BlockValues xi = block_irregularity(frame, normals, sc);
        const PixelSample px = sample_pixels(frame, xi, sc, rng);
        std::vector<RaySample> rays;
        for (const Pixel& p : px.pixels) rays.push_back(sample_points(frame, p, sc, rng));
        const SurfaceSet surface = SurfaceSet::from_rays(rays, normals);

        for (std::size_t r = 0; r < rays.size(); ++r) {
            for (const PointSample& s : rays[r].samples) {
                double best = std::numeric_limits<double>::infinity();
                for (const Vec3& q : surface.points()) best = std::min(best, (s.point - q).norm());
                const double gap = rays[r].surface_range - s.range;
                double expected = 0.0;
                if (s.kind != SampleKind::Surface) expected = gap > 0 ? best : (gap < 0 ? -best : 0.0);
                const double got = capture_distance(s, rays[r].surface_range, r, surface).distance;
                worst_capture = std::max(worst_capture, std::abs(got - expected));
                ++n_captures;

                const double w = std::max(std::exp(-fc.decay * std::abs(expected)), fc.min_weight);
                const Vec3 rel = (s.point - fc.origin) / fc.resolution;
                auto& [d_cell, w_cell] = oracle[{static_cast<int>(std::floor(rel.x())),
                                                 static_cast<int>(std::floor(rel.y())),
                                                 static_cast<int>(std::floor(rel.z()))}];
                d_cell = (w_cell * d_cell + w * expected) / (w_cell + w);
                w_cell = std::min(w_cell + w, fc.max_weight);
            }
        }
        integrate_frame(store, rays, surface, fc, frame.index());
    }

    double worst_d = 0, worst_w = 0;
    bool same_cells = store.history().size() == oracle.size();
    for (const auto& [key, dw] : oracle) {
        const GridCell* c = store.find({std::get<0>(key), std::get<1>(key), std::get<2>(key)});
        if (!c) {
            same_cells = false;
            continue;
        }
        worst_d = std::max(worst_d, std::abs(c->distance - dw.first));
        worst_w = std::max(worst_w, std::abs(c->weight - dw.second));
    }

    Rng prop(11);
    bool monotone = true, clamped = true, convex = true;
    GridCell cell;
    for (int i = 0; i < 10000; ++i) {
        const double d = uniform(prop, -1.0, 1.0);
        const double w = std::max(std::exp(-fc.decay * std::abs(d)), fc.min_weight);
        const GridCell next = fuse_point(cell, d, w, Vec3::UnitX(), fc.max_weight);
        monotone &= next.weight >= cell.weight;
        clamped &= next.weight <= fc.max_weight;
        const double lo = cell.weight > 0 ? std::min(cell.distance, d) : d;
        const double hi = cell.weight > 0 ? std::max(cell.distance, d) : d;
        convex &= next.distance >= lo - 1e-15 && next.distance <= hi + 1e-15;
        cell = next;
    }

    const bool pass = worst_capture == 0.0 && same_cells && worst_d <= 1e-9 && worst_w <= 1e-9 && monotone &&
                      clamped && convex;
    return {pass, fmt("captures=%zu max|capture-scan|=%.1e cells=%zu same_cells=%d max|dD|=%.1e max|dW|=%.1e "
                      "W monotone=%d clamped=%d D convex=%d",
                      n_captures, worst_capture, oracle.size(), same_cells, worst_d, worst_w, monotone, clamped,
                      convex)};
}

Outcome a4_pixel_allocation() {
    RunConfig cfg = load_run_config(config_path("room.json"));
    cfg.trajectory.front().n_frames = 1000;
    const std::vector<DepthFrame> frames = render_frames(cfg);
    const SamplingConfig& sc = cfg.pipeline.sampling;
    const int m = sc.pixels_per_frame;

    Rng rng(5);
    bool sums_ok = true;
    std::array<double, kBlockCount> observed{}, expected{};
    for (const DepthFrame& frame : frames) {
        const BlockValues xi = block_irregularity(frame, normal_render(frame), sc);
        const PixelSample px = sample_pixels(frame, xi, sc, rng);
        int sum = 0;
        std::array<int, kBlockCount> seen{};
        for (const Pixel& p : px.pixels) ++seen[block_of(p.u, p.v, frame.width(), frame.height())];
        for (int b = 0; b < kBlockCount; ++b) sum += px.counts[b];
        sums_ok &= sum == m && static_cast<int>(px.pixels.size()) == m && seen == px.counts;
        double total = 0;
        for (double x : xi) total += x;
        for (int b = 0; b < kBlockCount; ++b) {
            observed[b] += px.counts[b];
            expected[b] += total > 0 ? m * xi[b] / total : 0.0;
        }
    }
    double chi2 = 0;
    int cells = 0;
    for (int b = 0; b < kBlockCount; ++b) {
        if (expected[b] <= 0) continue;
        chi2 += (observed[b] - expected[b]) * (observed[b] - expected[b]) / expected[b];
        ++cells;
    }
    const int df = cells - 1;
    const double critical = boost::math::quantile(boost::math::chi_squared(df), 0.99);

    // One block carrying all the irregularity receives every pixel.
    bool single_ok = true;
    for (int hot : {0, 27, 63}) {
        BlockValues xi{};
        xi[hot] = 1.0;
        const PixelSample px = sample_pixels(frames.front(), xi, sc, rng);
        single_ok &= px.counts[hot] == m;
        for (const Pixel& p : px.pixels)
            single_ok &= block_of(p.u, p.v, frames.front().width(), frames.front().height()) == hot;
    }
    return {sums_ok && chi2 < critical && single_ok,
            fmt("frames=%zu sum==M on all=%d chi2=%.2f df=%d critical(0.01)=%.2f single_hot=%d", frames.size(),
                sums_ok, chi2, df, critical, single_ok)};
}

Outcome a5_forgetting() {
    const RunConfig base = load_run_config(config_path("forgetting.json"));
    RunConfig ablated = base;
    apply_ablation(ablated, "no-history-grids");

    auto region_errors = [](const RunConfig& cfg) {
        RunOptions opts;
        opts.progress = &std::cerr;
        const RunResult r = run_config(cfg, opts);
        return std::pair{r.series.at(0).sdf.mean, r.series.at(1).sdf.mean};
    };
    const auto [base_a, base_b] = region_errors(base);
    const auto [abl_a, abl_b] = region_errors(ablated);
    const double base_ratio = base_b / base_a;
    const double abl_ratio = abl_b / abl_a;
    return {base_ratio <= 2.0 && abl_ratio > base_ratio,
            fmt("region A error: base %.4f -> %.4f (ratio %.2f <= 2), no-history %.4f -> %.4f (ratio %.2f > base)",
                base_a, base_b, base_ratio, abl_a, abl_b, abl_ratio)};
}

Outcome a6_loss_values() {
    const LossConfig cfg;
    const Vec3 g = Vec3(0.3, -0.4, 0.5).normalized();
    const Vec3 ortho = Vec3(0.4, 0.3, 0.0).normalized();
    std::vector<std::pair<double, double>> checks = {
        {sdf_loss(0.6, 0.5, cfg).value, 0.1},
        {sdf_loss(-0.1, 0.5, cfg).value, std::exp(0.5) - 1.0},
        {grad_loss(g, g).value, 0.0},
        {grad_loss(ortho, g).value, 1.0},
        {grad_loss(-g, g).value, 2.0},
        {eik_loss(Vec3(0.0, 0.6, 0.8), 0.5, cfg).value, 0.0},
        {eik_loss(Vec3(0.0, 1.2, 1.6), 0.5, cfg).value, 1.0},
        {point_weight(0.01, FusionConfig{}), std::exp(-0.5)},
    };
    double worst = 0;
    for (const auto& [got, want] : checks) worst = std::max(worst, std::abs(got - want));
    return {worst <= 1e-9, fmt("values=%zu max abs error=%.1e (<= 1e-9)", checks.size(), worst)};
}

Outcome a8_determinism() {
    const nlohmann::json j = nlohmann::json::parse(R"({
      "seed": 21, "checkpoint_every": 3, "precision": "f64",
      "scene": {"room": {"lo": [-1.5, -1.5, -1.5], "hi": [1.5, 1.5, 1.5]},
                "primitives": [{"type": "sphere", "center": [0, 0, -1], "radius": 0.4}]},
      "camera": {"fx": 48, "fy": 48, "cx": 31.5, "cy": 23.5, "width": 64, "height": 48},
      "trajectory": {"policy": "orbit", "n_frames": 6, "target": [0, 0, -1], "radius": 1.0, "height": 0.8},
      "network": {"hidden_layers": 3, "width": 32, "skip_layer": 2},
      "loss": {"iterations": 3, "n_history": 256},
      "eval": {"sdf_samples": 2000, "completion_samples": 2000, "mesh_resolution": 0.1}
    })");
    const RunConfig cfg = parse_run_config(j);
    const auto dir = std::filesystem::temp_directory_path() / "lgsdf_acceptance_determinism";
    std::vector<std::string> checkpoints, metrics;
    for (const char* tag : {"a", "b"}) {
        RunOptions opts;
        opts.output_dir = dir / tag;
        const RunResult r = run_config(cfg, opts);
        checkpoints.push_back(read_file(dir / tag / "checkpoints" / checkpoint_name(6)) +
                              read_file(dir / tag / "checkpoints" / checkpoint_name(3)));
        metrics.push_back(r.metrics_json().dump() + read_file(dir / tag / "metrics.json"));
    }
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
    const bool same_ckpt = checkpoints[0] == checkpoints[1];
    const bool same_metrics = metrics[0] == metrics[1];
    return {same_ckpt && same_metrics, fmt("checkpoint bytes identical=%d (%zu bytes) metrics identical=%d", same_ckpt,
                                           checkpoints[0].size(), same_metrics)};
}

Outcome a7_eikonal() {
    RoomRun& run = room_run();
    const Scene& scene = *run.cfg.scene;
    const auto [lo, hi] = run.pipeline->grid().history_bounds();
    const std::vector<Vec3> pts =
        sample_eval_points({lo, hi}, scene_truth(scene), 10000, run.cfg.eval.seed + 1, true);
    FieldWorkspace<float> ws;
    std::vector<double> values;
    std::vector<Vec3> grads;
    ws.evaluate(run.pipeline->params(), pts, values, grads);
    double sum = 0;
    for (const Vec3& g : grads) sum += std::abs(g.norm() - 1.0);
    const double mean = sum / static_cast<double>(grads.size());
    return {mean <= 0.2, fmt("samples=%zu mean | |grad f| - 1 | = %.4f (<= 0.2)", grads.size(), mean)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"A1", a1_room_reconstruction}, {"A2", a2_gradient_check}, {"A3", a3_fusion_oracle},
        {"A4", a4_pixel_allocation},    {"A5", a5_forgetting},     {"A6", a6_loss_values},
        {"A7", a7_eikonal},             {"A8", a8_determinism},
    };
    std::set<std::string> selected(argv + 1, argv + argc);
    for (const auto& s : selected) {
        if (std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == s; })) {
            std::cerr << "unknown criterion: " << s << '\n';
            return 2;
        }
    }

    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        if (!selected.empty() && !selected.count(name)) continue;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::cout << name << ' ' << (o.pass ? "PASS" : "FAIL") << ' ' << o.detail
                  << fmt(" [%.1f s]", seconds_since(t0)) << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
