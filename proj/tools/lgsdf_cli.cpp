#include "lgsdf/run.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>

namespace fs = std::filesystem;
using namespace lgsdf;

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool f64 = false;
    std::optional<int> checkpoint_every;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "override the configured seed");
    cmd->add_option("--out", o.out, "output directory (overrides output_dir)");
    cmd->add_flag("--f64", o.f64, "train and evaluate in double precision");
    cmd->add_option("--checkpoint-every", o.checkpoint_every, "checkpoint interval in frames");
    cmd->add_flag("--quiet", o.quiet, "suppress per-frame progress");
}

RunConfig resolve(const Overrides& o) {
    RunConfig cfg = load_run_config(o.config);
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.pipeline.seed = *o.seed;
    }
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (o.f64) cfg.f64 = true;
    if (o.checkpoint_every) cfg.checkpoint_every = *o.checkpoint_every;
    cfg.validate();
    return cfg;
}

RunOptions options_for(const Overrides& o, const fs::path& dir) {
    RunOptions opts;
    opts.output_dir = dir;
    if (!o.quiet) opts.progress = &std::cerr;
    return opts;
}

void copy_config(const Overrides& o, const fs::path& dir) {
    fs::create_directories(dir);
    write_file_atomic(dir / "config.json", read_file(o.config));
}

int cmd_run(const Overrides& o) {
    const RunConfig cfg = resolve(o);
    const fs::path dir = cfg.output_dir;
    copy_config(o, dir);
    const RunResult result = run_config(cfg, options_for(o, dir));
    std::cout << result.final_metrics().to_json().dump(2) << '\n';
    return 0;
}

int cmd_eval(const Overrides& o, const std::string& checkpoint, std::string grid, std::optional<std::size_t> n_samples,
             const std::string& metrics_out) {
    RunConfig cfg = resolve(o);
    if (n_samples) {
        cfg.eval.sdf_samples = *n_samples;
        cfg.eval.completion_samples = *n_samples;
    }
    cfg.eval.validate();
    const fs::path ckpt(checkpoint);
    if (!fs::exists(ckpt)) throw Error("checkpoint not found: " + ckpt.string());
    int index = 0;
    std::smatch m;
    const std::string stem = ckpt.filename().string();
    if (std::regex_match(stem, m, std::regex(R"(ckpt_(\d+)\.bin)"))) {
        index = std::stoi(m[1]);
        if (grid.empty()) grid = (ckpt.parent_path() / grid_name(index)).string();
    }
    if (grid.empty()) throw Error("eval: --grid is required for checkpoints not named ckpt_<frames>.bin");
    const Metrics metrics = evaluate_checkpoint_file(cfg, ckpt, grid, index);
    const std::string text = metrics.to_json().dump(2) + "\n";
    if (!metrics_out.empty()) write_file_atomic(metrics_out, text);
    std::cout << text;
    return 0;
}

int cmd_ablate(const Overrides& o, const std::string& name) {
    const RunConfig base = resolve(o);
    RunConfig ablated = base;
    apply_ablation(ablated, name);
    ablated.validate();
    const fs::path dir = base.output_dir;
    copy_config(o, dir);
    const FrameStream frames(base);
    auto run_one = [&](const RunConfig& cfg, const fs::path& sub) {
        const RunOptions opts = options_for(o, dir / sub);
        return cfg.f64 ? run_pipeline<double>(cfg, frames, opts) : run_pipeline<float>(cfg, frames, opts);
    };
    const RunResult a = run_one(base, "base");
    const RunResult b = run_one(ablated, name);
    nlohmann::json report = {{"ablation", name},
                             {"base", a.metrics_json()},
                             {"ablated", b.metrics_json()},
                             {"final_sdf_error_m", {{"base", a.final_metrics().sdf.mean}, {"ablated", b.final_metrics().sdf.mean}}}};
    write_file_atomic(dir / "ablation.json", report.dump(2) + "\n");
    std::cout << report["final_sdf_error_m"].dump(2) << '\n';
    return 0;
}

int cmd_render(const Overrides& o, double depth_scale) {
    const RunConfig cfg = resolve(o);
    if (!cfg.scene) throw Error("render-dataset: the config must describe a scene");
    const std::vector<DepthFrame> frames = render_frames(cfg);
    save_dataset(cfg.output_dir, frames, depth_scale);
    std::cout << "wrote " << frames.size() << " frames to " << cfg.output_dir << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lgsdf: continual signed-distance-field mapping"};
    app.require_subcommand(1);

    Overrides run_o, eval_o, ablate_o, render_o;
    auto* run = app.add_subcommand("run", "train on a scene or dataset and write artifacts");
    add_common(run, run_o);

    auto* eval = app.add_subcommand("eval", "recompute metrics for a saved checkpoint");
    add_common(eval, eval_o);
    std::string checkpoint, grid, metrics_out;
    std::optional<std::size_t> n_samples;
    eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    eval->add_option("--grid", grid, "grid snapshot (default: sibling grid_<frames>.txt)");
    eval->add_option("--n-samples", n_samples, "samples for both metrics");
    eval->add_option("--metrics", metrics_out, "write the metrics JSON here as well");

    auto* ablate = app.add_subcommand("ablate", "run base and ablated configurations side by side");
    add_common(ablate, ablate_o);
    std::string ablation;
    ablate->add_option("--name", ablation, "random-sampling | no-current-grids | no-history-grids")->required();

    auto* render = app.add_subcommand("render-dataset", "render the configured scene to a dataset directory");
    add_common(render, render_o);
    double depth_scale = 2e-4;
    render->add_option("--depth-scale", depth_scale, "meters per 16-bit depth unit");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(run_o);
        if (*eval) return cmd_eval(eval_o, checkpoint, grid, n_samples, metrics_out);
        if (*ablate) return cmd_ablate(ablate_o, ablation);
        if (*render) return cmd_render(render_o, depth_scale);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
