// hmtalker: synthetic data generation, three-stage training, rendering and
// evaluation from the command line.

#include "hmt/checkpoint.hpp"
#include "hmt/config.hpp"
#include "hmt/error.hpp"
#include "hmt/feature_io.hpp"
#include "hmt/pipeline.hpp"
#include "hmt/synth.hpp"
#include "hmt/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace hmt;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumerical = 4 };

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool paper_scale = false;
    std::string drive;
    std::string blend;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "TOML run configuration");
    app->add_option("--seed", c.seed, "Override run.seed");
    app->add_option("--threads", c.threads, "Override run.threads")->check(CLI::PositiveNumber);
    app->add_flag("--paper-scale", c.paper_scale, "Use the full-length stage-2/3 iteration counts");
    app->add_option("--drive", c.drive, "audio | image");
    app->add_option("--blend", c.blend, "as-written | face-complement");
}

RunConfig resolve(const Common& c) {
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.threads) cfg.threads = *c.threads;
    if (c.paper_scale) cfg.apply_paper_scale();
    if (!c.drive.empty()) cfg.drive = parse_drive_mode(c.drive);
    if (!c.blend.empty()) {
        cfg.blend = parse_blend_mode(c.blend);
        cfg.data.blend_mode = cfg.blend;
    }
    cfg.validate();
    return cfg;
}

synth::SceneBundle open_bundle(const std::string& dir) {
    if (!fs::exists(fs::path(dir) / "manifest.toml")) throw DataError("no bundle at '" + dir + "'");
    return synth::load_bundle(dir);
}

int gen_data(const RunConfig& cfg, const std::string& out) {
    const std::string dir = out.empty() ? cfg.bundle_dir : out;
    const synth::SceneBundle b = synth::gen_scene(cfg.seed, cfg.data, cfg.threads);
    synth::save_bundle(b, dir);
    std::printf("bundle %s: %d frames %dx%d, %d+%d primitives, ridge oracle held-out MAE %.5f\n", dir.c_str(),
                b.config.frames, b.config.width, b.config.height, b.config.face_primitives,
                b.config.mouth_primitives, b.oracle.heldout_mae);
    return kOk;
}

int train(const RunConfig& cfg, const std::string& resume, long max_steps) {
    const synth::SceneBundle b = open_bundle(cfg.bundle_dir);
    Trainer trainer(b, cfg);
    const fs::path out = cfg.output_dir;
    fs::create_directories(out);
    const fs::path log_path = out / "loss.jsonl";
    std::ofstream log;
    if (!resume.empty()) {
        trainer.restore(load_checkpoint(resume));
        log.open(log_path, std::ios::app);
    } else {
        log.open(log_path, std::ios::trunc);
    }
    if (!log) throw DataError("cannot write " + log_path.string());

    long steps = 0;
    while (!trainer.done() && (max_steps < 0 || steps < max_steps)) {
        const StepRecord r = trainer.step();
        log << log_line(r) << '\n';
        ++steps;
        if (cfg.checkpoint_every > 0 && steps % cfg.checkpoint_every == 0) {
            save_checkpoint(out / "checkpoint.hmck", trainer.checkpoint());
            log.flush();
        }
    }
    log.flush();
    save_checkpoint(out / "checkpoint.hmck", trainer.checkpoint());
    std::printf("stage %s iter %d after %ld steps; checkpoint %s\n", std::string(to_string(trainer.stage())).c_str(),
                trainer.iteration(), steps, (out / "checkpoint.hmck").c_str());
    return kOk;
}

int render_cmd(const RunConfig& cfg, const std::string& ckpt_path, const std::string& out_dir) {
    const synth::SceneBundle b = open_bundle(cfg.bundle_dir);
    const int end = cfg.frame_count < 0 ? b.config.frames : cfg.frame_start + cfg.frame_count;
    Trainer trainer(b, cfg);
    const fs::path ckpt = ckpt_path.empty() ? fs::path(cfg.output_dir) / "checkpoint.hmck" : fs::path(ckpt_path);
    trainer.restore(load_checkpoint(ckpt));
    if (end <= cfg.frame_start) {
        std::printf("empty frame range, nothing rendered\n");
        return kOk;
    }
    const auto frames = render_frames(trainer.model(), b, cfg.frame_start, end - cfg.frame_start, cfg.drive,
                                      cfg.blend, cfg.threads);
    const fs::path dir = out_dir.empty() ? fs::path(cfg.output_dir) / "render" : fs::path(out_dir);
    write_render_dir(dir, frames, b.size(), cfg.drive, cfg.blend);
    std::printf("rendered %zu frames (%s drive) to %s\n", frames.size(), std::string(to_string(cfg.drive)).c_str(),
                dir.c_str());
    return kOk;
}

int eval_cmd(const RunConfig& cfg, const std::string& rendered, const std::string& report) {
    const synth::SceneBundle b = open_bundle(cfg.bundle_dir);
    const fs::path dir = rendered.empty() ? fs::path(cfg.output_dir) / "render" : fs::path(rendered);
    const EvalReport rep = evaluate(read_render_dir(dir, b.size()), b);
    const fs::path base = report.empty() ? dir / "report" : fs::path(report);
    const std::string text = report_text(rep);
    io::write_file(fs::path(base.string() + ".txt"), text);
    io::write_file(fs::path(base.string() + ".jsonl"), report_jsonl(rep));
    std::fputs(text.c_str(), stdout);
    return kOk;
}

int inspect(const Common& common, bool default_config, const std::string& ckpt, const std::string& bundle) {
    if (default_config) {
        std::fputs(format_config(RunConfig{}).c_str(), stdout);
        return kOk;
    }
    if (!ckpt.empty()) {
        const Checkpoint c = load_checkpoint(ckpt);
        std::size_t values = 0;
        for (const auto& [name, m] : c.tensors) values += static_cast<std::size_t>(m.size());
        std::printf("config_hash %016llx\nstage %s\niteration %llu\ntensors %zu\nvalues %zu\n",
                    static_cast<unsigned long long>(c.config_hash),
                    std::string(to_string(static_cast<Stage>(c.stage))).c_str(),
                    static_cast<unsigned long long>(c.iteration), c.tensors.size(), values);
        return kOk;
    }
    if (!bundle.empty()) {
        const synth::SceneBundle b = open_bundle(bundle);
        std::printf("seed %llu\nframes %d (held out %d)\nsize %dx%d\nprimitives %d face, %d mouth\nblend %s\n"
                    "ridge oracle lambda %g train MAE %.5f held-out MAE %.5f\n",
                    static_cast<unsigned long long>(b.seed), b.config.frames, b.config.holdout_frames,
                    b.config.width, b.config.height, b.config.face_primitives, b.config.mouth_primitives,
                    std::string(to_string(b.config.blend_mode)).c_str(), b.oracle.lambda, b.oracle.train_mae,
                    b.oracle.heldout_mae);
        return kOk;
    }
    std::fputs(format_config(resolve(common)).c_str(), stdout);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid-motion talking head: data, training, rendering and evaluation"};
    app.require_subcommand(1);

    Common common;
    std::string out, resume, ckpt, rendered, report, bundle;
    long max_steps = -1;
    std::optional<int> start, count;
    bool default_config = false;

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic benchmark bundle");
    add_common(gen, common);
    gen->add_option("--out", out, "Bundle directory (default paths.bundle_dir)");

    auto* tr = app.add_subcommand("train", "Run the three training stages");
    add_common(tr, common);
    tr->add_option("--resume", resume, "Continue from a checkpoint");
    tr->add_option("--max-steps", max_steps, "Stop after this many steps");

    auto* rn = app.add_subcommand("render", "Render frames from a checkpoint");
    add_common(rn, common);
    rn->add_option("--checkpoint", ckpt, "Checkpoint (default <output_dir>/checkpoint.hmck)");
    rn->add_option("--out", out, "Render directory (default <output_dir>/render)");
    rn->add_option("--start", start, "First frame");
    rn->add_option("--count", count, "Number of frames");

    auto* ev = app.add_subcommand("eval", "Score rendered frames against the bundle");
    add_common(ev, common);
    ev->add_option("--rendered", rendered, "Render directory (default <output_dir>/render)");
    ev->add_option("--report", report, "Report path without extension");

    auto* in = app.add_subcommand("inspect", "Print configs, checkpoints or bundles");
    add_common(in, common);
    in->add_flag("--default-config", default_config, "Print the default configuration");
    in->add_option("--checkpoint", ckpt, "Summarize a checkpoint");
    in->add_option("--bundle", bundle, "Summarize a bundle");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (*in) return inspect(common, default_config, ckpt, bundle);
        RunConfig cfg = resolve(common);
        if (*gen) return gen_data(cfg, out);
        if (*tr) return train(cfg, resume, max_steps);
        if (*rn) {
            if (start) cfg.frame_start = *start;
            if (count) cfg.frame_count = *count;
            cfg.validate();
            return render_cmd(cfg, ckpt, out);
        }
        if (*ev) return eval_cmd(cfg, rendered, report);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kData;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kFailure;
    }
    return kOk;
}
