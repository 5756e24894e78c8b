#include "generators.hpp"

#include "hmt/checkpoint.hpp"
#include "hmt/config.hpp"
#include "hmt/error.hpp"
#include "hmt/feature_io.hpp"
#include "hmt/pipeline.hpp"
#include "hmt/toml_lite.hpp"
#include "hmt/trainer.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hmt;
namespace fs = std::filesystem;

namespace {

synth::SynthConfig tiny_data() {
    synth::SynthConfig c;
    c.frames = 12;
    c.holdout_frames = 2;
    c.width = 32;
    c.height = 32;
    c.face_primitives = 300;
    c.mouth_primitives = 60;
    return c;
}

const synth::SceneBundle& tiny_bundle() {
    static const synth::SceneBundle b = synth::gen_scene(4, tiny_data());
    return b;
}

RunConfig tiny_run(int static_iters = 6, int motion = 8, int finetune = 4) {
    RunConfig c;
    c.data = tiny_data();
    c.static_iters = static_iters;
    c.motion_iters = motion;
    c.finetune_iters = finetune;
    c.seed = 9;
    return c;
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

fs::path temp_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("hmt_test_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const int rc = std::system((std::string(HMT_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

double grad_mass(const nn::Mlp& m) {
    double s = 0.0;
    for (const auto& l : m.layers) {
        if (l.weight.node()->grad.size()) s += l.weight.grad().cwiseAbs().sum();
        if (l.bias.node()->grad.size()) s += l.bias.grad().cwiseAbs().sum();
    }
    return s;
}

}  // namespace

TEST_CASE("default configuration round-trips through TOML") {
    const RunConfig d;
    CHECK(d.learning_rate == 5e-4);
    CHECK(d.motion_iters == 5000);
    CHECK(d.finetune_iters == 1500);
    CHECK(d.path_ratio.audio == 0.4);
    CHECK(d.mask_min == 0.1);
    CHECK(d.mask_max == 0.3);
    const std::string text = format_config(d);
    CHECK(format_config(parse_config(text)) == text);

    RunConfig p = d;
    p.apply_paper_scale();
    CHECK(p.motion_iters == 50000);
    CHECK(p.finetune_iters == 15000);
}

TEST_CASE("every gate mode and fusion mode is reachable from config") {
    for (const char* g : {"vector", "scalar", "fixed-alpha:0.5", "pure-explicit", "pure-implicit"}) {
        const RunConfig c = parse_config(std::string("[model]\ngate = \"") + g + "\"\n");
        CHECK(hmmm::gate_mode_string(c.fusion) == g);
    }
    CHECK(parse_config("[model]\nfusion = \"concat\"\n").fusion.fusion == hmmm::FusionMode::concat);
    CHECK(parse_config("[train]\nforced_path = \"vanilla\"\n").forced_path == hmmm::FusionPath::vanilla);
}

TEST_CASE("invalid configurations are rejected") {
    CHECK_THROWS_AS(parse_config("[train]\nmotion_itters = 5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[train]\nmotion_iters = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[train]\nlearning_rate = 0.0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[train]\npath_ratio = [0.5, 0.5, 0.5]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[train]\nmask_range = [0.4, 0.2]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[render]\ndrive = \"video\"\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\ngate = \"fixed-alpha:x\"\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[train\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/run.toml"), ConfigError);
}

TEST_CASE("TOML subset") {
    const toml::Table t = toml::parse(
        "# comment\ntop = 1\n[a]\nx = 2.5 # trailing\ns = \"q\\\"uote\"\nflag = true\n[a.b]\narr = [1, 2.0, \"z\"]\n");
    CHECK(t.at("top").as_int("top") == 1);
    CHECK(t.at("a.x").as_double("a.x") == 2.5);
    CHECK(t.at("a.s").as_string("a.s") == "q\"uote");
    CHECK(t.at("a.flag").as_bool("a.flag"));
    CHECK(t.at("a.b.arr").as_array("a.b.arr").size() == 3);
    CHECK_THROWS_AS(toml::parse("x = 1\nx = 2\n"), ConfigError);
    CHECK_THROWS_AS(t.at("a.s").as_int("a.s"), ConfigError);
}

TEST_CASE("config hash separates incompatible settings") {
    const RunConfig a;
    RunConfig b = a;
    b.fusion.gate = hmmm::GateMode::scalar;
    RunConfig c = a;
    c.motion_iters = 7;
    const synth::SynthConfig data;
    CHECK(config_hash(a, data, 0) != config_hash(b, data, 0));
    CHECK(config_hash(a, data, 0) != config_hash(a, data, 1));
    CHECK(config_hash(a, data, 0) == config_hash(c, data, 0));
}

TEST_CASE("checkpoints round-trip and reject corruption") {
    Trainer tr(tiny_bundle(), tiny_run());
    tr.run(nullptr, 9);
    const Checkpoint c = tr.checkpoint();
    const std::string bytes = encode_checkpoint(c);
    const Checkpoint back = decode_checkpoint(bytes);
    CHECK(back == c);
    CHECK(encode_checkpoint(back) == bytes);
    CHECK(back.find("param.cmdm.a2am.0.weight"));

    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad), DataError);
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() / 2)), DataError);
    CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), DataError);

    RunConfig other = tiny_run();
    other.fusion.gate = hmmm::GateMode::pure_implicit;
    Trainer t2(tiny_bundle(), other);
    const Checkpoint before = t2.checkpoint();
    CHECK_THROWS_AS(t2.restore(c), DataError);
    CHECK(t2.checkpoint() == before);

    Checkpoint missing = c;
    missing.tensors.erase(missing.tensors.begin());
    Trainer t3(tiny_bundle(), tiny_run());
    CHECK_THROWS_AS(t3.restore(missing), DataError);
}

TEST_CASE("training is deterministic and resumes step for step") {
    std::ostringstream a, b;
    Trainer t1(tiny_bundle(), tiny_run());
    t1.run(&a);
    Trainer t2(tiny_bundle(), tiny_run());
    t2.run(&b);
    CHECK(a.str() == b.str());
    CHECK(lines(a.str()).size() == 18);

    std::ostringstream first, second;
    Trainer t3(tiny_bundle(), tiny_run());
    t3.run(&first, 10);
    const std::string bytes = encode_checkpoint(t3.checkpoint());
    Trainer t4(tiny_bundle(), tiny_run());
    t4.restore(decode_checkpoint(bytes));
    t4.run(&second);
    CHECK(first.str() + second.str() == a.str());
    CHECK(t4.checkpoint() == t1.checkpoint());
}

TEST_CASE("loss log records path, gate statistics and each term") {
    std::ostringstream log;
    Trainer t(tiny_bundle(), tiny_run(1, 3, 1));
    t.run(&log);
    const auto ls = lines(log.str());
    REQUIRE(ls.size() == 5);
    CHECK(ls[0].find("\"stage\":\"static\"") != std::string::npos);
    CHECK(ls[1].find("\"stage\":\"motion\"") != std::string::npos);
    CHECK(ls[4].find("\"stage\":\"finetune\"") != std::string::npos);
    for (const char* key : {"\"path\"", "\"alpha_mean\"", "\"l1\"", "\"d_ssim\"", "\"perceptual\"", "\"align\"",
                            "\"mouth_total\"", "\"total\""}) {
        CHECK(ls[2].find(key) != std::string::npos);
    }
}

TEST_CASE("audio path reaches the audio-to-AU mapper and vanilla does not") {
    const synth::SceneBundle& b = tiny_bundle();
    Model m(b.geometry, ModelConfig{}, 3);
    Rng init(4);
    m.face.net.deform.layers.back().weight.mutable_value() = test::random_mat(init, 128, 10, -1e-2, 1e-2);
    m.mouth.deform.layers.back().weight.mutable_value() = test::random_mat(init, 64, 10, -1e-2, 1e-2);
    const synth::FrameRender gt = synth::render_frame(b.geometry, b.aus(3), b.camera, BlendMode::as_written);
    auto a2am_grad = [&](hmmm::FusionPath path, double lambda3) {
        for (auto p : m.all_params()) p.param.zero_grad();
        Rng rng(5);
        const MotionOutput out = m.forward(frame_conditions(b, 3), path, 0.2, &rng);
        const RenderOutput rf = render(out.face, b.camera);
        LossWeights w;
        w.lambda3 = lambda3;
        const LossTerms t =
            total_loss(rf.color, gt.face.color, b.size(), out.features.c_e_al, ad::constant(out.features.c_e_vl.value()), w);
        ad::backward(t.total);
        return grad_mass(m.cmdm.a2am.mlp);
    };
    CHECK(a2am_grad(hmmm::FusionPath::audio, 0.0) > 0.0);
    CHECK(a2am_grad(hmmm::FusionPath::vanilla, 0.0) == 0.0);
    CHECK(a2am_grad(hmmm::FusionPath::masked, 0.0) == 0.0);
    CHECK(a2am_grad(hmmm::FusionPath::vanilla, 1e-3) > 0.0);
}

TEST_CASE("without motion training renders equal the canonical fields") {
    const synth::SceneBundle& b = tiny_bundle();
    Trainer t(b, tiny_run(5, 0, 0));
    t.run(nullptr);
    REQUIRE(t.done());
    const Model& m = t.model();
    const RenderOutput f = render(canonical_view(m.face.field), b.camera);
    const RenderOutput mo = render(canonical_view(m.mouth.field), b.camera);
    const Mat canonical = blend_head(f.color, f.alpha, mo.color, mo.alpha).image.value();
    for (auto drive : {DriveMode::audio, DriveMode::image}) {
        CHECK(render_model_frame(m, b, 2, drive, BlendMode::as_written).image == canonical);
    }
}

TEST_CASE("render is deterministic, thread invariant and handles empty ranges") {
    const synth::SceneBundle& b = tiny_bundle();
    Trainer t(b, tiny_run(3, 5, 0));
    t.run(nullptr);
    const auto a = render_frames(t.model(), b, 2, 3, DriveMode::audio, BlendMode::as_written, 1);
    const auto c = render_frames(t.model(), b, 2, 3, DriveMode::audio, BlendMode::as_written, 4);
    REQUIRE(a.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(a[i].index == 2 + i);
        CHECK(a[i].image == c[i].image);
        CHECK(a[i].landmarks == c[i].landmarks);
        CHECK(a[i].aus == c[i].aus);
    }
    CHECK(render_frames(t.model(), b, 4, 0, DriveMode::image, BlendMode::as_written).empty());
    CHECK_THROWS_AS(render_frames(t.model(), b, 10, 5, DriveMode::image, BlendMode::as_written), DataError);
}

TEST_CASE("evaluation against the bundle itself") {
    const synth::SceneBundle& b = tiny_bundle();
    std::vector<RenderedFrame> frames;
    for (int t = 0; t < 4; ++t) frames.push_back({t, b.gt_frames[t], b.landmarks.row(t), b.au_traj.row(t)});
    const EvalReport self = evaluate(frames, b);
    CHECK(self.mean.psnr == 99.0);
    CHECK(self.mean.lmd == 0.0);
    CHECK(self.mean.aue.lower == 0.0);
    CHECK(self.mean.aue.upper == 0.0);

    for (auto& f : frames) f.image.array() += 0.1;
    const EvalReport off = evaluate(frames, b);
    for (const auto& f : off.frames) CHECK(f.psnr == doctest::Approx(20.0).epsilon(1e-9));
    CHECK(report_jsonl(off) == report_jsonl(evaluate(frames, b)));
    CHECK(report_text(off) == report_text(evaluate(frames, b)));
    CHECK(lines(report_jsonl(off)).size() == 5);
    CHECK(lines(report_jsonl(off)).back().find("\"frame\":\"mean\"") != std::string::npos);
}

TEST_CASE("render directories round-trip and report missing frames") {
    const synth::SceneBundle& b = tiny_bundle();
    std::vector<RenderedFrame> frames;
    for (int t = 3; t < 7; ++t) frames.push_back({t, b.gt_frames[t], b.landmarks.row(t), b.au_traj.row(t)});
    const fs::path dir = temp_dir("render_dir");
    write_render_dir(dir, frames, b.size(), DriveMode::image, BlendMode::as_written);
    const RenderDir r = read_render_dir(dir, b.size());
    CHECK(r.indices == std::vector<int>{3, 4, 5, 6});
    CHECK(r.images[1] == b.gt_frames[4]);
    CHECK(evaluate(r, b).mean.psnr == 99.0);

    fs::remove(dir / "frames" / "0004.png");
    fs::remove(dir / "frames" / "0006.png");
    try {
        read_render_dir(dir, b.size());
        FAIL("expected a DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("4, 6") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("command line subcommands and exit codes") {
    const fs::path dir = temp_dir("cli");
    const std::string cfg = (dir / "run.toml").string();
    {
        std::ofstream f(cfg);
        f << "[paths]\nbundle = \"" << (dir / "bundle").string() << "\"\noutput = \"" << (dir / "run").string()
          << "\"\n[data]\nframes = 8\nholdout_frames = 2\nwidth = 24\nheight = 24\nface_primitives = 200\n"
          << "mouth_primitives = 40\n[train]\nstatic_iters = 2\nmotion_iters = 3\nfinetune_iters = 2\n";
    }
    CHECK(run_cli("inspect --default-config") == 0);
    CHECK(std::system((std::string(HMT_CLI_PATH) + " inspect --default-config > " + (dir / "d.toml").string()).c_str()) == 0);
    CHECK(format_config(load_config(dir / "d.toml")) == format_config(RunConfig{}));

    CHECK(run_cli("train --config " + cfg) == 3);
    CHECK(run_cli("gen-data --config " + cfg + " --seed 2") == 0);
    CHECK(run_cli("train --config " + cfg + " --seed 2 --threads 2") == 0);
    CHECK(fs::exists(dir / "run" / "loss.jsonl"));
    CHECK(fs::exists(dir / "run" / "checkpoint.hmck"));
    CHECK(run_cli("render --config " + cfg + " --drive image --count 0") == 0);
    CHECK_FALSE(fs::exists(dir / "run" / "render"));
    CHECK(run_cli("render --config " + cfg + " --drive image --start 2 --count 3") == 0);
    CHECK(fs::exists(dir / "run" / "render" / "frames" / "0004.png"));
    CHECK(run_cli("eval --config " + cfg) == 0);
    CHECK(fs::exists(dir / "run" / "render" / "report.jsonl"));
    CHECK(run_cli("inspect --checkpoint " + (dir / "run" / "checkpoint.hmck").string()) == 0);

    CHECK(run_cli("train --config " + (dir / "missing.toml").string()) == 2);
    CHECK(run_cli("render --config " + cfg + " --drive telepathy") == 2);
    CHECK(run_cli("render --config " + cfg + " --blend face-complement") == 2);
    CHECK(run_cli("frobnicate") == 2);

    {
        std::ofstream f(cfg, std::ios::app);
        f << "[model]\ngate = \"scalar\"\n";
    }
    CHECK(run_cli("render --config " + cfg) == 3);

    {
        std::ofstream f(dir / "explode.toml");
        f << "[paths]\nbundle = \"" << (dir / "bundle").string() << "\"\noutput = \"" << (dir / "boom").string()
          << "\"\n[data]\nframes = 8\nholdout_frames = 2\nwidth = 24\nheight = 24\nface_primitives = 200\n"
          << "mouth_primitives = 40\n[train]\nstatic_iters = 20\nlearning_rate = 1e300\n";
    }
    CHECK(run_cli("train --config " + (dir / "explode.toml").string()) == 4);
    fs::remove_all(dir);
}
