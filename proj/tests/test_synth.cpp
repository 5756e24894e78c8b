#include "generators.hpp"

#include "hmt/error.hpp"
#include "hmt/feature_io.hpp"
#include "hmt/synth.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace hmt;
using namespace hmt::synth;

namespace {

SynthConfig small_config() {
    SynthConfig c;
    c.frames = 12;
    c.holdout_frames = 2;
    c.width = 32;
    c.height = 32;
    c.face_primitives = 500;
    c.mouth_primitives = 60;
    return c;
}

std::filesystem::path temp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("hmt_test_synth_" + name);
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("AU trajectories") {
    const Mat a = gen_au_traj(0, 500);
    CHECK(a == gen_au_traj(0, 500));
    CHECK(a != gen_au_traj(1, 500));
    CHECK(a.rows() == 500);
    CHECK(a.cols() == 17);
    CHECK(a.minCoeff() >= 0.0);
    CHECK(a.maxCoeff() <= 5.0);
    for (int c = 0; c < 17; ++c) {
        const Eigen::VectorXd x = a.col(c).array() - a.col(c).mean();
        const double r1 = x.head(499).dot(x.tail(499)) / x.squaredNorm();
        CHECK(r1 > 0.9);
        const Eigen::VectorXd d2 = x.segment(2, 498) - 2 * x.segment(1, 498) + x.head(498);
        // No sharper than a full-range sinusoid of period 20.
        CHECK(d2.cwiseAbs().maxCoeff() <= 5.0 * std::pow(2 * 3.141592653589793 / 20, 2));
    }
    for (int id : {25, 26}) {
        const int slot = cmdm::au_slot(id);
        CHECK(a.col(slot).minCoeff() == doctest::Approx(0.0));
        CHECK(a.col(slot).maxCoeff() == doctest::Approx(5.0));
    }
    for (int c = 0; c < 17; ++c) {
        if (cmdm::kAuIds[c] == 25 || cmdm::kAuIds[c] == 26) continue;
        CHECK(a.col(c).maxCoeff() - a.col(c).minCoeff() <= 3.0 + 1e-12);
    }
}

TEST_CASE("audio features linearly embed the lower AUs") {
    const Mat au = gen_au_traj(3, 200);
    const Mat f = gen_audio_features(au, 3, 0.0);
    CHECK(f.cols() == 512);
    CHECK(f == gen_audio_features(au, 3, 0.0));
    CHECK(gen_audio_features(au, 3, 0.01) == gen_audio_features(au, 3, 0.01));

    Mat x(200, 513);
    x.leftCols(512) = f;
    x.col(512).setOnes();
    const Mat lower = lower_columns(au);
    const Mat coef = x.colPivHouseholderQr().solve(lower);
    CHECK((x * coef - lower).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("ridge oracle bound at the benchmark noise level") {
    const Mat au = gen_au_traj(0, 500);
    const Mat f = gen_audio_features(au, 0, 0.01);
    const RidgeReport r = ridge_oracle(f, au, 400);
    CHECK(r.heldout_mae < 0.05);
    CHECK(r.train_mae < 0.05);
    CHECK(r.lambda == kRidgeLambda);
}

TEST_CASE("rig is linear and keeps upper and lower regions apart") {
    const HeadGeometry head = build_head(SynthConfig{}, 0);
    const Rig rig;
    const Mat& pos = head.face.positions;
    for (int slot = 0; slot < cmdm::kAuCount; ++slot) {
        const int id = cmdm::kAuIds[static_cast<std::size_t>(slot)];
        const bool upper =
            std::find(cmdm::kUpperIds.begin(), cmdm::kUpperIds.end(), id) != cmdm::kUpperIds.end();
        const Mat b = rig.basis(pos, slot);
        CHECK(b.cwiseAbs().maxCoeff() > 0.0);
        CHECK(b.col(2).isZero());
        for (Eigen::Index i = 0; i < pos.rows(); ++i) {
            if (upper != (pos(i, 1) < Rig::kSplitY)) CHECK(b.row(i).isZero());
        }
        cmdm::AuValues au = cmdm::AuValues::Zero();
        au(slot) = 1.7;
        const Mat d1 = rig.displacement(pos, au);
        au(slot) = 3.4;
        CHECK((rig.displacement(pos, au) - 2.0 * d1).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("landmark motion is linear in jaw opening") {
    const SynthConfig cfg = small_config();
    const HeadGeometry head = build_head(cfg, 0);
    const Camera cam = benchmark_camera(cfg.width, cfg.height);
    const Rig rig;
    const Mat rest = project_points(head.face.positions, head.landmark_ids, cam);
    cmdm::AuValues au = cmdm::AuValues::Zero();
    au(cmdm::au_slot(25)) = 1.5;
    const Mat d1 = project_points(deform(head.face, rig, au).positions, head.landmark_ids, cam) - rest;
    au(cmdm::au_slot(25)) = 3.0;
    const Mat d2 = project_points(deform(head.face, rig, au).positions, head.landmark_ids, cam) - rest;
    CHECK((d2 - 2.0 * d1).cwiseAbs().maxCoeff() <= 1e-9);
    double max_dy = 0.0;
    for (int k = 0; k < kLandmarkCount; ++k) max_dy = std::max(max_dy, std::abs(d1(0, 2 * k + 1)));
    CHECK(max_dy > 0.1);
    CHECK(head.landmark_ids.size() == kLandmarkCount);
}

TEST_CASE("zero AUs reproduce the canonical render") {
    const SynthConfig cfg = small_config();
    const HeadGeometry head = build_head(cfg, 0);
    const Camera cam = benchmark_camera(cfg.width, cfg.height);
    const FrameRender a = render_frame(head, cmdm::AuValues::Zero(), cam, cfg.blend_mode);
    const RenderOutput f = render(constant_view(head.face), cam);
    const RenderOutput m = render(constant_view(head.mouth), cam);
    const Mat expect = blend_head(f.color, f.alpha, m.color, m.alpha, cfg.blend_mode).image.value();
    CHECK(a.image == expect);
    cmdm::AuValues au = cmdm::AuValues::Zero();
    au(cmdm::au_slot(26)) = 4.0;
    CHECK(render_frame(head, au, cam, cfg.blend_mode).image != expect);
}

TEST_CASE("AU estimation inverts the rig") {
    const SynthConfig cfg = small_config();
    const HeadGeometry head = build_head(cfg, 2);
    const Camera cam = benchmark_camera(cfg.width, cfg.height);
    const Rig rig;
    Rng rng(3);
    for (int k = 0; k < 10; ++k) {
        cmdm::AuValues au;
        for (int i = 0; i < cmdm::kAuCount; ++i) au(i) = rng.uniform(0, 5);
        const cmdm::AuValues est = estimate_aus(head.face.positions, deform(head.face, rig, au).positions, cam);
        CHECK((est - au).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("bundles are deterministic and round-trip through disk") {
    const SynthConfig cfg = small_config();
    const SceneBundle a = gen_scene(5, cfg);
    const SceneBundle b = gen_scene(5, cfg, 3);
    REQUIRE(a.gt_frames.size() == 12);
    for (int t = 0; t < 12; ++t) CHECK(a.gt_frames[t] == b.gt_frames[t]);
    CHECK(a.landmarks == b.landmarks);
    CHECK(a.audio.features == b.audio.features);

    const auto dir = temp_dir("roundtrip");
    save_bundle(a, dir);
    CHECK(std::filesystem::exists(dir / "frames" / "0011.png"));
    const SceneBundle c = load_bundle(dir);
    CHECK(c.seed == 5);
    CHECK(c.au_traj == a.au_traj);
    CHECK(c.audio.features == a.audio.features);
    CHECK(c.landmarks == a.landmarks);
    CHECK(c.geometry.landmark_ids == a.geometry.landmark_ids);
    CHECK(c.geometry.face.positions == a.geometry.face.positions);
    for (int t = 0; t < 12; ++t) CHECK(c.gt_frames[t] == a.gt_frames[t]);
    CHECK(c.oracle.heldout_mae == a.oracle.heldout_mae);

    std::filesystem::remove(dir / "audio.hmtk");
    CHECK_THROWS_AS(load_bundle(dir), DataError);
    save_bundle(a, dir, false);
    {
        std::ofstream f(dir / "au_traj.hmtk", std::ios::binary | std::ios::trunc);
        f << "HMTK";
    }
    CHECK_THROWS_AS(load_bundle(dir), DataError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("feature file format") {
    io::Tensor t;
    t.dims = {2, 3};
    t.data = {1, 2, 3, 4, 5, 6.5};
    const std::string bytes = io::encode_hmtk(t);
    CHECK(bytes.substr(0, 4) == "HMTK");
    // magic, u16 version, u8 rank, two u64 dims, six f64
    CHECK(bytes.size() == 4 + 2 + 1 + 16 + 48);
    const io::Tensor back = io::decode_hmtk(bytes);
    CHECK(back.dims == t.dims);
    CHECK(back.data == t.data);
    CHECK_THROWS_AS(io::decode_hmtk("HMTX" + bytes.substr(4)), DataError);
    CHECK_THROWS_AS(io::decode_hmtk(bytes.substr(0, bytes.size() - 1)), DataError);
}
