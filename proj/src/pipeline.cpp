#include "hmt/pipeline.hpp"

#include "hmt/error.hpp"
#include "hmt/feature_io.hpp"
#include "hmt/image_io.hpp"
#include "hmt/renderer.hpp"
#include "hmt/toml_lite.hpp"

#include <json.hpp>

#include <cstdio>
#include <sstream>

namespace hmt {

namespace {

std::string frame_name(int t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d.png", t);
    return buf;
}

}  // namespace

RenderedFrame render_model_frame(const Model& model, const synth::SceneBundle& b, int t, DriveMode drive,
                                 BlendMode blend, int threads) {
    const auto path = drive == DriveMode::audio ? hmmm::FusionPath::audio : hmmm::FusionPath::vanilla;
    const MotionOutput out = model.forward(frame_conditions(b, t), path, 0.0, nullptr);
    RenderOptions opts;
    opts.threads = threads;
    const RenderOutput rf = render(out.face, b.camera, opts);
    const RenderOutput rm = render(out.mouth, b.camera, opts);
    RenderedFrame f;
    f.index = t;
    f.image = blend_head(rf.color, rf.alpha, rm.color, rm.alpha, blend).image.value();
    f.landmarks = synth::project_points(out.face.mu.value(), b.geometry.landmark_ids, b.camera);
    f.aus = synth::estimate_aus(model.face.field.mu.value(), out.face.mu.value(), b.camera).transpose();
    return f;
}

std::vector<RenderedFrame> render_frames(const Model& model, const synth::SceneBundle& b, int start, int count,
                                         DriveMode drive, BlendMode blend, int threads) {
    const int end = count < 0 ? b.config.frames : start + count;
    if (start < 0 || end > b.config.frames || start > end) {
        throw DataError("frame range [" + std::to_string(start) + ", " + std::to_string(end) +
                        ") is outside the bundle's " + std::to_string(b.config.frames) + " frames");
    }
    std::vector<RenderedFrame> out;
    for (int t = start; t < end; ++t) out.push_back(render_model_frame(model, b, t, drive, blend, threads));
    return out;
}

void write_render_dir(const std::filesystem::path& dir, const std::vector<RenderedFrame>& frames, ImageSize size,
                      DriveMode drive, BlendMode blend) {
    std::filesystem::create_directories(dir / "frames");
    std::ostringstream m;
    m << "[render]\n"
      << "drive = " << toml::quote(to_string(drive)) << "\n"
      << "blend = " << toml::quote(to_string(blend)) << "\n"
      << "width = " << size.width << "\n"
      << "height = " << size.height << "\n"
      << "frames = [";
    for (std::size_t i = 0; i < frames.size(); ++i) m << (i ? ", " : "") << frames[i].index;
    m << "]\n";
    io::write_file(dir / "render.toml", m.str());

    const auto n = static_cast<std::uint64_t>(frames.size());
    io::Tensor images;
    images.dims = {n, static_cast<std::uint64_t>(size.height), static_cast<std::uint64_t>(size.width), 3};
    Mat landmarks(static_cast<Eigen::Index>(n), 2 * synth::kLandmarkCount);
    Mat aus(static_cast<Eigen::Index>(n), cmdm::kAuCount);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& f = frames[i];
        images.data.insert(images.data.end(), f.image.data(), f.image.data() + f.image.size());
        landmarks.row(static_cast<Eigen::Index>(i)) = f.landmarks;
        aus.row(static_cast<Eigen::Index>(i)) = f.aus;
        io::write_png(dir / "frames" / frame_name(f.index), f.image, size);
    }
    io::write_hmtk(dir / "frames.hmtk", images);
    io::write_matrix(dir / "landmarks.hmtk", landmarks, {n, synth::kLandmarkCount, 2});
    io::write_matrix(dir / "aus.hmtk", aus);
}

RenderDir read_render_dir(const std::filesystem::path& dir, ImageSize size) {
    const auto manifest = dir / "render.toml";
    if (!std::filesystem::exists(manifest)) throw DataError(dir.string() + ": missing render.toml");
    toml::Table t;
    try {
        t = toml::parse_file(manifest);
    } catch (const ConfigError& e) {
        throw DataError(std::string("bad render manifest: ") + e.what());
    }
    RenderDir r;
    auto it = t.find("render.frames");
    if (it == t.end()) throw DataError(manifest.string() + ": missing render.frames");
    try {
        for (const auto& v : it->second.as_array("render.frames")) r.indices.push_back(static_cast<int>(v.as_int("render.frames")));
    } catch (const ConfigError& e) {
        throw DataError(e.what());
    }
    std::vector<int> missing;
    for (int idx : r.indices) {
        if (!std::filesystem::exists(dir / "frames" / frame_name(idx))) missing.push_back(idx);
    }
    if (!missing.empty()) {
        std::string list;
        for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? ", " : "") + std::to_string(missing[i]);
        throw DataError(dir.string() + ": missing rendered frames " + list);
    }
    const auto n = static_cast<std::uint64_t>(r.indices.size());
    const io::Tensor images = io::read_hmtk(dir / "frames.hmtk");
    const std::vector<std::uint64_t> want = {n, static_cast<std::uint64_t>(size.height),
                                             static_cast<std::uint64_t>(size.width), 3};
    if (images.dims != want) throw DataError(dir.string() + ": frames.hmtk does not match the manifest or bundle size");
    const Eigen::Index px = size.pixels() * 3;
    for (std::uint64_t i = 0; i < n; ++i) {
        Mat img(size.pixels(), 3);
        std::copy_n(images.data.begin() + static_cast<std::ptrdiff_t>(i * px), px, img.data());
        r.images.push_back(std::move(img));
    }
    r.landmarks = io::read_matrix(dir / "landmarks.hmtk");
    r.aus = io::read_matrix(dir / "aus.hmtk");
    if (r.landmarks.rows() != static_cast<Eigen::Index>(n) || r.landmarks.cols() != 2 * synth::kLandmarkCount ||
        r.aus.rows() != static_cast<Eigen::Index>(n) || r.aus.cols() != cmdm::kAuCount) {
        throw DataError(dir.string() + ": landmark or AU tables do not match the frame list");
    }
    return r;
}

EvalReport evaluate(const RenderDir& r, const synth::SceneBundle& b) {
    std::vector<int> bad;
    for (int idx : r.indices) {
        if (idx < 0 || idx >= b.config.frames) bad.push_back(idx);
    }
    if (!bad.empty()) {
        std::string list;
        for (std::size_t i = 0; i < bad.size(); ++i) list += (i ? ", " : "") + std::to_string(bad[i]);
        throw DataError("rendered frames not present in the bundle: " + list);
    }
    EvalReport rep;
    const ImageSize size = b.size();
    const auto n = static_cast<Eigen::Index>(r.indices.size());
    Mat pred_au(n, cmdm::kAuCount), gt_au(n, cmdm::kAuCount);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int t = r.indices[i];
        FrameMetrics f;
        f.index = t;
        const Mat& gt = b.gt_frames[t];
        f.psnr = psnr(r.images[i], gt);
        f.ssim = ssim(r.images[i], gt, size);
        f.perceptual = perceptual_distance(r.images[i], gt, size);
        f.lmd = lmd(r.landmarks.row(i), b.landmarks.row(t));
        f.aue = aue(r.aus.row(i), b.au_traj.row(t));
        pred_au.row(i) = r.aus.row(i);
        gt_au.row(i) = b.au_traj.row(t);
        rep.frames.push_back(f);
    }
    rep.mean.index = -1;
    if (n > 0) {
        for (const auto& f : rep.frames) {
            rep.mean.psnr += f.psnr / n;
            rep.mean.ssim += f.ssim / n;
            rep.mean.perceptual += f.perceptual / n;
            rep.mean.lmd += f.lmd / n;
        }
        rep.mean.aue = aue(pred_au, gt_au);
    }
    return rep;
}

EvalReport evaluate(const std::vector<RenderedFrame>& frames, const synth::SceneBundle& b) {
    RenderDir r;
    r.landmarks.resize(static_cast<Eigen::Index>(frames.size()), 2 * synth::kLandmarkCount);
    r.aus.resize(static_cast<Eigen::Index>(frames.size()), cmdm::kAuCount);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        r.indices.push_back(frames[i].index);
        r.images.push_back(frames[i].image);
        r.landmarks.row(static_cast<Eigen::Index>(i)) = frames[i].landmarks;
        r.aus.row(static_cast<Eigen::Index>(i)) = frames[i].aus;
    }
    return evaluate(r, b);
}

std::string report_text(const EvalReport& r) {
    std::ostringstream o;
    char line[160];
    std::snprintf(line, sizeof(line), "%-8s %9s %8s %10s %8s %8s %8s\n", "frame", "psnr_db", "ssim", "proxy", "lmd_px",
                  "aue_l", "aue_u");
    o << line;
    auto row = [&](const std::string& label, const FrameMetrics& f) {
        std::snprintf(line, sizeof(line), "%-8s %9.4f %8.5f %10.6f %8.4f %8.4f %8.4f\n", label.c_str(), f.psnr, f.ssim,
                      f.perceptual, f.lmd, f.aue.lower, f.aue.upper);
        o << line;
    };
    for (const auto& f : r.frames) row(std::to_string(f.index), f);
    row("mean", r.mean);
    return o.str();
}

std::string report_jsonl(const EvalReport& r) {
    std::ostringstream o;
    auto emit = [&](const FrameMetrics& f, bool mean) {
        nlohmann::ordered_json j;
        if (mean) j["frame"] = "mean";
        else j["frame"] = f.index;
        j["psnr"] = f.psnr;
        j["ssim"] = f.ssim;
        j["perceptual_proxy"] = f.perceptual;
        j["lmd"] = f.lmd;
        j["aue_l"] = f.aue.lower;
        j["aue_u"] = f.aue.upper;
        o << j.dump() << '\n';
    };
    for (const auto& f : r.frames) emit(f, false);
    emit(r.mean, true);
    return o.str();
}

}  // namespace hmt
