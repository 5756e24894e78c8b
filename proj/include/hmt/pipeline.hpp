#pragma once

// Inference and evaluation on top of a trained model: driving the model from
// audio or image-derived AUs, persisting rendered frames, and computing the
// metric report against a bundle.

#include "hmt/config.hpp"
#include "hmt/metrics.hpp"
#include "hmt/model.hpp"
#include "hmt/synth.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hmt {

struct RenderedFrame {
    int index = 0;
    Mat image;       // (H W) x 3, unclamped
    Mat landmarks;   // 1 x 2K pixels
    Mat aus;         // 1 x 17 estimated from the predicted motion
};

// audio: audio fusion path (A2AM features), image: vanilla path with the
// bundle's AUs. Upper AUs always come from the bundle.
RenderedFrame render_model_frame(const Model& model, const synth::SceneBundle& b, int t, DriveMode drive,
                                 BlendMode blend, int threads = 1);

std::vector<RenderedFrame> render_frames(const Model& model, const synth::SceneBundle& b, int start, int count,
                                         DriveMode drive, BlendMode blend, int threads = 1);

// frames/NNNN.png, frames.hmtk, landmarks.hmtk, aus.hmtk and render.toml.
void write_render_dir(const std::filesystem::path& dir, const std::vector<RenderedFrame>& frames, ImageSize size,
                      DriveMode drive, BlendMode blend);

struct RenderDir {
    std::vector<int> indices;
    std::vector<Mat> images;
    Mat landmarks;  // F x 2K
    Mat aus;        // F x 17
};

// Throws DataError listing frames whose files are missing.
RenderDir read_render_dir(const std::filesystem::path& dir, ImageSize size);

struct FrameMetrics {
    int index = 0;
    double psnr = 0;
    double ssim = 0;
    double perceptual = 0;
    double lmd = 0;
    AuError aue;
};

struct EvalReport {
    std::vector<FrameMetrics> frames;
    FrameMetrics mean;  // index -1
};

EvalReport evaluate(const RenderDir& r, const synth::SceneBundle& b);
EvalReport evaluate(const std::vector<RenderedFrame>& frames, const synth::SceneBundle& b);

std::string report_text(const EvalReport& r);
// One JSON object per frame, then one with "frame": "mean".
std::string report_jsonl(const EvalReport& r);

}  // namespace hmt
