#pragma once

// Synthetic talking-head benchmark: an ellipsoidal head made of Gaussian
// primitives, a fixed linear rig mapping AU intensities to displacements,
// smooth AU trajectories, and audio features that linearly embed the lower
// AUs. Everything is a deterministic function of (seed, config).

#include "hmt/camera.hpp"
#include "hmt/cmdm.hpp"
#include "hmt/gaussian_field.hpp"
#include "hmt/losses.hpp"
#include "hmt/renderer.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hmt::synth {

struct SynthConfig {
    int frames = 500;
    int width = 64;
    int height = 64;
    int face_primitives = 2000;
    int mouth_primitives = 200;
    double audio_noise = 0.01;
    int holdout_frames = 100;
    BlendMode blend_mode = BlendMode::as_written;

    // Throws ConfigError.
    void validate() const;
    static SynthConfig large();
    int train_frames() const { return frames - holdout_frames; }
};

inline constexpr int kLandmarkCount = 20;
inline constexpr int kLatentDim = 16;
inline constexpr int kNuisanceDim = kLatentDim - cmdm::kLowerCount;

// T x 17, each channel a sum of three sinusoids (periods 20-80 frames) mapped
// into [0, 5]. Jaw and lip-part channels span the full range.
Mat gen_au_traj(std::uint64_t seed, int frames);

struct AudioModel {
    Mat embedding;   // 512 x 16
    Mat mix;         // 10 x 10, invertible
    Mat nuisance;    // 6 x 4: (period_a, phase_a, period_b, phase_b)
};

AudioModel audio_model(std::uint64_t seed);
// T x 16: mixed, centered lower AUs followed by six smooth nuisance channels.
Mat latent_signal(const AudioModel& m, const Mat& au_traj);
// a_t = E g_t + N(0, noise^2).
Mat gen_audio_features(const Mat& au_traj, std::uint64_t seed, double noise = 0.01);

// Ridge regression with intercept from features to the lower AUs.
struct RidgeFit {
    Mat weights;  // D x 10
    Mat bias;     // 1 x 10
    Mat predict(const Mat& features) const;
};
RidgeFit fit_ridge(const Mat& features, const Mat& targets, double lambda);

inline constexpr double kRidgeLambda = 0.1;

struct RidgeReport {
    double train_mae = 0;    // in-sample, over the training frames
    double heldout_mae = 0;  // over the held-out frames
    double lambda = kRidgeLambda;
};
RidgeReport ridge_oracle(const Mat& features, const Mat& au_traj, int train_frames, double lambda = kRidgeLambda);

// Lower 10 columns of a T x 17 trajectory, in ascending id order.
Mat lower_columns(const Mat& au_traj);

// Fixed analytic rig. Each AU moves primitives in the image plane along a
// fixed direction, weighted by Gaussian bumps around its region centers.
// Upper AUs only act above kSplitY and lower AUs only at or below it, so the
// two groups never interact. Displacements are linear in intensity.
class Rig {
public:
    static constexpr double kSplitY = 0.02;

    // N x 3 displacement per unit intensity of the AU in `slot`.
    Mat basis(const Mat& positions, int slot) const;
    Mat displacement(const Mat& positions, const cmdm::AuValues& au) const;
};

struct HeadGeometry {
    PrimitiveSet face;
    PrimitiveSet mouth;
    std::vector<int> landmark_ids;  // indices into face, 4 brow, 4 eye, 8 lip, 4 jaw
};

HeadGeometry build_head(const SynthConfig& cfg, std::uint64_t seed);

PrimitiveSet deform(const PrimitiveSet& set, const Rig& rig, const cmdm::AuValues& au);

// Constant (non-trainable) view of a primitive set at SH degree 0.
FieldView constant_view(const PrimitiveSet& set);

// 1 x 2K row of projected (x, y) pixel positions.
Mat project_points(const Mat& positions, const std::vector<int>& ids, const Camera& cam);

struct BranchImage {
    Mat color;  // (H W) x 3
    Mat alpha;  // (H W) x 1
};

struct FrameRender {
    BranchImage face;
    BranchImage mouth;
    Mat image;
    Mat landmarks;  // 1 x 2K
};

FrameRender render_frame(const HeadGeometry& head, const cmdm::AuValues& au, const Camera& cam, BlendMode mode,
                         int threads = 1);

// Least-squares AU intensities explaining the image-plane motion of face
// primitives from `canonical` to `deformed`, clamped to [0, 5].
cmdm::AuValues estimate_aus(const Mat& canonical, const Mat& deformed, const Camera& cam);

struct SceneBundle {
    SynthConfig config;
    std::uint64_t seed = 0;
    Mat au_traj;  // T x 17
    cmdm::AudioTrack audio;
    HeadGeometry geometry;
    Mat landmarks;  // T x 2K
    Camera camera;
    std::vector<Mat> gt_frames;
    RidgeReport oracle;

    ImageSize size() const { return {config.width, config.height}; }
    cmdm::AuValues aus(int t) const { return au_traj.row(t).transpose(); }
};

SceneBundle gen_scene(std::uint64_t seed, const SynthConfig& cfg, int threads = 1);

void save_bundle(const SceneBundle& b, const std::filesystem::path& dir, bool write_png = true);
// Throws DataError for missing or inconsistent files.
SceneBundle load_bundle(const std::filesystem::path& dir);

}  // namespace hmt::synth
