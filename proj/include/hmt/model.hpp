#pragma once

// The full talking-head model: a face branch (Gaussian field, tri-plane hash,
// gate/attention/deformation networks), a mouth branch (its own field and
// hash plus a small deformation MLP conditioned on the fused feature), and
// the cross-modal feature module shared by both.

#include "hmt/cmdm.hpp"
#include "hmt/gaussian_field.hpp"
#include "hmt/hmmm.hpp"
#include "hmt/nn.hpp"
#include "hmt/synth.hpp"
#include "hmt/triplane.hpp"

#include <cstdint>

namespace hmt {

struct ModelConfig {
    int sh_degree = 0;
    double position_jitter = 0.01;
    hmmm::FusionConfig fusion;
};

struct FaceBranch {
    GaussianField field;
    TriPlaneHash hash;
    hmmm::GateNet net;
};

struct MouthBranch {
    GaussianField field;
    TriPlaneHash hash;
    nn::Mlp deform;  // (48 + 32) -> 64 -> 64 -> 10, zero-initialized last layer
};

// Per-frame driving signals.
struct FrameConditions {
    Mat upper;   // 1 x 7
    Mat lower;   // 1 x 10
    Mat window;  // 8 x 512
};

FrameConditions frame_conditions(const synth::SceneBundle& b, int t);

struct MotionOutput {
    hmmm::MotionFeatures features;
    hmmm::FusionResult fusion;
    ad::Var attention;  // 8 x 1 audio attention weights
    Deformation face_delta;
    Deformation mouth_delta;
    FieldView face;
    FieldView mouth;
};

class Model {
public:
    ModelConfig config;
    FaceBranch face;
    MouthBranch mouth;
    cmdm::Cmdm cmdm;

    Model(const synth::HeadGeometry& head, const ModelConfig& cfg, std::uint64_t seed);

    // Canonical fields (plain Adam).
    nn::ParamList field_params() const;
    // Hash tables (plain Adam).
    nn::ParamList hash_params() const;
    // Every network weight and bias (AdamW).
    nn::ParamList network_params() const;
    nn::ParamList all_params() const;

    // Features for one frame. The masked implicit feature is only drawn when
    // `path` is masked; that is the only use of `rng`.
    hmmm::MotionFeatures features(const FrameConditions& fc, hmmm::FusionPath path, double mask_rate,
                                  Rng* rng) const;
    MotionOutput forward(const FrameConditions& fc, hmmm::FusionPath path, double mask_rate, Rng* rng) const;
};

}  // namespace hmt
