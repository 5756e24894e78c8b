#pragma once

// Hybrid motion modeling: stochastic choice of the implicit/explicit feature
// pair, gated fusion, region attention and the deformation network.

#include "hmt/autodiff.hpp"
#include "hmt/gaussian_field.hpp"
#include "hmt/nn.hpp"
#include "hmt/rng.hpp"

#include <string_view>

namespace hmt::hmmm {

enum class FusionPath { audio, masked, vanilla };

std::string_view to_string(FusionPath p);
FusionPath parse_path(std::string_view s);

struct PathRatio {
    double audio = 0.4;
    double masked = 0.4;
    double vanilla = 0.2;

    // Throws ConfigError unless all are non-negative and sum to 1.
    void validate() const;
};

// Categorical draw over (audio, masked, vanilla); consumes one uniform.
FusionPath sample_path(Rng& rng, const PathRatio& ratio = {});

// Zeroes each entry independently with probability `rate`, no rescaling.
ad::Var mask_features(const ad::Var& c, double rate, Rng& rng);

struct MotionFeatures {
    ad::Var c_e_vu;       // 1 x 7
    ad::Var c_e_vl;       // 1 x 32
    ad::Var c_i_al;       // 1 x 32
    ad::Var c_i_al_mask;  // 1 x 32
    ad::Var c_e_al;       // 1 x 32
};

struct FeaturePair {
    ad::Var implicit_feature;
    ad::Var explicit_feature;
};

FeaturePair select_pair(FusionPath path, const MotionFeatures& f);

// alpha * c_e + (1 - alpha) * c_i, with alpha broadcast when it is 1 x 1.
ad::Var gated_fuse(const ad::Var& c_i, const ad::Var& c_e, const ad::Var& alpha);

enum class GateMode { vector, scalar, fixed, pure_explicit, pure_implicit };
enum class FusionMode { gate, concat };

struct FusionConfig {
    GateMode gate = GateMode::vector;
    double fixed_alpha = 0.5;
    FusionMode fusion = FusionMode::gate;
};

std::string gate_mode_string(const FusionConfig& cfg);
// Accepts vector | scalar | fixed-alpha:x | pure-explicit | pure-implicit.
void parse_gate_mode(std::string_view s, FusionConfig& cfg);

struct FusionResult {
    ad::Var c_f;    // 1 x 32
    ad::Var alpha;  // undefined under concat fusion
};

struct RegionControls {
    ad::Var c_f_region;  // N x 32
    ad::Var c_u_region;  // N x 7
};

// Gate, attention and deformation networks of the face branch.
struct GateNet {
    FusionConfig config;
    nn::Mlp gate;     // 64 -> 64 -> 32 (or 1), sigmoid
    nn::Mlp concat;   // 64 -> 64 -> 32, only for concat fusion
    nn::Mlp att_f;    // 48 -> 64 -> 32, sigmoid
    nn::Mlp att_u;    // 48 -> 32 -> 7, sigmoid
    nn::Mlp deform;   // 87 -> 128 -> 128 -> 10, zero-initialized last layer

    GateNet() = default;
    GateNet(const FusionConfig& cfg, Rng& rng, int encoding_dim = 48);

    FusionResult fuse(const ad::Var& c_i, const ad::Var& c_e) const;
    RegionControls region_attention(const ad::Var& h, const ad::Var& c_f,
                                    const ad::Var& c_e_vu) const;
    // N x 10 packed as d_mu | d_s | d_q.
    ad::Var predict_deformation(const ad::Var& h, const RegionControls& rc) const;

    void collect(nn::ParamList& out, const std::string& prefix) const;
};

}  // namespace hmt::hmmm
