#pragma once

// Cross-modal disentanglement: explicit AU features from image-derived AUs,
// implicit features from windowed audio embeddings, and the audio-to-AU
// projection trained against the explicit ones.

#include "hmt/autodiff.hpp"
#include "hmt/nn.hpp"

#include <array>

namespace hmt::cmdm {

inline constexpr int kAuCount = 17;
inline constexpr int kUpperCount = 7;
inline constexpr int kLowerCount = 10;
inline constexpr int kFeatureDim = 32;
inline constexpr int kAudioDim = 512;
inline constexpr int kWindow = 8;
// Window covers frames [t - 3, t + 4].
inline constexpr int kWindowBefore = 3;

inline constexpr std::array<int, kAuCount> kAuIds{1, 2, 4, 5, 6, 7, 9, 10, 12,
                                                  14, 15, 17, 20, 23, 25, 26, 45};
inline constexpr std::array<int, kUpperCount> kUpperIds{1, 2, 4, 5, 6, 7, 45};
inline constexpr std::array<int, kLowerCount> kLowerIds{9, 10, 12, 14, 15, 17, 20, 23, 25, 26};

inline constexpr double kAuMax = 5.0;

// Slot of an AU id inside a 17-vector; throws for unknown ids.
int au_slot(int id);

using AuValues = Eigen::Matrix<double, kAuCount, 1>;
using UpperAus = Eigen::Matrix<double, kUpperCount, 1>;
using LowerAus = Eigen::Matrix<double, kLowerCount, 1>;

// 17 AU intensities ordered by ascending id, each in [0, 5].
class AuVector {
public:
    AuVector() : values_(AuValues::Zero()) {}
    explicit AuVector(const AuValues& v);

    const AuValues& values() const { return values_; }
    double at_id(int id) const { return values_(au_slot(id)); }
    void set_id(int id, double v);

private:
    AuValues values_;
};

struct AuPartition {
    UpperAus upper;
    LowerAus lower;
};

// Selection by AU id, never by position.
AuPartition partition_aus(const AuVector& au);
AuVector merge_aus(const UpperAus& upper, const LowerAus& lower);

// T x 512 per-frame embeddings at 25 fps.
struct AudioTrack {
    Mat features;
    double frame_rate = 25.0;

    int frames() const { return static_cast<int>(features.rows()); }
};

// 8 x 512 rows for frames t-3 .. t+4 with edge replication.
Mat audio_window(const AudioTrack& track, int t);

// Passthrough: the 7 upper AUs are the upper explicit feature.
inline ad::Var encode_upper(const ad::Var& upper) { return upper; }

// MLP(lower) ++ lower, 10 -> 22 + 10.
struct LowerEncoder {
    nn::Mlp mlp;

    LowerEncoder() = default;
    explicit LowerEncoder(Rng& rng);
    ad::Var operator()(const ad::Var& lower) const;
};

// Per-frame 512 -> 128 -> 64 with shared weights across the window.
struct AudioNet {
    nn::Mlp mlp;

    AudioNet() = default;
    explicit AudioNet(Rng& rng);
    ad::Var operator()(const ad::Var& window) const;
};

// Temporal conv (kernel 3, edge-replicated padding, 64 -> 32) followed by softmax
// attention over the window. Each frame's score is a learned linear read-out
// of its conv feature plus a learned per-position offset.
struct AudioAttNet {
    ad::Var conv_prev;    // 64 x 32, applied to frame t-1
    ad::Var conv_center;  // 64 x 32
    ad::Var conv_next;    // 64 x 32, applied to frame t+1
    ad::Var conv_bias;    // 1 x 32
    nn::Linear score;     // 32 -> 1
    ad::Var position_bias;  // 8 x 1

    struct Output {
        ad::Var feature;  // 1 x 32
        ad::Var weights;  // 8 x 1
    };

    AudioAttNet() = default;
    explicit AudioAttNet(Rng& rng);
    ad::Var conv(const ad::Var& embeddings) const;
    Output operator()(const ad::Var& embeddings) const;
};

// Audio-to-AU mapper: 32 -> 64 (ReLU) -> 32 (identity).
struct A2AM {
    nn::Mlp mlp;

    A2AM() = default;
    explicit A2AM(Rng& rng);
    ad::Var operator()(const ad::Var& implicit) const { return mlp(implicit); }
};

// Mean absolute difference.
ad::Var align_loss(const ad::Var& c_e_al, const ad::Var& c_e_vl);

struct Cmdm {
    LowerEncoder lower;
    AudioNet audio;
    AudioAttNet attention;
    A2AM a2am;

    Cmdm() = default;
    explicit Cmdm(Rng& rng);
    void collect(nn::ParamList& out, const std::string& prefix) const;

    struct ImplicitOut {
        ad::Var c_i_al;
        ad::Var weights;
    };
    ImplicitOut implicit_feature(const Mat& window) const;
};

}  // namespace hmt::cmdm
