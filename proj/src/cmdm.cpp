#include "hmt/cmdm.hpp"

#include "hmt/error.hpp"

#include <algorithm>
#include <cmath>

namespace hmt::cmdm {

int au_slot(int id) {
    const auto it = std::find(kAuIds.begin(), kAuIds.end(), id);
    if (it == kAuIds.end()) throw ContractError("unknown AU id " + std::to_string(id));
    return static_cast<int>(it - kAuIds.begin());
}

AuVector::AuVector(const AuValues& v) : values_(v) {
    for (int i = 0; i < kAuCount; ++i) {
        if (!(v(i) >= 0.0 && v(i) <= kAuMax)) {
            throw ContractError("AuVector: AU" + std::to_string(kAuIds[i]) + " = " +
                                std::to_string(v(i)) + " outside [0, 5]");
        }
    }
}

void AuVector::set_id(int id, double v) {
    if (!(v >= 0.0 && v <= kAuMax)) throw ContractError("AuVector: value outside [0, 5]");
    values_(au_slot(id)) = v;
}

AuPartition partition_aus(const AuVector& au) {
    AuPartition p;
    for (int i = 0; i < kUpperCount; ++i) p.upper(i) = au.at_id(kUpperIds[i]);
    for (int i = 0; i < kLowerCount; ++i) p.lower(i) = au.at_id(kLowerIds[i]);
    return p;
}

AuVector merge_aus(const UpperAus& upper, const LowerAus& lower) {
    AuVector out;
    for (int i = 0; i < kUpperCount; ++i) out.set_id(kUpperIds[i], upper(i));
    for (int i = 0; i < kLowerCount; ++i) out.set_id(kLowerIds[i], lower(i));
    return out;
}

Mat audio_window(const AudioTrack& track, int t) {
    const int T = track.frames();
    if (t < 0 || t >= T) {
        throw ContractError("audio_window: frame " + std::to_string(t) + " outside [0, " +
                            std::to_string(T) + ")");
    }
    if (track.features.cols() != kAudioDim) throw ContractError("audio_window: width must be 512");
    Mat w(kWindow, kAudioDim);
    for (int k = 0; k < kWindow; ++k) {
        const int src = std::clamp(t - kWindowBefore + k, 0, T - 1);
        w.row(k) = track.features.row(src);
    }
    return w;
}

LowerEncoder::LowerEncoder(Rng& rng)
    : mlp({kLowerCount, 64, kFeatureDim - kLowerCount}, nn::Activation::leaky_relu,
          nn::Activation::identity, rng) {}

ad::Var LowerEncoder::operator()(const ad::Var& lower) const {
    if (lower.cols() != kLowerCount) throw ContractError("encode_lower: expected 10 columns");
    return ad::concat_cols({mlp(lower), lower});
}

AudioNet::AudioNet(Rng& rng)
    : mlp({kAudioDim, 128, 64}, nn::Activation::leaky_relu, nn::Activation::identity, rng) {}

ad::Var AudioNet::operator()(const ad::Var& window) const {
    if (window.cols() != kAudioDim) throw ContractError("audio_net: expected 512 columns");
    return mlp(window);
}

AudioAttNet::AudioAttNet(Rng& rng) {
    const double bound = 1.0 / std::sqrt(64.0 * 3.0);
    auto uniform = [&](Eigen::Index r, Eigen::Index c) {
        Mat m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
        return ad::parameter(std::move(m));
    };
    conv_prev = uniform(64, kFeatureDim);
    conv_center = uniform(64, kFeatureDim);
    conv_next = uniform(64, kFeatureDim);
    conv_bias = uniform(1, kFeatureDim);
    score = nn::Linear(kFeatureDim, 1, rng);
    position_bias = ad::parameter(Mat::Zero(kWindow, 1));
}

namespace {

// Row k of the result is row clamp(k - offset) of the input.
ad::Var replicate_shift(const ad::Var& e, int offset) {
    Mat p = Mat::Zero(e.rows(), e.rows());
    for (Eigen::Index k = 0; k < e.rows(); ++k) {
        p(k, std::clamp<Eigen::Index>(k - offset, 0, e.rows() - 1)) = 1.0;
    }
    return ad::matmul(ad::constant(std::move(p)), e);
}

}  // namespace

ad::Var AudioAttNet::conv(const ad::Var& e) const {
    ad::Var y = ad::matmul(e, conv_center);
    y = ad::add(y, ad::matmul(replicate_shift(e, 1), conv_prev));
    y = ad::add(y, ad::matmul(replicate_shift(e, -1), conv_next));
    return ad::add_row(y, conv_bias);
}

AudioAttNet::Output AudioAttNet::operator()(const ad::Var& embeddings) const {
    if (embeddings.rows() != kWindow || embeddings.cols() != 64) {
        throw ContractError("audio_att_net: expected 8 x 64 embeddings");
    }
    ad::Var c = conv(embeddings);
    ad::Var w = ad::softmax(ad::add(score(c), position_bias));
    return {ad::matmul(ad::transpose(w), c), w};
}

A2AM::A2AM(Rng& rng)
    : mlp({kFeatureDim, 64, kFeatureDim}, nn::Activation::relu, nn::Activation::identity, rng) {}

ad::Var align_loss(const ad::Var& c_e_al, const ad::Var& c_e_vl) {
    return ad::mean(ad::abs(ad::sub(c_e_al, c_e_vl)));
}

Cmdm::Cmdm(Rng& rng) : lower(rng), audio(rng), attention(rng), a2am(rng) {}

void Cmdm::collect(nn::ParamList& out, const std::string& prefix) const {
    nn::collect(out, prefix + ".lower", lower.mlp);
    nn::collect(out, prefix + ".audio", audio.mlp);
    out.push_back({prefix + ".att.conv_prev", attention.conv_prev});
    out.push_back({prefix + ".att.conv_center", attention.conv_center});
    out.push_back({prefix + ".att.conv_next", attention.conv_next});
    out.push_back({prefix + ".att.conv_bias", attention.conv_bias});
    nn::collect(out, prefix + ".att.score", attention.score);
    out.push_back({prefix + ".att.position_bias", attention.position_bias});
    nn::collect(out, prefix + ".a2am", a2am.mlp);
}

Cmdm::ImplicitOut Cmdm::implicit_feature(const Mat& window) const {
    auto att = attention(audio(ad::constant(window)));
    return {att.feature, att.weights};
}

}  // namespace hmt::cmdm
