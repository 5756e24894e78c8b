#include "hmt/model.hpp"

#include "hmt/error.hpp"

namespace hmt {

namespace {

void collect_field(nn::ParamList& out, const std::string& prefix, const GaussianField& f) {
    out.push_back({prefix + ".mu", f.mu});
    out.push_back({prefix + ".log_scale", f.log_scale});
    out.push_back({prefix + ".rot", f.rot});
    out.push_back({prefix + ".alpha_logit", f.alpha_logit});
    out.push_back({prefix + ".sh", f.sh});
}

}  // namespace

FrameConditions frame_conditions(const synth::SceneBundle& b, int t) {
    if (t < 0 || t >= b.config.frames) throw ContractError("frame index out of range");
    const auto parts = cmdm::partition_aus(cmdm::AuVector(b.aus(t)));
    FrameConditions fc;
    fc.upper = parts.upper.transpose();
    fc.lower = parts.lower.transpose();
    fc.window = cmdm::audio_window(b.audio, t);
    return fc;
}

Model::Model(const synth::HeadGeometry& head, const ModelConfig& cfg, std::uint64_t seed) : config(cfg) {
    InitOptions init;
    init.position_jitter = cfg.position_jitter;
    init.sh_degree = cfg.sh_degree;
    face.field = init_static(head.face, seed * 4 + 1, init);
    mouth.field = init_static(head.mouth, seed * 4 + 2, init);
    Rng rng(seed * 4 + 3);
    face.hash.init_uniform(rng);
    mouth.hash.init_uniform(rng);
    const int enc = face.hash.config().output_dim();
    face.net = hmmm::GateNet(cfg.fusion, rng, enc);
    mouth.deform = nn::Mlp({enc + cmdm::kFeatureDim, 64, 64, 10}, nn::Activation::relu, nn::Activation::identity,
                           rng, true);
    cmdm = cmdm::Cmdm(rng);
}

nn::ParamList Model::field_params() const {
    nn::ParamList out;
    collect_field(out, "face.field", face.field);
    collect_field(out, "mouth.field", mouth.field);
    return out;
}

nn::ParamList Model::hash_params() const {
    return {{"face.hash.tables", face.hash.tables()}, {"mouth.hash.tables", mouth.hash.tables()}};
}

nn::ParamList Model::network_params() const {
    nn::ParamList out;
    face.net.collect(out, "face.net");
    nn::collect(out, "mouth.deform", mouth.deform);
    cmdm.collect(out, "cmdm");
    return out;
}

nn::ParamList Model::all_params() const {
    nn::ParamList out = field_params();
    for (auto& p : hash_params()) out.push_back(p);
    for (auto& p : network_params()) out.push_back(p);
    return out;
}

hmmm::MotionFeatures Model::features(const FrameConditions& fc, hmmm::FusionPath path, double mask_rate,
                                     Rng* rng) const {
    hmmm::MotionFeatures f;
    f.c_e_vu = cmdm::encode_upper(ad::constant(fc.upper));
    f.c_e_vl = cmdm.lower(ad::constant(fc.lower));
    f.c_i_al = cmdm.implicit_feature(fc.window).c_i_al;
    f.c_e_al = cmdm.a2am(f.c_i_al);
    if (path == hmmm::FusionPath::masked) {
        if (!rng) throw ContractError("features: the masked path needs an RNG");
        f.c_i_al_mask = hmmm::mask_features(f.c_i_al, mask_rate, *rng);
    }
    return f;
}

MotionOutput Model::forward(const FrameConditions& fc, hmmm::FusionPath path, double mask_rate, Rng* rng) const {
    MotionOutput out;
    out.features.c_e_vu = cmdm::encode_upper(ad::constant(fc.upper));
    out.features.c_e_vl = cmdm.lower(ad::constant(fc.lower));
    const auto implicit = cmdm.implicit_feature(fc.window);
    out.features.c_i_al = implicit.c_i_al;
    out.attention = implicit.weights;
    out.features.c_e_al = cmdm.a2am(out.features.c_i_al);
    if (path == hmmm::FusionPath::masked) {
        if (!rng) throw ContractError("forward: the masked path needs an RNG");
        out.features.c_i_al_mask = hmmm::mask_features(out.features.c_i_al, mask_rate, *rng);
    }
    const auto pair = hmmm::select_pair(path, out.features);
    out.fusion = face.net.fuse(pair.implicit_feature, pair.explicit_feature);

    const ad::Var h_face = face.hash.encode(face.field.mu);
    const auto rc = face.net.region_attention(h_face, out.fusion.c_f, out.features.c_e_vu);
    out.face_delta = Deformation::from_packed(face.net.predict_deformation(h_face, rc));
    out.face = apply_deformation(face.field, out.face_delta);

    const ad::Var h_mouth = mouth.hash.encode(mouth.field.mu);
    const ad::Var cond = ad::broadcast_rows(out.fusion.c_f, mouth.field.size());
    out.mouth_delta = Deformation::from_packed(mouth.deform(ad::concat_cols({h_mouth, cond})));
    out.mouth = apply_deformation(mouth.field, out.mouth_delta);
    return out;
}

}  // namespace hmt
