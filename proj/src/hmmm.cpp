#include "hmt/hmmm.hpp"

#include "hmt/cmdm.hpp"
#include "hmt/error.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

namespace hmt::hmmm {

std::string_view to_string(FusionPath p) {
    switch (p) {
        case FusionPath::audio: return "audio";
        case FusionPath::masked: return "masked";
        case FusionPath::vanilla: return "vanilla";
    }
    return "?";
}

FusionPath parse_path(std::string_view s) {
    if (s == "audio") return FusionPath::audio;
    if (s == "masked") return FusionPath::masked;
    if (s == "vanilla") return FusionPath::vanilla;
    throw ConfigError("unknown fusion path '" + std::string(s) + "'");
}

void PathRatio::validate() const {
    if (audio < 0 || masked < 0 || vanilla < 0 ||
        std::abs(audio + masked + vanilla - 1.0) > 1e-9) {
        throw ConfigError("path ratio must be non-negative and sum to 1");
    }
}

FusionPath sample_path(Rng& rng, const PathRatio& ratio) {
    const double u = rng.uniform();
    if (u < ratio.audio) return FusionPath::audio;
    if (u < ratio.audio + ratio.masked) return FusionPath::masked;
    return FusionPath::vanilla;
}

ad::Var mask_features(const ad::Var& c, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate <= 1.0)) {
        throw ContractError("mask_features: rate " + std::to_string(rate) + " outside [0, 1]");
    }
    Mat keep(c.rows(), c.cols());
    for (Eigen::Index i = 0; i < keep.size(); ++i) keep.data()[i] = rng.uniform() < rate ? 0.0 : 1.0;
    return ad::mul(c, ad::constant(std::move(keep)));
}

FeaturePair select_pair(FusionPath path, const MotionFeatures& f) {
    auto need = [](const ad::Var& v, const char* name) -> const ad::Var& {
        if (!v.defined()) throw ContractError(std::string("select_pair: missing feature ") + name);
        return v;
    };
    switch (path) {
        case FusionPath::audio:
            return {need(f.c_i_al, "c_i_al"), need(f.c_e_al, "c_e_al")};
        case FusionPath::masked:
            return {need(f.c_i_al_mask, "c_i_al_mask"), need(f.c_e_vl, "c_e_vl")};
        case FusionPath::vanilla:
            return {need(f.c_i_al, "c_i_al"), need(f.c_e_vl, "c_e_vl")};
    }
    throw ContractError("select_pair: bad path");
}

ad::Var gated_fuse(const ad::Var& c_i, const ad::Var& c_e, const ad::Var& alpha) {
    ad::Var a = alpha;
    if (a.cols() == 1 && c_e.cols() != 1) a = ad::concat_cols(std::vector<ad::Var>(c_e.cols(), a));
    ad::Var one_minus = ad::add_scalar(ad::neg(a), 1.0);
    return ad::add(ad::mul(a, c_e), ad::mul(one_minus, c_i));
}

std::string gate_mode_string(const FusionConfig& cfg) {
    switch (cfg.gate) {
        case GateMode::vector: return "vector";
        case GateMode::scalar: return "scalar";
        case GateMode::pure_explicit: return "pure-explicit";
        case GateMode::pure_implicit: return "pure-implicit";
        case GateMode::fixed: {
            std::ostringstream os;
            os << "fixed-alpha:" << cfg.fixed_alpha;
            return os.str();
        }
    }
    return "?";
}

void parse_gate_mode(std::string_view s, FusionConfig& cfg) {
    if (s == "vector") cfg.gate = GateMode::vector;
    else if (s == "scalar") cfg.gate = GateMode::scalar;
    else if (s == "pure-explicit") cfg.gate = GateMode::pure_explicit;
    else if (s == "pure-implicit") cfg.gate = GateMode::pure_implicit;
    else if (s.starts_with("fixed-alpha:")) {
        const std::string num(s.substr(12));
        char* end = nullptr;
        const double v = std::strtod(num.c_str(), &end);
        if (num.empty() || *end != '\0' || !(v >= 0.0 && v <= 1.0)) {
            throw ConfigError("fixed-alpha value must be a number in [0, 1]");
        }
        cfg.gate = GateMode::fixed;
        cfg.fixed_alpha = v;
    } else {
        throw ConfigError("unknown gate mode '" + std::string(s) + "'");
    }
}

GateNet::GateNet(const FusionConfig& cfg, Rng& rng, int encoding_dim) : config(cfg) {
    constexpr int D = cmdm::kFeatureDim;
    const int gate_out = cfg.gate == GateMode::scalar ? 1 : D;
    gate = nn::Mlp({2 * D, 64, gate_out}, nn::Activation::relu, nn::Activation::sigmoid, rng);
    concat = nn::Mlp({2 * D, 64, D}, nn::Activation::relu, nn::Activation::identity, rng);
    att_f = nn::Mlp({encoding_dim, 64, D}, nn::Activation::relu, nn::Activation::sigmoid, rng);
    att_u = nn::Mlp({encoding_dim, 32, cmdm::kUpperCount}, nn::Activation::relu,
                    nn::Activation::sigmoid, rng);
    deform = nn::Mlp({encoding_dim + cmdm::kUpperCount + D, 128, 128, 10}, nn::Activation::relu,
                     nn::Activation::identity, rng, /*zero_last=*/true);
}

FusionResult GateNet::fuse(const ad::Var& c_i, const ad::Var& c_e) const {
    if (c_i.cols() != cmdm::kFeatureDim || c_e.cols() != cmdm::kFeatureDim) {
        throw ContractError("fuse: features must be 1 x 32");
    }
    if (config.fusion == FusionMode::concat) {
        return {concat(ad::concat_cols({c_i, c_e})), {}};
    }
    ad::Var alpha;
    switch (config.gate) {
        case GateMode::vector:
        case GateMode::scalar: alpha = gate(ad::concat_cols({c_i, c_e})); break;
        case GateMode::fixed: alpha = ad::constant(Mat::Constant(1, 1, config.fixed_alpha)); break;
        case GateMode::pure_explicit: alpha = ad::constant(Mat::Ones(1, 1)); break;
        case GateMode::pure_implicit: alpha = ad::constant(Mat::Zero(1, 1)); break;
    }
    return {gated_fuse(c_i, c_e, alpha), alpha};
}

RegionControls GateNet::region_attention(const ad::Var& h, const ad::Var& c_f,
                                         const ad::Var& c_e_vu) const {
    return {ad::mul_row(att_f(h), c_f), ad::mul_row(att_u(h), c_e_vu)};
}

ad::Var GateNet::predict_deformation(const ad::Var& h, const RegionControls& rc) const {
    return deform(ad::concat_cols({h, rc.c_u_region, rc.c_f_region}));
}

void GateNet::collect(nn::ParamList& out, const std::string& prefix) const {
    if (config.fusion == FusionMode::concat) {
        nn::collect(out, prefix + ".concat", concat);
    } else if (config.gate == GateMode::vector || config.gate == GateMode::scalar) {
        nn::collect(out, prefix + ".gate", gate);
    }
    nn::collect(out, prefix + ".att_f", att_f);
    nn::collect(out, prefix + ".att_u", att_u);
    nn::collect(out, prefix + ".deform", deform);
}

}  // namespace hmt::hmmm
