#include "hmt/trainer.hpp"

#include "hmt/error.hpp"
#include "hmt/renderer.hpp"

#include <json.hpp>

#include <cmath>

namespace hmt {

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::static_init: return "static";
        case Stage::motion: return "motion";
        case Stage::finetune: return "finetune";
        case Stage::done: return "done";
    }
    return "?";
}

std::string log_line(const StepRecord& r) {
    nlohmann::ordered_json j;
    j["stage"] = to_string(r.stage);
    j["iter"] = r.iteration;
    j["frame"] = r.frame;
    j["path"] = r.path ? std::string(hmmm::to_string(*r.path)) : std::string();
    j["mask_rate"] = r.mask_rate;
    j["alpha_mean"] = r.alpha_mean;
    j["alpha_min"] = r.alpha_min;
    j["alpha_max"] = r.alpha_max;
    j["l1"] = r.face.l1;
    j["d_ssim"] = r.face.d_ssim;
    j["perceptual"] = r.face.perceptual;
    j["align"] = r.face.align;
    j["face_total"] = r.face.total.defined() ? r.face.total.item() : 0.0;
    j["mouth_total"] = r.mouth_total;
    j["total"] = r.total;
    return j.dump();
}

Trainer::Trainer(const synth::SceneBundle& bundle, const RunConfig& cfg)
    : bundle_(bundle), cfg_(cfg), rng_(cfg.seed * 2 + 1) {
    cfg_.validate();
    if (cfg_.blend != bundle.config.blend_mode) {
        throw ConfigError("blend mode '" + std::string(to_string(cfg_.blend)) + "' differs from the bundle's '" +
                          std::string(to_string(bundle.config.blend_mode)) + "'");
    }
    if (bundle.config.train_frames() < 1) throw ConfigError("bundle has no training frames");
    hash_ = hmt::config_hash(cfg_, bundle.config, bundle.seed);
    ModelConfig mc;
    mc.sh_degree = cfg_.sh_degree;
    mc.position_jitter = cfg_.position_jitter;
    mc.fusion = cfg_.fusion;
    model_ = std::make_unique<Model>(bundle.geometry, mc, cfg_.seed);
    neutral_ = synth::render_frame(bundle.geometry, cmdm::AuValues::Zero(), bundle.camera, cfg_.blend, cfg_.threads);
    enter(Stage::static_init);
    skip_empty_stages();
}

int Trainer::stage_iters(Stage s) const {
    switch (s) {
        case Stage::static_init: return cfg_.static_iters;
        case Stage::motion: return cfg_.motion_iters;
        case Stage::finetune: return cfg_.finetune_iters;
        case Stage::done: return 0;
    }
    return 0;
}

void Trainer::enter(Stage s) {
    stage_ = s;
    iteration_ = 0;
    optim::AdamConfig base;
    base.lr = cfg_.learning_rate;
    base.beta1 = cfg_.beta1;
    base.beta2 = cfg_.beta2;
    base.eps = cfg_.eps;
    optim::AdamConfig decayed = base;
    decayed.weight_decay = cfg_.weight_decay;
    adam_ = optim::Adam(base);
    adamw_ = optim::Adam(decayed);
    const bool fields = s == Stage::static_init || s == Stage::finetune;
    const bool motion = s == Stage::motion || s == Stage::finetune;
    if (fields) {
        for (auto& p : model_->field_params()) adam_.add(p.name, p.param);
    }
    if (motion) {
        for (auto& p : model_->hash_params()) adam_.add(p.name, p.param);
        for (auto& p : model_->network_params()) adamw_.add(p.name, p.param);
    }
}

void Trainer::skip_empty_stages() {
    while (stage_ != Stage::done && iteration_ >= stage_iters(stage_)) {
        enter(static_cast<Stage>(static_cast<int>(stage_) + 1));
    }
}

StepRecord Trainer::step() {
    if (done()) throw ContractError("step: training already finished");
    StepRecord rec;
    rec.stage = stage_;
    rec.iteration = iteration_;
    const ImageSize size = bundle_.size();
    RenderOptions ropts;
    ropts.threads = cfg_.threads;
    const Model& m = *model_;

    ad::Var loss;
    if (stage_ == Stage::static_init) {
        const RenderOutput rf = render(canonical_view(m.face.field), bundle_.camera, ropts);
        const RenderOutput rm = render(canonical_view(m.mouth.field), bundle_.camera, ropts);
        rec.face = total_loss(rf.color, neutral_.face.color, size, {}, {}, cfg_.loss);
        const LossTerms mouth = total_loss(rm.color, neutral_.mouth.color, size, {}, {}, cfg_.loss);
        rec.mouth_total = mouth.total.item();
        loss = rec.face.total + mouth.total;
    } else {
        const int n_train = bundle_.config.train_frames();
        rec.frame = std::min(static_cast<int>(rng_.uniform() * n_train), n_train - 1);
        const hmmm::FusionPath path = cfg_.forced_path ? *cfg_.forced_path : hmmm::sample_path(rng_, cfg_.path_ratio);
        rec.path = path;
        rec.mask_rate = rng_.uniform(cfg_.mask_min, cfg_.mask_max);
        const MotionOutput out = m.forward(frame_conditions(bundle_, rec.frame), path, rec.mask_rate, &rng_);
        if (out.fusion.alpha.defined()) {
            const Mat& a = out.fusion.alpha.value();
            rec.alpha_mean = a.mean();
            rec.alpha_min = a.minCoeff();
            rec.alpha_max = a.maxCoeff();
        }
        const ad::Var target_feature = detached(out.features.c_e_vl);
        const RenderOutput rf = render(out.face, bundle_.camera, ropts);
        const RenderOutput rm = render(out.mouth, bundle_.camera, ropts);
        if (stage_ == Stage::motion) {
            const synth::FrameRender gt =
                synth::render_frame(bundle_.geometry, bundle_.aus(rec.frame), bundle_.camera, cfg_.blend, cfg_.threads);
            rec.face = total_loss(rf.color, gt.face.color, size, out.features.c_e_al, target_feature, cfg_.loss);
            const LossTerms mouth = total_loss(rm.color, gt.mouth.color, size, {}, {}, cfg_.loss);
            rec.mouth_total = mouth.total.item();
            loss = rec.face.total + mouth.total;
        } else {
            const BlendOutput head = blend_head(rf.color, rf.alpha, rm.color, rm.alpha, cfg_.blend);
            rec.face = total_loss(head.image, bundle_.gt_frames[rec.frame], size, out.features.c_e_al, target_feature,
                                  cfg_.loss);
            loss = rec.face.total;
        }
    }
    rec.total = loss.item();
    if (!std::isfinite(rec.total)) {
        throw NumericalError("non-finite loss at " + std::string(to_string(stage_)) + " iteration " +
                             std::to_string(iteration_));
    }
    ad::backward(loss);
    adam_.step();
    adamw_.step();
    if (stage_ != Stage::motion) {
        model_->face.field.renormalize();
        model_->mouth.field.renormalize();
    }
    for (auto& p : model_->all_params()) p.param.zero_grad();

    ++iteration_;
    skip_empty_stages();
    return rec;
}

void Trainer::run(std::ostream* log, long max_steps) {
    long taken = 0;
    while (!done() && (max_steps < 0 || taken < max_steps)) {
        const StepRecord r = step();
        if (log) *log << log_line(r) << '\n';
        ++taken;
    }
    if (log) log->flush();
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint c;
    c.config_hash = hash_;
    c.stage = static_cast<int>(stage_);
    c.iteration = iteration_;
    c.rng_state = rng_.serialize();
    for (const auto& p : model_->all_params()) c.tensors.emplace_back("param." + p.name, p.param.value());
    for (const auto* opt : {&adam_, &adamw_}) {
        for (const auto& e : opt->entries()) {
            if (e.state.step_count == 0) continue;
            Mat steps(1, 1);
            steps(0, 0) = static_cast<double>(e.state.step_count);
            c.tensors.emplace_back("opt." + e.name + ".step", steps);
            c.tensors.emplace_back("opt." + e.name + ".m", e.state.first_moment);
            c.tensors.emplace_back("opt." + e.name + ".v", e.state.second_moment);
        }
    }
    return c;
}

void Trainer::restore(const Checkpoint& c) {
    if (c.config_hash != hash_) {
        throw DataError("checkpoint config hash does not match this bundle and model configuration");
    }
    if (c.stage < 0 || c.stage > static_cast<int>(Stage::done)) throw DataError("checkpoint has an invalid stage");
    const auto params = model_->all_params();
    for (const auto& p : params) {
        const Mat* v = c.find("param." + p.name);
        if (!v) throw DataError("checkpoint is missing parameter " + p.name);
        if (v->rows() != p.param.rows() || v->cols() != p.param.cols()) {
            throw DataError("checkpoint parameter " + p.name + " has shape " + shape_str(*v));
        }
        if (c.find("opt." + p.name + ".step")) {
            const Mat* m = c.find("opt." + p.name + ".m");
            const Mat* s = c.find("opt." + p.name + ".v");
            if (!m || !s || m->rows() != v->rows() || m->cols() != v->cols() || s->rows() != v->rows() ||
                s->cols() != v->cols()) {
                throw DataError("checkpoint optimizer state for " + p.name + " is incomplete");
            }
        }
    }
    const auto stage = static_cast<Stage>(c.stage);
    if (c.iteration < 0 || (stage != Stage::done && c.iteration > stage_iters(stage))) {
        throw DataError("checkpoint iteration is outside the configured stage length");
    }

    for (auto p : params) p.param.mutable_value() = *c.find("param." + p.name);
    enter(stage);
    iteration_ = static_cast<int>(c.iteration);
    rng_.deserialize(c.rng_state);
    for (auto* opt : {&adam_, &adamw_}) {
        for (auto& e : opt->entries()) {
            const Mat* steps = c.find("opt." + e.name + ".step");
            if (!steps) continue;
            e.state.step_count = static_cast<std::int64_t>((*steps)(0, 0));
            e.state.first_moment = *c.find("opt." + e.name + ".m");
            e.state.second_moment = *c.find("opt." + e.name + ".v");
        }
    }
    skip_empty_stages();
}

}  // namespace hmt
