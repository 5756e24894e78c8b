#pragma once

// Three-stage training: static fitting of the canonical fields to the neutral
// branch images, motion learning with per-step path sampling and independent
// face/mouth losses, then joint fine-tuning on the blended head.

#include "hmt/checkpoint.hpp"
#include "hmt/config.hpp"
#include "hmt/losses.hpp"
#include "hmt/model.hpp"
#include "hmt/optim.hpp"
#include "hmt/synth.hpp"

#include <memory>
#include <optional>
#include <ostream>
#include <string>

namespace hmt {

enum class Stage { static_init = 0, motion = 1, finetune = 2, done = 3 };

std::string_view to_string(Stage s);

struct StepRecord {
    Stage stage = Stage::static_init;
    int iteration = 0;
    int frame = 0;
    std::optional<hmmm::FusionPath> path;
    double mask_rate = 0;
    double alpha_mean = 0;
    double alpha_min = 0;
    double alpha_max = 0;
    LossTerms face;     // head terms during fine-tuning
    double mouth_total = 0;
    double total = 0;
};

// One JSON object, no trailing newline.
std::string log_line(const StepRecord& r);

class Trainer {
public:
    // Validates the config against the bundle before building anything.
    Trainer(const synth::SceneBundle& bundle, const RunConfig& cfg);

    Stage stage() const { return stage_; }
    int iteration() const { return iteration_; }
    bool done() const { return stage_ == Stage::done; }

    // Throws NumericalError when the loss is not finite.
    StepRecord step();
    // Runs until done or `max_steps` steps have been taken (-1: no limit).
    // Each record is written to `log` as one line.
    void run(std::ostream* log, long max_steps = -1);

    Checkpoint checkpoint() const;
    // Throws DataError when the checkpoint belongs to another config or is
    // missing tensors; the trainer is unchanged on failure.
    void restore(const Checkpoint& c);

    Model& model() { return *model_; }
    const Model& model() const { return *model_; }
    std::uint64_t config_hash() const { return hash_; }
    const RunConfig& config() const { return cfg_; }

private:
    void enter(Stage s);
    void skip_empty_stages();
    int stage_iters(Stage s) const;
    ad::Var detached(const ad::Var& v) const { return ad::constant(v.value()); }

    const synth::SceneBundle& bundle_;
    RunConfig cfg_;
    std::uint64_t hash_ = 0;
    std::unique_ptr<Model> model_;
    Rng rng_;
    Stage stage_ = Stage::static_init;
    int iteration_ = 0;
    optim::Adam adam_;
    optim::Adam adamw_;
    synth::FrameRender neutral_;
};

}  // namespace hmt
