#pragma once

#include "hmt/hmmm.hpp"
#include "hmt/losses.hpp"
#include "hmt/renderer.hpp"
#include "hmt/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace hmt {

enum class DriveMode { audio, image };

std::string_view to_string(DriveMode d);
DriveMode parse_drive_mode(std::string_view s);

struct RunConfig {
    std::string bundle_dir = "bundle";
    std::string output_dir = "run";

    synth::SynthConfig data;

    int sh_degree = 0;
    double position_jitter = 0.01;
    hmmm::FusionConfig fusion;

    int static_iters = 300;
    int motion_iters = 5000;
    int finetune_iters = 1500;
    double learning_rate = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
    hmmm::PathRatio path_ratio;
    double mask_min = 0.1;
    double mask_max = 0.3;
    std::optional<hmmm::FusionPath> forced_path;
    int checkpoint_every = 0;  // 0: only at the end

    LossWeights loss;

    DriveMode drive = DriveMode::audio;
    BlendMode blend = BlendMode::as_written;
    int frame_start = 0;
    int frame_count = -1;  // -1: through the last frame

    std::uint64_t seed = 0;
    int threads = 1;

    // Throws ConfigError naming the first offending key.
    void validate() const;
    void apply_paper_scale();
};

RunConfig load_config(const std::filesystem::path& path);
// Unknown keys are rejected.
RunConfig parse_config(std::string_view text, const std::string& origin = "<config>");
std::string format_config(const RunConfig& cfg);

// FNV-1a over the bundle identity and architecture settings that must match
// between a checkpoint and the data it is used with.
std::uint64_t config_hash(const RunConfig& cfg, const synth::SynthConfig& bundle, std::uint64_t bundle_seed);

}  // namespace hmt
