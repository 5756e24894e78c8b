#include "hmt/config.hpp"

#include "hmt/error.hpp"
#include "hmt/toml_lite.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace hmt {

namespace {

std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

class Reader {
public:
    explicit Reader(toml::Table t) : t_(std::move(t)) {}

    const toml::Value* find(const std::string& key) {
        auto it = t_.find(key);
        if (it == t_.end()) return nullptr;
        seen_.insert(key);
        return &it->second;
    }
    void get(const std::string& key, std::string& out) {
        if (auto* v = find(key)) out = v->as_string(key);
    }
    void get(const std::string& key, double& out) {
        if (auto* v = find(key)) out = v->as_double(key);
    }
    void get(const std::string& key, int& out) {
        if (auto* v = find(key)) {
            const auto i = v->as_int(key);
            if (i < INT32_MIN || i > INT32_MAX) throw ConfigError("config key '" + key + "' is out of range");
            out = static_cast<int>(i);
        }
    }
    void get(const std::string& key, std::uint64_t& out) {
        if (auto* v = find(key)) {
            const auto i = v->as_int(key);
            if (i < 0) throw ConfigError("config key '" + key + "' must be non-negative");
            out = static_cast<std::uint64_t>(i);
        }
    }
    std::vector<double> numbers(const std::string& key, std::size_t n) {
        const toml::Value* v = find(key);
        if (!v) return {};
        const auto& arr = v->as_array(key);
        if (arr.size() != n) throw ConfigError("config key '" + key + "' must hold " + std::to_string(n) + " numbers");
        std::vector<double> out;
        for (const auto& x : arr) out.push_back(x.as_double(key));
        return out;
    }
    void reject_unknown() const {
        for (const auto& [k, v] : t_) {
            if (!seen_.count(k)) throw ConfigError("unknown config key '" + k + "'");
        }
    }

private:
    toml::Table t_;
    std::set<std::string> seen_;
};

void fnv(std::uint64_t& h, std::string_view s) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
}

}  // namespace

std::string_view to_string(DriveMode d) { return d == DriveMode::audio ? "audio" : "image"; }

DriveMode parse_drive_mode(std::string_view s) {
    if (s == "audio") return DriveMode::audio;
    if (s == "image") return DriveMode::image;
    throw ConfigError("unknown drive mode '" + std::string(s) + "'");
}

void RunConfig::validate() const {
    data.validate();
    if (sh_degree < 0 || sh_degree > 1) throw ConfigError("model.sh_degree must be 0 or 1");
    if (!(position_jitter >= 0.0)) throw ConfigError("model.position_jitter must be non-negative");
    if (static_iters < 0 || motion_iters < 0 || finetune_iters < 0) {
        throw ConfigError("train iteration counts must be non-negative");
    }
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw ConfigError("train.eps must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be non-negative");
    path_ratio.validate();
    if (!(mask_min >= 0.0 && mask_min <= mask_max && mask_max <= 1.0)) {
        throw ConfigError("train.mask_range must satisfy 0 <= min <= max <= 1");
    }
    if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be non-negative");
    loss.validate();
    if (frame_start < 0 || frame_count < -1) throw ConfigError("render frame range is invalid");
    if (threads < 1) throw ConfigError("run.threads must be at least 1");
}

void RunConfig::apply_paper_scale() {
    motion_iters = 50000;
    finetune_iters = 15000;
}

RunConfig parse_config(std::string_view text, const std::string& origin) {
    Reader r(toml::parse(text, origin));
    RunConfig c;
    r.get("paths.bundle", c.bundle_dir);
    r.get("paths.output", c.output_dir);

    r.get("data.frames", c.data.frames);
    r.get("data.width", c.data.width);
    r.get("data.height", c.data.height);
    r.get("data.face_primitives", c.data.face_primitives);
    r.get("data.mouth_primitives", c.data.mouth_primitives);
    r.get("data.audio_noise", c.data.audio_noise);
    r.get("data.holdout_frames", c.data.holdout_frames);

    r.get("model.sh_degree", c.sh_degree);
    r.get("model.position_jitter", c.position_jitter);
    std::string s;
    if (const auto* v = r.find("model.gate")) hmmm::parse_gate_mode(v->as_string("model.gate"), c.fusion);
    if (const auto* v = r.find("model.fusion")) {
        s = v->as_string("model.fusion");
        if (s == "gate") c.fusion.fusion = hmmm::FusionMode::gate;
        else if (s == "concat") c.fusion.fusion = hmmm::FusionMode::concat;
        else throw ConfigError("model.fusion must be 'gate' or 'concat'");
    }

    r.get("train.static_iters", c.static_iters);
    r.get("train.motion_iters", c.motion_iters);
    r.get("train.finetune_iters", c.finetune_iters);
    r.get("train.learning_rate", c.learning_rate);
    r.get("train.beta1", c.beta1);
    r.get("train.beta2", c.beta2);
    r.get("train.eps", c.eps);
    r.get("train.weight_decay", c.weight_decay);
    if (auto p = r.numbers("train.path_ratio", 3); !p.empty()) c.path_ratio = {p[0], p[1], p[2]};
    if (auto m = r.numbers("train.mask_range", 2); !m.empty()) {
        c.mask_min = m[0];
        c.mask_max = m[1];
    }
    if (const auto* v = r.find("train.forced_path")) {
        s = v->as_string("train.forced_path");
        if (s.empty()) c.forced_path.reset();
        else c.forced_path = hmmm::parse_path(s);
    }
    r.get("train.checkpoint_every", c.checkpoint_every);

    r.get("loss.lambda1", c.loss.lambda1);
    r.get("loss.lambda2", c.loss.lambda2);
    r.get("loss.lambda3", c.loss.lambda3);

    if (const auto* v = r.find("render.drive")) c.drive = parse_drive_mode(v->as_string("render.drive"));
    if (const auto* v = r.find("render.blend")) {
        c.blend = parse_blend_mode(v->as_string("render.blend"));
        c.data.blend_mode = c.blend;
    }
    r.get("render.frame_start", c.frame_start);
    r.get("render.frame_count", c.frame_count);

    r.get("run.seed", c.seed);
    r.get("run.threads", c.threads);
    r.reject_unknown();
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string format_config(const RunConfig& c) {
    std::ostringstream o;
    const char* fusion = c.fusion.fusion == hmmm::FusionMode::gate ? "gate" : "concat";
    o << "[paths]\n"
      << "bundle = " << toml::quote(c.bundle_dir) << "\n"
      << "output = " << toml::quote(c.output_dir) << "\n\n"
      << "[data]\n"
      << "frames = " << c.data.frames << "\n"
      << "width = " << c.data.width << "\n"
      << "height = " << c.data.height << "\n"
      << "face_primitives = " << c.data.face_primitives << "\n"
      << "mouth_primitives = " << c.data.mouth_primitives << "\n"
      << "audio_noise = " << num(c.data.audio_noise) << "\n"
      << "holdout_frames = " << c.data.holdout_frames << "\n\n"
      << "[model]\n"
      << "sh_degree = " << c.sh_degree << "\n"
      << "position_jitter = " << num(c.position_jitter) << "\n"
      << "# vector | scalar | fixed-alpha:x | pure-explicit | pure-implicit\n"
      << "gate = " << toml::quote(hmmm::gate_mode_string(c.fusion)) << "\n"
      << "# gate | concat\n"
      << "fusion = " << toml::quote(fusion) << "\n\n"
      << "[train]\n"
      << "static_iters = " << c.static_iters << "\n"
      << "motion_iters = " << c.motion_iters << "\n"
      << "finetune_iters = " << c.finetune_iters << "\n"
      << "learning_rate = " << num(c.learning_rate) << "\n"
      << "beta1 = " << num(c.beta1) << "\n"
      << "beta2 = " << num(c.beta2) << "\n"
      << "eps = " << num(c.eps) << "\n"
      << "weight_decay = " << num(c.weight_decay) << "\n"
      << "# audio, masked, vanilla\n"
      << "path_ratio = [" << num(c.path_ratio.audio) << ", " << num(c.path_ratio.masked) << ", "
      << num(c.path_ratio.vanilla) << "]\n"
      << "mask_range = [" << num(c.mask_min) << ", " << num(c.mask_max) << "]\n"
      << "# empty samples a path every step; audio | masked | vanilla pins it\n"
      << "forced_path = " << toml::quote(c.forced_path ? std::string(hmmm::to_string(*c.forced_path)) : "") << "\n"
      << "checkpoint_every = " << c.checkpoint_every << "\n\n"
      << "[loss]\n"
      << "lambda1 = " << num(c.loss.lambda1) << "\n"
      << "lambda2 = " << num(c.loss.lambda2) << "\n"
      << "lambda3 = " << num(c.loss.lambda3) << "\n\n"
      << "[render]\n"
      << "# audio | image\n"
      << "drive = " << toml::quote(to_string(c.drive)) << "\n"
      << "# as-written | face-complement\n"
      << "blend = " << toml::quote(to_string(c.blend)) << "\n"
      << "frame_start = " << c.frame_start << "\n"
      << "frame_count = " << c.frame_count << "\n\n"
      << "[run]\n"
      << "seed = " << c.seed << "\n"
      << "threads = " << c.threads << "\n";
    return o.str();
}

std::uint64_t config_hash(const RunConfig& cfg, const synth::SynthConfig& b, std::uint64_t bundle_seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    fnv(h, "bundle");
    fnv(h, std::to_string(bundle_seed));
    fnv(h, std::to_string(b.frames));
    fnv(h, std::to_string(b.width));
    fnv(h, std::to_string(b.height));
    fnv(h, std::to_string(b.face_primitives));
    fnv(h, std::to_string(b.mouth_primitives));
    fnv(h, to_string(b.blend_mode));
    fnv(h, "model");
    fnv(h, std::to_string(cfg.sh_degree));
    fnv(h, hmmm::gate_mode_string(cfg.fusion));
    fnv(h, cfg.fusion.fusion == hmmm::FusionMode::gate ? "gate" : "concat");
    return h;
}

}  // namespace hmt
