#include "hmt/synth.hpp"

#include "hmt/error.hpp"
#include "hmt/feature_io.hpp"
#include "hmt/image_io.hpp"
#include "hmt/rng.hpp"
#include "hmt/splat_math.hpp"
#include "hmt/toml_lite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace hmt::synth {

namespace {

constexpr double kPi = std::numbers::pi;

// Semi-axes of the head ellipsoid; the face looks towards -z.
constexpr double kAx = 0.62, kAy = 0.8, kAz = 0.6;
constexpr double kMouthX = 0.0, kMouthY = 0.385;
constexpr double kHoleRx = 0.14, kHoleRy = 0.035;
constexpr double kLipRx = 0.21, kLipRy = 0.1;
constexpr double kFaceSigma = 0.026;
constexpr double kFaceOpacityLogit = 2.0;
constexpr double kMouthSigma = 0.016;
constexpr double kMouthOpacityLogit = -2.0;

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct RigUnit {
    int id;
    double cx, cy;
    bool mirrored;
    double dx, dy;
    double radius;
    double amplitude;
};

// Ordered by AU id, matching the 17 slots.
constexpr RigUnit kRig[cmdm::kAuCount] = {
    {1, 0.10, -0.30, true, 0.0, -1.0, 0.08, 0.012},
    {2, 0.30, -0.30, true, 0.0, -1.0, 0.08, 0.012},
    {4, 0.18, -0.26, true, -0.7071, 0.7071, 0.10, 0.010},
    {5, 0.20, -0.18, true, 0.0, -1.0, 0.06, 0.008},
    {6, 0.30, -0.04, true, 0.0, -1.0, 0.10, 0.010},
    {7, 0.20, -0.08, true, -0.4472, -0.8944, 0.05, 0.008},
    {9, 0.08, 0.10, true, 0.0, -1.0, 0.07, 0.008},
    {10, 0.00, 0.30, false, 0.0, -1.0, 0.08, 0.010},
    {12, 0.20, 0.38, true, 0.7071, -0.7071, 0.07, 0.012},
    {14, 0.25, 0.36, true, 1.0, 0.0, 0.05, 0.008},
    {15, 0.20, 0.43, true, 0.0, 1.0, 0.07, 0.010},
    {17, 0.00, 0.56, false, 0.0, -1.0, 0.08, 0.010},
    {20, 0.20, 0.42, true, 0.9806, 0.1961, 0.10, 0.010},
    {23, 0.10, 0.385, true, -1.0, 0.0, 0.06, 0.008},
    {25, 0.00, 0.50, false, 0.0, 1.0, 0.12, 0.010},
    {26, 0.00, 0.62, false, 0.0, 1.0, 0.20, 0.016},
    {45, 0.20, -0.13, true, 0.0, 1.0, 0.05, 0.010},
};

bool is_upper(int id) {
    return std::find(cmdm::kUpperIds.begin(), cmdm::kUpperIds.end(), id) != cmdm::kUpperIds.end();
}

double surface_z(double x, double y) {
    const double r = 1.0 - (x / kAx) * (x / kAx) - (y / kAy) * (y / kAy);
    return -kAz * std::sqrt(std::max(r, 0.0));
}

double ellipse(double x, double y, double cx, double cy, double rx, double ry) {
    const double u = (x - cx) / rx, v = (y - cy) / ry;
    return u * u + v * v;
}

Eigen::Vector3d face_color(double x, double y) {
    Eigen::Vector3d skin(0.86, 0.66, 0.53);
    skin += 0.05 * std::sin(9.0 * x + 1.3) * std::cos(7.0 * y) * Eigen::Vector3d(1.0, 0.9, 0.8);
    const double ax = std::abs(x);
    if (ellipse(ax, y, 0.2, -0.3, 0.13, 0.028) < 1.0) return {0.26, 0.18, 0.12};
    if (ellipse(ax, y, 0.2, -0.13, 0.085, 0.038) < 1.0) {
        if (ellipse(ax, y, 0.2, -0.13, 0.03, 0.03) < 1.0) return {0.15, 0.22, 0.35};
        return {0.95, 0.95, 0.93};
    }
    if (ellipse(x, y, kMouthX, kMouthY, kLipRx, kLipRy) < 1.0) return {0.78, 0.26, 0.27};
    if (ellipse(x, y, 0.0, 0.16, 0.07, 0.05) < 1.0) return skin * 0.82;
    return skin;
}

void fill_identity(PrimitiveSet& s, Eigen::Index n, double sigma, double logit) {
    s.log_scales = Mat::Constant(n, 3, std::log(sigma));
    s.rotations = Mat::Zero(n, 4);
    s.rotations.col(0).setOnes();
    s.opacity_logits = Mat::Constant(n, 1, logit);
}

std::vector<Eigen::Vector3d> face_candidates(int m) {
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    std::vector<Eigen::Vector3d> out;
    for (int i = 0; i < m; ++i) {
        const double z = -(i + 0.5) / m;
        const double r = std::sqrt(1.0 - z * z);
        const double phi = golden * i;
        const Eigen::Vector3d p(kAx * r * std::cos(phi), kAy * r * std::sin(phi), kAz * z);
        if (ellipse(p.x(), p.y(), kMouthX, kMouthY, kHoleRx, kHoleRy) < 1.0) continue;
        out.push_back(p);
    }
    return out;
}

// Column-major copy of the lower AU columns.
Mat lower_of(const Mat& au) {
    Mat out(au.rows(), cmdm::kLowerCount);
    for (int j = 0; j < cmdm::kLowerCount; ++j) out.col(j) = au.col(cmdm::au_slot(cmdm::kLowerIds[j]));
    return out;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    std::string s = buf;
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

}  // namespace

void SynthConfig::validate() const {
    if (frames < 8) throw ConfigError("synth: frames must be at least 8");
    if (width < 16 || height < 16) throw ConfigError("synth: image must be at least 16x16");
    if (face_primitives < 1 || mouth_primitives < 1) throw ConfigError("synth: primitive counts must be positive");
    if (!(audio_noise >= 0.0)) throw ConfigError("synth: audio noise must be non-negative");
    if (holdout_frames < 0 || holdout_frames >= frames) {
        throw ConfigError("synth: holdout frames must be in [0, frames)");
    }
}

SynthConfig SynthConfig::large() {
    SynthConfig c;
    c.width = 128;
    c.height = 128;
    return c;
}

Mat gen_au_traj(std::uint64_t seed, int frames) {
    if (frames < 8) throw ContractError("gen_au_traj: need at least 8 frames");
    Rng rng(sub_seed(seed, 11));
    Mat out(frames, cmdm::kAuCount);
    for (int slot = 0; slot < cmdm::kAuCount; ++slot) {
        const int id = cmdm::kAuIds[slot];
        double half, center;
        if (id == 25 || id == 26) {
            half = 2.5;
            center = 2.5;
        } else if (is_upper(id)) {
            half = rng.uniform(0.5, 1.0);
            center = half + rng.uniform(0.0, 0.5);
        } else {
            half = rng.uniform(0.8, 1.5);
            center = half + rng.uniform(0.0, 0.5);
        }
        double amp[3], period[3], phase[3];
        for (int k = 0; k < 3; ++k) {
            amp[k] = rng.uniform(0.5, 1.0);
            period[k] = rng.uniform(20.0, 80.0);
            phase[k] = rng.uniform(0.0, 2.0 * kPi);
        }
        Eigen::VectorXd s = Eigen::VectorXd::Zero(frames);
        for (int t = 0; t < frames; ++t)
            for (int k = 0; k < 3; ++k) s[t] += amp[k] * std::sin(2.0 * kPi * t / period[k] + phase[k]);
        // Stretch the realized excursion onto [center - half, center + half].
        const double lo = s.minCoeff(), hi = s.maxCoeff();
        const double mid = 0.5 * (lo + hi), extent = std::max(0.5 * (hi - lo), 1e-9);
        for (int t = 0; t < frames; ++t)
            out(t, slot) = std::clamp(center + half * (s[t] - mid) / extent, 0.0, cmdm::kAuMax);
    }
    return out;
}

AudioModel audio_model(std::uint64_t seed) {
    Rng rng(sub_seed(seed, 21));
    AudioModel m;
    m.embedding.resize(cmdm::kAudioDim, kLatentDim);
    for (Eigen::Index i = 0; i < m.embedding.size(); ++i) m.embedding.data()[i] = rng.normal(0.0, 0.05);
    m.mix = Mat::Identity(cmdm::kLowerCount, cmdm::kLowerCount);
    for (Eigen::Index i = 0; i < m.mix.size(); ++i) m.mix.data()[i] += rng.normal(0.0, 0.3 / std::sqrt(10.0));
    m.nuisance.resize(kNuisanceDim, 4);
    for (int k = 0; k < kNuisanceDim; ++k) {
        m.nuisance(k, 0) = rng.uniform(15.0, 60.0);
        m.nuisance(k, 1) = rng.uniform(0.0, 2.0 * kPi);
        m.nuisance(k, 2) = rng.uniform(15.0, 60.0);
        m.nuisance(k, 3) = rng.uniform(0.0, 2.0 * kPi);
    }
    return m;
}

Mat lower_columns(const Mat& au_traj) { return lower_of(au_traj); }

Mat latent_signal(const AudioModel& m, const Mat& au_traj) {
    const Eigen::Index t_len = au_traj.rows();
    Mat g(t_len, kLatentDim);
    const Mat centered = (lower_of(au_traj).array() - 2.5).matrix() / 2.5;
    g.leftCols(cmdm::kLowerCount) = centered * m.mix.transpose();
    for (Eigen::Index t = 0; t < t_len; ++t) {
        for (int k = 0; k < kNuisanceDim; ++k) {
            g(t, cmdm::kLowerCount + k) = 0.5 * std::sin(2.0 * kPi * t / m.nuisance(k, 0) + m.nuisance(k, 1)) +
                                          0.5 * std::sin(2.0 * kPi * t / m.nuisance(k, 2) + m.nuisance(k, 3));
        }
    }
    return g;
}

Mat gen_audio_features(const Mat& au_traj, std::uint64_t seed, double noise) {
    if (au_traj.cols() != cmdm::kAuCount) throw ContractError("gen_audio_features: expected T x 17 AUs");
    const AudioModel m = audio_model(seed);
    Mat a = latent_signal(m, au_traj) * m.embedding.transpose();
    if (noise > 0.0) {
        Rng rng(sub_seed(seed, 22));
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] += rng.normal(0.0, noise);
    }
    return a;
}

Mat RidgeFit::predict(const Mat& features) const {
    Mat y = features * weights;
    y.rowwise() += bias.row(0);
    return y;
}

RidgeFit fit_ridge(const Mat& x, const Mat& y, double lambda) {
    if (x.rows() != y.rows() || x.rows() == 0) throw ContractError("fit_ridge: sample counts differ or are zero");
    const Eigen::RowVectorXd mx = x.colwise().mean();
    const Eigen::RowVectorXd my = y.colwise().mean();
    const Eigen::MatrixXd xc = x.rowwise() - mx;
    const Eigen::MatrixXd yc = y.rowwise() - my;
    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += lambda;
    RidgeFit f;
    f.weights = gram.ldlt().solve(xc.transpose() * yc);
    f.bias = my - mx * f.weights;
    return f;
}

RidgeReport ridge_oracle(const Mat& features, const Mat& au_traj, int train_frames, double lambda) {
    if (train_frames <= 0 || train_frames > features.rows()) {
        throw ContractError("ridge_oracle: train frame count out of range");
    }
    const Mat lower = lower_of(au_traj);
    const RidgeFit f = fit_ridge(features.topRows(train_frames), lower.topRows(train_frames), lambda);
    RidgeReport r;
    r.lambda = lambda;
    r.train_mae = (f.predict(features.topRows(train_frames)) - lower.topRows(train_frames)).cwiseAbs().mean();
    const Eigen::Index held = features.rows() - train_frames;
    r.heldout_mae = held > 0
                        ? (f.predict(features.bottomRows(held)) - lower.bottomRows(held)).cwiseAbs().mean()
                        : r.train_mae;
    return r;
}

Mat Rig::basis(const Mat& positions, int slot) const {
    if (slot < 0 || slot >= cmdm::kAuCount) throw ContractError("rig: AU slot out of range");
    const RigUnit& u = kRig[slot];
    const bool upper = is_upper(u.id);
    const double inv = 1.0 / (2.0 * u.radius * u.radius);
    Mat out = Mat::Zero(positions.rows(), 3);
    for (Eigen::Index i = 0; i < positions.rows(); ++i) {
        const double x = positions(i, 0), y = positions(i, 1);
        if (upper != (y < kSplitY)) continue;
        double wx = 0.0, wy = 0.0;
        const double w1 = std::exp(-((x - u.cx) * (x - u.cx) + (y - u.cy) * (y - u.cy)) * inv);
        wx += w1 * u.dx;
        wy += w1 * u.dy;
        if (u.mirrored) {
            const double w2 = std::exp(-((x + u.cx) * (x + u.cx) + (y - u.cy) * (y - u.cy)) * inv);
            wx -= w2 * u.dx;
            wy += w2 * u.dy;
        }
        out(i, 0) = u.amplitude * wx;
        out(i, 1) = u.amplitude * wy;
    }
    return out;
}

Mat Rig::displacement(const Mat& positions, const cmdm::AuValues& au) const {
    Mat out = Mat::Zero(positions.rows(), 3);
    for (int slot = 0; slot < cmdm::kAuCount; ++slot) {
        if (au(slot) != 0.0) out += au(slot) * basis(positions, slot);
    }
    return out;
}

HeadGeometry build_head(const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    HeadGeometry h;

    int m = cfg.face_primitives;
    std::vector<Eigen::Vector3d> pts = face_candidates(m);
    while (static_cast<int>(pts.size()) < cfg.face_primitives) pts = face_candidates(++m);
    pts.resize(cfg.face_primitives);
    const Eigen::Index nf = cfg.face_primitives;
    h.face.branch = Branch::face;
    h.face.positions.resize(nf, 3);
    h.face.colors.resize(nf, 3);
    for (Eigen::Index i = 0; i < nf; ++i) {
        h.face.positions.row(i) = pts[i].transpose();
        h.face.colors.row(i) = face_color(pts[i].x(), pts[i].y()).transpose();
    }
    fill_identity(h.face, nf, kFaceSigma, kFaceOpacityLogit);

    Rng rng(sub_seed(seed, 31));
    const Eigen::Index nm = cfg.mouth_primitives;
    h.mouth.branch = Branch::mouth;
    h.mouth.positions.resize(nm, 3);
    h.mouth.colors.resize(nm, 3);
    for (Eigen::Index i = 0; i < nm; ++i) {
        const double r = std::sqrt(rng.uniform());
        const double phi = rng.uniform(0.0, 2.0 * kPi);
        const double x = kMouthX + 1.1 * kHoleRx * r * std::cos(phi);
        const double y = kMouthY + 1.3 * kHoleRy * r * std::sin(phi);
        const double z = surface_z(x, y) + rng.uniform(0.02, 0.06);
        h.mouth.positions.row(i) << x, y, z;
        if (y < kMouthY - 0.45 * kHoleRy) {
            h.mouth.colors.row(i) << 0.93, 0.91, 0.86;
        } else {
            h.mouth.colors.row(i) << 0.42, 0.08, 0.1;
        }
    }
    fill_identity(h.mouth, nm, kMouthSigma, kMouthOpacityLogit);

    const double anchors[kLandmarkCount][2] = {
        {-0.30, -0.30}, {-0.10, -0.30}, {0.10, -0.30}, {0.30, -0.30},   // brows
        {-0.28, -0.13}, {-0.12, -0.13}, {0.12, -0.13}, {0.28, -0.13},   // eyes
        {-0.20, 0.385}, {-0.10, 0.335}, {0.00, 0.33},  {0.10, 0.335},   // upper lip
        {0.20, 0.385},  {0.10, 0.44},   {0.00, 0.445}, {-0.10, 0.44},   // lower lip
        {-0.30, 0.55},  {-0.12, 0.68},  {0.12, 0.68},  {0.30, 0.55},    // jaw
    };
    std::vector<bool> used(nf, false);
    for (const auto& a : anchors) {
        int best = -1;
        double best_d = 0.0;
        for (Eigen::Index i = 0; i < nf; ++i) {
            if (used[i]) continue;
            const double dx = h.face.positions(i, 0) - a[0], dy = h.face.positions(i, 1) - a[1];
            const double d = dx * dx + dy * dy;
            if (best < 0 || d < best_d) {
                best = static_cast<int>(i);
                best_d = d;
            }
        }
        used[best] = true;
        h.landmark_ids.push_back(best);
    }
    return h;
}

PrimitiveSet deform(const PrimitiveSet& set, const Rig& rig, const cmdm::AuValues& au) {
    PrimitiveSet out = set;
    out.positions += rig.displacement(set.positions, au);
    return out;
}

FieldView constant_view(const PrimitiveSet& set) {
    FieldView v;
    v.mu = ad::constant(set.positions);
    v.log_scale = ad::constant(set.log_scales);
    v.rot = ad::constant(set.rotations);
    v.alpha_logit = ad::constant(set.opacity_logits);
    v.sh = ad::constant(((set.colors.array() - 0.5) / kShC0).matrix());
    v.sh_degree = 0;
    return v;
}

Mat project_points(const Mat& positions, const std::vector<int>& ids, const Camera& cam) {
    Mat out(1, 2 * static_cast<Eigen::Index>(ids.size()));
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const Eigen::Vector2d p = cam.project(positions.row(ids[k]).transpose());
        out(0, 2 * k) = p.x();
        out(0, 2 * k + 1) = p.y();
    }
    return out;
}

FrameRender render_frame(const HeadGeometry& head, const cmdm::AuValues& au, const Camera& cam, BlendMode mode,
                         int threads) {
    const Rig rig;
    const PrimitiveSet face = deform(head.face, rig, au);
    const PrimitiveSet mouth = deform(head.mouth, rig, au);
    RenderOptions opts;
    opts.threads = threads;
    const RenderOutput rf = render(constant_view(face), cam, opts);
    const RenderOutput rm = render(constant_view(mouth), cam, opts);
    FrameRender fr;
    fr.face = {rf.color.value(), rf.alpha.value()};
    fr.mouth = {rm.color.value(), rm.alpha.value()};
    fr.image = blend_head(rf.color, rf.alpha, rm.color, rm.alpha, mode).image.value();
    fr.landmarks = project_points(face.positions, head.landmark_ids, cam);
    return fr;
}

cmdm::AuValues estimate_aus(const Mat& canonical, const Mat& deformed, const Camera& cam) {
    if (canonical.rows() != deformed.rows() || canonical.cols() != 3 || deformed.cols() != 3) {
        throw ContractError("estimate_aus: position sets differ in shape");
    }
    const Rig rig;
    const Eigen::Index n = canonical.rows();
    std::vector<Mat> bases;
    for (int k = 0; k < cmdm::kAuCount; ++k) bases.push_back(rig.basis(canonical, k));
    Eigen::MatrixXd a(2 * n, cmdm::kAuCount);
    Eigen::VectorXd b(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Vector3d c = canonical.row(i).transpose();
        const Eigen::Vector3d t = cam.to_camera(c);
        const Eigen::Matrix<double, 2, 3> j = splat::projection_jacobian<double>(t, cam) * cam.rotation;
        for (int k = 0; k < cmdm::kAuCount; ++k) a.block(2 * i, k, 2, 1) = j * bases[k].row(i).transpose();
        b.segment(2 * i, 2) = cam.project(deformed.row(i).transpose()) - cam.project(c);
    }
    Eigen::MatrixXd normal = a.transpose() * a;
    normal.diagonal().array() += 1e-9;
    const Eigen::VectorXd x = normal.ldlt().solve(a.transpose() * b);
    return x.cwiseMax(0.0).cwiseMin(cmdm::kAuMax);
}

SceneBundle gen_scene(std::uint64_t seed, const SynthConfig& cfg, int threads) {
    cfg.validate();
    SceneBundle b;
    b.config = cfg;
    b.seed = seed;
    b.au_traj = gen_au_traj(seed, cfg.frames);
    b.audio.features = gen_audio_features(b.au_traj, seed, cfg.audio_noise);
    b.geometry = build_head(cfg, seed);
    b.camera = benchmark_camera(cfg.width, cfg.height);
    b.landmarks.resize(cfg.frames, 2 * kLandmarkCount);
    b.gt_frames.reserve(cfg.frames);
    for (int t = 0; t < cfg.frames; ++t) {
        FrameRender fr = render_frame(b.geometry, b.aus(t), b.camera, cfg.blend_mode, threads);
        b.gt_frames.push_back(std::move(fr.image));
        b.landmarks.row(t) = fr.landmarks;
    }
    b.oracle = ridge_oracle(b.audio.features, b.au_traj, std::max(cfg.train_frames(), 1));
    return b;
}

namespace {

Mat pack_set(const PrimitiveSet& s) {
    Mat m(s.size(), 14);
    m << s.positions, s.log_scales, s.rotations, s.opacity_logits, s.colors;
    return m;
}

PrimitiveSet unpack_set(const Mat& m, Branch branch, const std::string& origin) {
    if (m.cols() != 14) throw DataError(origin + ": primitive table must have 14 columns");
    PrimitiveSet s;
    s.branch = branch;
    s.positions = m.leftCols(3);
    s.log_scales = m.middleCols(3, 3);
    s.rotations = m.middleCols(6, 4);
    s.opacity_logits = m.middleCols(10, 1);
    s.colors = m.rightCols(3);
    return s;
}

}  // namespace

void save_bundle(const SceneBundle& b, const std::filesystem::path& dir, bool write_png) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto& c = b.config;
    std::ostringstream m;
    m << "# synthetic talking-head bundle\n"
      << "[bundle]\n"
      << "format = 1\n"
      << "seed = " << b.seed << "\n"
      << "frames = " << c.frames << "\n"
      << "width = " << c.width << "\n"
      << "height = " << c.height << "\n"
      << "face_primitives = " << c.face_primitives << "\n"
      << "mouth_primitives = " << c.mouth_primitives << "\n"
      << "audio_noise = " << fmt_double(c.audio_noise) << "\n"
      << "holdout_frames = " << c.holdout_frames << "\n"
      << "blend_mode = " << toml::quote(to_string(c.blend_mode)) << "\n"
      << "landmarks = " << kLandmarkCount << "\n"
      << "\n[oracle]\n"
      << "ridge_lambda = " << fmt_double(b.oracle.lambda) << "\n"
      << "ridge_train_mae = " << fmt_double(b.oracle.train_mae) << "\n"
      << "ridge_heldout_mae = " << fmt_double(b.oracle.heldout_mae) << "\n";
    io::write_file(dir / "manifest.toml", m.str());

    const auto t_len = static_cast<std::uint64_t>(c.frames);
    io::write_matrix(dir / "au_traj.hmtk", b.au_traj);
    io::write_matrix(dir / "audio.hmtk", b.audio.features);
    io::write_matrix(dir / "face_geom.hmtk", pack_set(b.geometry.face));
    io::write_matrix(dir / "mouth_geom.hmtk", pack_set(b.geometry.mouth));
    Mat ids(1, static_cast<Eigen::Index>(b.geometry.landmark_ids.size()));
    for (std::size_t k = 0; k < b.geometry.landmark_ids.size(); ++k) ids(0, k) = b.geometry.landmark_ids[k];
    io::write_matrix(dir / "landmark_ids.hmtk", ids, {static_cast<std::uint64_t>(ids.cols())});
    io::write_matrix(dir / "landmarks.hmtk", b.landmarks, {t_len, kLandmarkCount, 2});

    const Eigen::Index px = static_cast<Eigen::Index>(c.width) * c.height;
    io::Tensor frames;
    frames.dims = {t_len, static_cast<std::uint64_t>(c.height), static_cast<std::uint64_t>(c.width), 3};
    frames.data.reserve(static_cast<std::size_t>(t_len * px * 3));
    for (const Mat& f : b.gt_frames) frames.data.insert(frames.data.end(), f.data(), f.data() + f.size());
    io::write_hmtk(dir / "frames.hmtk", frames);
    if (write_png) {
        for (int t = 0; t < c.frames; ++t) {
            char name[32];
            std::snprintf(name, sizeof(name), "%04d.png", t);
            io::write_png(dir / "frames" / name, b.gt_frames[t], b.size());
        }
    }
}

SceneBundle load_bundle(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("bundle directory " + dir.string() + " does not exist");
    const fs::path manifest = dir / "manifest.toml";
    if (!fs::exists(manifest)) throw DataError(dir.string() + ": missing manifest.toml");
    toml::Table t;
    try {
        t = toml::parse_file(manifest);
    } catch (const ConfigError& e) {
        throw DataError(std::string("bad bundle manifest: ") + e.what());
    }
    auto get = [&](const char* key) -> const toml::Value& {
        auto it = t.find(key);
        if (it == t.end()) throw DataError(manifest.string() + ": missing key " + key);
        return it->second;
    };
    SceneBundle b;
    try {
        if (get("bundle.format").as_int("bundle.format") != 1) throw DataError("unsupported bundle format");
        b.seed = static_cast<std::uint64_t>(get("bundle.seed").as_int("bundle.seed"));
        auto& c = b.config;
        c.frames = static_cast<int>(get("bundle.frames").as_int("bundle.frames"));
        c.width = static_cast<int>(get("bundle.width").as_int("bundle.width"));
        c.height = static_cast<int>(get("bundle.height").as_int("bundle.height"));
        c.face_primitives = static_cast<int>(get("bundle.face_primitives").as_int("bundle.face_primitives"));
        c.mouth_primitives = static_cast<int>(get("bundle.mouth_primitives").as_int("bundle.mouth_primitives"));
        c.audio_noise = get("bundle.audio_noise").as_double("bundle.audio_noise");
        c.holdout_frames = static_cast<int>(get("bundle.holdout_frames").as_int("bundle.holdout_frames"));
        c.blend_mode = parse_blend_mode(get("bundle.blend_mode").as_string("bundle.blend_mode"));
        c.validate();
        b.oracle.lambda = get("oracle.ridge_lambda").as_double("oracle.ridge_lambda");
        b.oracle.train_mae = get("oracle.ridge_train_mae").as_double("oracle.ridge_train_mae");
        b.oracle.heldout_mae = get("oracle.ridge_heldout_mae").as_double("oracle.ridge_heldout_mae");
    } catch (const ConfigError& e) {
        throw DataError(std::string("bad bundle manifest: ") + e.what());
    }
    const auto& c = b.config;
    auto need = [&](const Mat& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
        if (m.rows() != rows || m.cols() != cols) {
            throw DataError(dir.string() + ": " + name + " has shape " + shape_str(m) + ", expected " +
                            std::to_string(rows) + "x" + std::to_string(cols));
        }
    };
    b.au_traj = io::read_matrix(dir / "au_traj.hmtk");
    need(b.au_traj, c.frames, cmdm::kAuCount, "au_traj");
    if (b.au_traj.minCoeff() < 0.0 || b.au_traj.maxCoeff() > cmdm::kAuMax) {
        throw DataError(dir.string() + ": AU values outside [0, 5]");
    }
    b.audio.features = io::read_matrix(dir / "audio.hmtk");
    need(b.audio.features, c.frames, cmdm::kAudioDim, "audio");
    const Mat face = io::read_matrix(dir / "face_geom.hmtk");
    need(face, c.face_primitives, 14, "face_geom");
    b.geometry.face = unpack_set(face, Branch::face, "face_geom");
    const Mat mouth = io::read_matrix(dir / "mouth_geom.hmtk");
    need(mouth, c.mouth_primitives, 14, "mouth_geom");
    b.geometry.mouth = unpack_set(mouth, Branch::mouth, "mouth_geom");
    const io::Tensor ids = io::read_hmtk(dir / "landmark_ids.hmtk");
    if (ids.data.size() != kLandmarkCount) throw DataError(dir.string() + ": landmark_ids must hold 20 entries");
    for (double v : ids.data) {
        if (v < 0 || v >= c.face_primitives || v != std::floor(v)) throw DataError("landmark id out of range");
        b.geometry.landmark_ids.push_back(static_cast<int>(v));
    }
    b.landmarks = io::read_matrix(dir / "landmarks.hmtk");
    need(b.landmarks, c.frames, 2 * kLandmarkCount, "landmarks");
    const io::Tensor frames = io::read_hmtk(dir / "frames.hmtk");
    const std::vector<std::uint64_t> want = {static_cast<std::uint64_t>(c.frames),
                                             static_cast<std::uint64_t>(c.height),
                                             static_cast<std::uint64_t>(c.width), 3};
    if (frames.dims != want) throw DataError(dir.string() + ": frames.hmtk dims do not match the manifest");
    const Eigen::Index px = static_cast<Eigen::Index>(c.width) * c.height;
    b.gt_frames.reserve(c.frames);
    for (int f = 0; f < c.frames; ++f) {
        Mat img(px, 3);
        std::copy_n(frames.data.begin() + static_cast<std::ptrdiff_t>(f) * px * 3, px * 3, img.data());
        b.gt_frames.push_back(std::move(img));
    }
    b.camera = benchmark_camera(c.width, c.height);
    return b;
}

}  // namespace hmt::synth
