#pragma once

#include "hmt/autodiff.hpp"

#include <cstdint>
#include <string_view>

namespace hmt {

enum class Branch { face, mouth };

std::string_view to_string(Branch b);

// Oracle description of a set of primitives, as produced by the synthetic
// scene generator. Colors are plain RGB; they become band-0 SH coefficients
// on initialization.
struct PrimitiveSet {
    Branch branch = Branch::face;
    Mat positions;       // N x 3
    Mat log_scales;      // N x 3
    Mat rotations;       // N x 4, (w, x, y, z)
    Mat opacity_logits;  // N x 1
    Mat colors;          // N x 3

    Eigen::Index size() const { return positions.rows(); }
};

inline constexpr double kShC0 = 0.28209479177387814;
inline constexpr double kShC1 = 0.4886025119029199;

inline int sh_coeff_count(int degree) { return 3 * (degree + 1) * (degree + 1); }

// Canonical per-primitive parameters of one branch, all trainable.
struct GaussianField {
    Branch branch = Branch::face;
    int sh_degree = 0;
    ad::Var mu;           // N x 3, inside [-1, 1]^3
    ad::Var log_scale;    // N x 3
    ad::Var rot;          // N x 4 unit quaternions
    ad::Var alpha_logit;  // N x 1
    ad::Var sh;           // N x 3(deg+1)^2

    Eigen::Index size() const { return mu.rows(); }
    // Projects rotations back onto the unit sphere after an optimizer step.
    void renormalize();
};

// Per-primitive offsets predicted by a motion field.
struct Deformation {
    ad::Var d_mu;  // N x 3
    ad::Var d_s;   // N x 3
    ad::Var d_q;   // N x 4

    // Splits an N x 10 block laid out as d_mu | d_s | d_q.
    static Deformation from_packed(const ad::Var& packed);
    static Deformation zeros(Eigen::Index n);
};

// Deformed parameters consumed by the renderer.
struct FieldView {
    ad::Var mu;
    ad::Var log_scale;
    ad::Var rot;
    ad::Var alpha_logit;
    ad::Var sh;
    int sh_degree = 0;

    Eigen::Index size() const { return mu.rows(); }
};

struct InitOptions {
    double position_jitter = 0.01;
    int sh_degree = 0;
};

GaussianField init_static(const PrimitiveSet& prims, std::uint64_t seed,
                          const InitOptions& opts = {});

// mu + d_mu, s + d_s, normalize(q + d_q). The canonical field is not touched.
FieldView apply_deformation(const GaussianField& field, const Deformation& delta);

// The undeformed view. Rotations pass through the same normalization as in
// apply_deformation so a zero deformation is bitwise identical to this view.
FieldView canonical_view(const GaussianField& field);

}  // namespace hmt
