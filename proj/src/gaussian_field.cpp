#include "hmt/gaussian_field.hpp"

#include "hmt/error.hpp"
#include "hmt/rng.hpp"

#include <algorithm>

namespace hmt {

std::string_view to_string(Branch b) { return b == Branch::face ? "face" : "mouth"; }

void GaussianField::renormalize() {
    Mat& q = rot.mutable_value();
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        const double n = q.row(i).norm();
        if (n < 1e-12) {
            q.row(i) << 1.0, 0.0, 0.0, 0.0;
        } else {
            q.row(i) /= n;
        }
    }
}

Deformation Deformation::from_packed(const ad::Var& packed) {
    if (packed.cols() != 10) {
        throw ContractError("Deformation::from_packed: expected N x 10, got " +
                            shape_str(packed.value()));
    }
    return {ad::slice_cols(packed, 0, 3), ad::slice_cols(packed, 3, 3),
            ad::slice_cols(packed, 6, 4)};
}

Deformation Deformation::zeros(Eigen::Index n) {
    return {ad::constant(Mat::Zero(n, 3)), ad::constant(Mat::Zero(n, 3)),
            ad::constant(Mat::Zero(n, 4))};
}

GaussianField init_static(const PrimitiveSet& prims, std::uint64_t seed, const InitOptions& opts) {
    const Eigen::Index n = prims.size();
    if (n < 1) throw ContractError("init_static: primitive count must be at least 1");
    if (prims.log_scales.rows() != n || prims.rotations.rows() != n ||
        prims.opacity_logits.rows() != n || prims.colors.rows() != n) {
        throw ContractError("init_static: inconsistent primitive arrays");
    }
    if (opts.sh_degree != 0 && opts.sh_degree != 1) {
        throw ContractError("init_static: SH degree must be 0 or 1");
    }

    Rng rng(seed);
    Mat mu = prims.positions;
    if (opts.position_jitter > 0) {
        for (Eigen::Index i = 0; i < mu.size(); ++i) {
            mu.data()[i] = std::clamp(mu.data()[i] + rng.normal(0.0, opts.position_jitter), -1.0, 1.0);
        }
    }
    Mat sh = Mat::Zero(n, sh_coeff_count(opts.sh_degree));
    sh.leftCols(3) = (prims.colors.array() - 0.5) / kShC0;

    GaussianField f;
    f.branch = prims.branch;
    f.sh_degree = opts.sh_degree;
    f.mu = ad::parameter(std::move(mu));
    f.log_scale = ad::parameter(prims.log_scales);
    f.rot = ad::parameter(prims.rotations);
    f.alpha_logit = ad::parameter(prims.opacity_logits);
    f.sh = ad::parameter(std::move(sh));
    f.renormalize();
    return f;
}

FieldView apply_deformation(const GaussianField& field, const Deformation& delta) {
    const Eigen::Index n = field.size();
    if (delta.d_mu.rows() != n || delta.d_s.rows() != n || delta.d_q.rows() != n ||
        delta.d_mu.cols() != 3 || delta.d_s.cols() != 3 || delta.d_q.cols() != 4) {
        throw ContractError("apply_deformation: deformation does not match field of size " +
                            std::to_string(n));
    }
    FieldView v;
    v.mu = ad::add(field.mu, delta.d_mu);
    v.log_scale = ad::add(field.log_scale, delta.d_s);
    v.rot = ad::normalize_rows(ad::add(field.rot, delta.d_q), 1e-12);
    v.alpha_logit = field.alpha_logit;
    v.sh = field.sh;
    v.sh_degree = field.sh_degree;
    return v;
}

FieldView canonical_view(const GaussianField& field) {
    return apply_deformation(field, Deformation::zeros(field.size()));
}

}  // namespace hmt
