#include "generators.hpp"

#include "hmt/camera.hpp"
#include "hmt/gaussian_field.hpp"
#include "hmt/renderer.hpp"
#include "hmt/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace hmt;

namespace {

PrimitiveSet random_set(Rng& rng, Eigen::Index n) {
    PrimitiveSet s;
    s.positions = test::random_mat(rng, n, 3, -0.5, 0.5);
    s.log_scales = test::random_mat(rng, n, 3, -3.5, -2.5);
    s.rotations = test::random_unit_quats(rng, n);
    s.opacity_logits = test::random_mat(rng, n, 1, -1.0, 2.0);
    s.colors = test::random_mat(rng, n, 3, 0.0, 1.0);
    return s;
}

Deformation random_delta(Rng& rng, Eigen::Index n, double scale) {
    return {ad::constant(test::random_mat(rng, n, 3, -scale, scale)),
            ad::constant(test::random_mat(rng, n, 3, -scale, scale)),
            ad::constant(test::random_mat(rng, n, 4, -scale, scale))};
}

}  // namespace

TEST_CASE("single primitive at the origin") {
    PrimitiveSet s;
    s.positions = Mat::Zero(1, 3);
    s.log_scales = Mat::Constant(1, 3, -3.0);
    s.rotations = Mat(1, 4);
    s.rotations << 2.0, 0.0, 0.0, 0.0;
    s.opacity_logits = Mat::Zero(1, 1);
    s.colors = Mat::Constant(1, 3, 0.5);
    InitOptions opts;
    opts.position_jitter = 0.0;
    const GaussianField f = init_static(s, 1, opts);
    CHECK(f.mu.value() == Mat::Zero(1, 3));
    CHECK(f.rot.value().row(0).norm() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(f.sh.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("initialization is deterministic and satisfies the field invariants") {
    Rng rng(1);
    const PrimitiveSet s = random_set(rng, 50);
    const GaussianField a = init_static(s, 7);
    const GaussianField b = init_static(s, 7);
    CHECK(a.mu.value() == b.mu.value());
    CHECK(a.rot.value() == b.rot.value());
    for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(std::abs(a.rot.value().row(i).norm() - 1.0) <= 1e-9);
    const Mat alpha = (1.0 / (1.0 + (-a.alpha_logit.value().array()).exp())).matrix();
    CHECK(alpha.minCoeff() > 0.0);
    CHECK(alpha.maxCoeff() < 1.0);
    CHECK(a.log_scale.value().array().exp().minCoeff() > 0.0);
    const GaussianField c = init_static(s, 8);
    CHECK(a.mu.value() != c.mu.value());
}

TEST_CASE("benchmark head stays inside the unit cube") {
    const synth::HeadGeometry head = synth::build_head(synth::SynthConfig{}, 0);
    CHECK(head.face.size() == 2000);
    const GaussianField f = init_static(head.face, 3);
    CHECK(f.mu.value().cwiseAbs().maxCoeff() <= 1.0);
    CHECK(head.face.positions.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(head.mouth.positions.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("zero deformation is the identity") {
    Rng rng(2);
    const GaussianField f = init_static(random_set(rng, 20), 1);
    const FieldView v = apply_deformation(f, Deformation::zeros(20));
    CHECK(v.mu.value() == f.mu.value());
    CHECK(v.log_scale.value() == f.log_scale.value());
    CHECK((v.rot.value() - f.rot.value()).cwiseAbs().maxCoeff() <= 1e-15);
    const FieldView c = canonical_view(f);
    CHECK(c.rot.value() == v.rot.value());
}

TEST_CASE("colinear quaternion update and direct position addition") {
    PrimitiveSet s;
    s.positions = Mat(1, 3);
    s.positions << 0.1, 0.0, 0.0;
    s.log_scales = Mat::Zero(1, 3);
    s.rotations = Mat(1, 4);
    s.rotations << 1.0, 0.0, 0.0, 0.0;
    s.opacity_logits = Mat::Zero(1, 1);
    s.colors = Mat::Zero(1, 3);
    InitOptions opts;
    opts.position_jitter = 0.0;
    const GaussianField f = init_static(s, 0, opts);
    Mat dmu(1, 3), dq(1, 4);
    dmu << 0.05, -0.1, 0.0;
    dq << 1.0, 0.0, 0.0, 0.0;
    const FieldView v =
        apply_deformation(f, {ad::constant(dmu), ad::constant(Mat::Zero(1, 3)), ad::constant(dq)});
    CHECK(v.mu.value()(0, 0) == doctest::Approx(0.15).epsilon(1e-15));
    CHECK(v.mu.value()(0, 1) == doctest::Approx(-0.1).epsilon(1e-15));
    CHECK(v.mu.value()(0, 2) == 0.0);
    CHECK(v.rot.value()(0, 0) == 1.0);
    CHECK(v.rot.value().rightCols(3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("deformation never mutates the canonical field and keeps unit quaternions") {
    Rng rng(3);
    const GaussianField f = init_static(random_set(rng, 1000), 2);
    const Mat mu0 = f.mu.value(), s0 = f.log_scale.value(), q0 = f.rot.value();
    const FieldView v = apply_deformation(f, random_delta(rng, 1000, 0.3));
    CHECK(f.mu.value() == mu0);
    CHECK(f.log_scale.value() == s0);
    CHECK(f.rot.value() == q0);
    for (Eigen::Index i = 0; i < 1000; ++i) CHECK(std::abs(v.rot.value().row(i).norm() - 1.0) <= 1e-9);
    CHECK(v.alpha_logit.value() == f.alpha_logit.value());
    CHECK(v.sh.value() == f.sh.value());
}

TEST_CASE("renormalize restores unit rotations after an edit") {
    Rng rng(4);
    GaussianField f = init_static(random_set(rng, 30), 2);
    f.rot.mutable_value() *= 3.7;
    f.rot.mutable_value().row(5).setZero();
    f.renormalize();
    for (Eigen::Index i = 0; i < 30; ++i) CHECK(std::abs(f.rot.value().row(i).norm() - 1.0) <= 1e-9);
}

TEST_CASE("zero deformation renders bitwise identically to the canonical field") {
    Rng rng(5);
    PrimitiveSet s = random_set(rng, 40);
    const GaussianField f = init_static(s, 1);
    const Camera cam = benchmark_camera(32, 32);
    const RenderOutput a = render(canonical_view(f), cam);
    const RenderOutput b = render(apply_deformation(f, Deformation::zeros(40)), cam);
    CHECK(a.color.value() == b.color.value());
    CHECK(a.alpha.value() == b.alpha.value());
}

TEST_CASE("packed deformations split as 3 | 3 | 4") {
    Mat p(2, 10);
    for (int i = 0; i < 20; ++i) p.data()[i] = i;
    const Deformation d = Deformation::from_packed(ad::constant(p));
    CHECK(d.d_mu.value()(1, 0) == 10.0);
    CHECK(d.d_s.value()(0, 2) == 5.0);
    CHECK(d.d_q.value()(1, 3) == 19.0);
    CHECK_THROWS(Deformation::from_packed(ad::constant(Mat::Zero(2, 9))));
}
