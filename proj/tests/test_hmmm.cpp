#include "generators.hpp"

#include "hmt/error.hpp"
#include "hmt/hmmm.hpp"

#include <doctest.h>

#include <array>
#include <cmath>

using namespace hmt;
using namespace hmt::hmmm;

TEST_CASE("default path ratio is 4:4:2") {
    PathRatio r;
    CHECK(r.audio == 0.4);
    CHECK(r.masked == 0.4);
    CHECK(r.vanilla == 0.2);
    CHECK_NOTHROW(r.validate());
    CHECK_THROWS_AS((PathRatio{0.5, 0.5, 0.5}.validate()), ConfigError);
    CHECK_THROWS_AS((PathRatio{1.2, -0.2, 0.0}.validate()), ConfigError);
}

TEST_CASE("path sampling is reproducible and converges to the ratio") {
    Rng a(11), b(11);
    for (int i = 0; i < 1000; ++i) CHECK(sample_path(a) == sample_path(b));

    Rng rng(12);
    const int n = 100000;
    std::array<int, 3> counts{};
    for (int i = 0; i < n; ++i) ++counts[static_cast<int>(sample_path(rng))];
    const std::array<double, 3> p{0.4, 0.4, 0.2};
    for (int k = 0; k < 3; ++k) {
        const double sigma = std::sqrt(p[k] * (1 - p[k]) / n);
        CHECK(std::abs(counts[k] / double(n) - p[k]) <= std::max(0.01, 3 * sigma));
    }
}

TEST_CASE("feature masking") {
    Rng rng(13);
    const Mat c = test::random_mat(rng, 1, 32, 0.5, 1.0);
    CHECK(mask_features(ad::constant(c), 0.0, rng).value() == c);
    CHECK(mask_features(ad::constant(c), 1.0, rng).value().isZero());
    CHECK_THROWS_AS(mask_features(ad::constant(c), 1.5, rng), ContractError);

    Rng r1(14), r2(14);
    CHECK(mask_features(ad::constant(c), 0.3, r1).value() == mask_features(ad::constant(c), 0.3, r2).value());

    const Mat kept = mask_features(ad::constant(c), 0.5, rng).value();
    for (int j = 0; j < 32; ++j) CHECK((kept(0, j) == 0.0 || kept(0, j) == c(0, j)));

    const int trials = 100000;
    double zeros = 0;
    for (int t = 0; t < trials; ++t) {
        const Mat m = mask_features(ad::constant(c), 0.2, rng).value();
        zeros += static_cast<double>((m.array() == 0.0).count());
    }
    const double mean = zeros / trials;
    const double sigma = std::sqrt(32 * 0.2 * 0.8 / trials);
    CHECK(std::abs(mean - 6.4) <= 3 * sigma);
}

TEST_CASE("gated fusion limits and fixed point") {
    Rng rng(15);
    const Mat ci = test::random_mat(rng, 1, 32), ce = test::random_mat(rng, 1, 32);
    CHECK(gated_fuse(ad::constant(ci), ad::constant(ce), ad::constant(Mat::Ones(1, 32))).value() == ce);
    CHECK(gated_fuse(ad::constant(ci), ad::constant(ce), ad::constant(Mat::Zero(1, 32))).value() == ci);
    CHECK(gated_fuse(ad::constant(ci), ad::constant(ce), ad::constant(Mat::Ones(1, 1))).value() == ce);

    for (int k = 0; k < 1000; ++k) {
        const Mat v = test::random_mat(rng, 1, 32, -5, 5);
        const Mat a = test::random_mat(rng, 1, 32, 0, 1);
        const Mat f = gated_fuse(ad::constant(v), ad::constant(v), ad::constant(a)).value();
        CHECK((f - v).cwiseAbs().maxCoeff() <= 1e-15 * 5 * 4);
    }
}

TEST_CASE("fused features stay between their inputs") {
    Rng rng(16);
    for (int k = 0; k < 1000; ++k) {
        const Mat ci = test::random_mat(rng, 1, 32, -3, 3), ce = test::random_mat(rng, 1, 32, -3, 3);
        const Mat a = test::random_mat(rng, 1, 32, 0, 1);
        const Mat f = gated_fuse(ad::constant(ci), ad::constant(ce), ad::constant(a)).value();
        for (int j = 0; j < 32; ++j) {
            CHECK(f(0, j) >= std::min(ci(0, j), ce(0, j)) - 1e-12);
            CHECK(f(0, j) <= std::max(ci(0, j), ce(0, j)) + 1e-12);
        }
    }
    for (int k = 0; k < 200; ++k) {
        const Mat ci = test::random_mat(rng, 1, 32, -3, 3);
        const double t = rng.uniform(0.01, 2.0);
        const Mat ce = (ci.array() + t).matrix();
        const Mat f = gated_fuse(ad::constant(ci), ad::constant(ce), ad::constant(test::random_mat(rng, 1, 32, 0, 1)))
                          .value();
        for (int j = 0; j < 32; ++j) {
            CHECK(f(0, j) >= ci(0, j) - 1e-12);
            CHECK(f(0, j) <= ci(0, j) + t + 1e-12);
        }
    }
}

TEST_CASE("path selection pairs") {
    Rng rng(17);
    MotionFeatures f;
    f.c_e_vu = ad::constant(test::random_mat(rng, 1, 7));
    f.c_e_vl = ad::constant(test::random_mat(rng, 1, 32));
    f.c_i_al = ad::constant(test::random_mat(rng, 1, 32));
    f.c_i_al_mask = ad::constant(test::random_mat(rng, 1, 32));
    f.c_e_al = ad::constant(test::random_mat(rng, 1, 32));
    const auto audio = select_pair(FusionPath::audio, f);
    CHECK(audio.implicit_feature.node() == f.c_i_al.node());
    CHECK(audio.explicit_feature.node() == f.c_e_al.node());
    const auto masked = select_pair(FusionPath::masked, f);
    CHECK(masked.implicit_feature.node() == f.c_i_al_mask.node());
    CHECK(masked.explicit_feature.node() == f.c_e_vl.node());
    const auto vanilla = select_pair(FusionPath::vanilla, f);
    CHECK(vanilla.implicit_feature.node() == f.c_i_al.node());
    CHECK(vanilla.explicit_feature.node() == f.c_e_vl.node());
    MotionFeatures partial = f;
    partial.c_i_al_mask = {};
    CHECK_THROWS_AS(select_pair(FusionPath::masked, partial), ContractError);
}

TEST_CASE("gate modes parse and round-trip") {
    for (const char* s : {"vector", "scalar", "fixed-alpha:0.5", "pure-explicit", "pure-implicit"}) {
        FusionConfig c;
        parse_gate_mode(s, c);
        CHECK(gate_mode_string(c) == s);
    }
    FusionConfig c;
    CHECK_THROWS_AS(parse_gate_mode("fixed-alpha:2", c), ConfigError);
    CHECK_THROWS_AS(parse_gate_mode("softmax", c), ConfigError);
}

TEST_CASE("gate network outputs") {
    Rng rng(18);
    GateNet net(FusionConfig{}, rng);
    const Mat ci = test::random_mat(rng, 1, 32), ce = test::random_mat(rng, 1, 32);
    const FusionResult r = net.fuse(ad::constant(ci), ad::constant(ce));
    CHECK(r.alpha.cols() == 32);
    CHECK(r.alpha.value().minCoeff() > 0.0);
    CHECK(r.alpha.value().maxCoeff() < 1.0);

    FusionConfig sc;
    sc.gate = GateMode::scalar;
    GateNet scalar(sc, rng);
    CHECK(scalar.fuse(ad::constant(ci), ad::constant(ce)).alpha.cols() == 1);

    FusionConfig cc;
    cc.fusion = FusionMode::concat;
    GateNet concat(cc, rng);
    const FusionResult cr = concat.fuse(ad::constant(ci), ad::constant(ce));
    CHECK_FALSE(cr.alpha.defined());
    CHECK(cr.c_f.cols() == 32);
}

TEST_CASE("pure gate modes equal direct conditioning bit for bit") {
    Rng rng(19);
    FusionConfig pe, pi;
    pe.gate = GateMode::pure_explicit;
    pi.gate = GateMode::pure_implicit;
    GateNet e(pe, rng), i(pi, rng);
    for (int k = 0; k < 100; ++k) {
        const Mat ci = test::random_mat(rng, 1, 32), ce = test::random_mat(rng, 1, 32);
        CHECK(e.fuse(ad::constant(ci), ad::constant(ce)).c_f.value() == ce);
        CHECK(i.fuse(ad::constant(ci), ad::constant(ce)).c_f.value() == ci);
    }
}

TEST_CASE("region attention") {
    Rng rng(20);
    GateNet net(FusionConfig{}, rng);
    const Mat h = test::random_mat(rng, 2, 48);
    const Mat cf = test::random_mat(rng, 1, 32);
    const Mat cu = test::random_mat(rng, 1, 7);
    const RegionControls rc = net.region_attention(ad::constant(h), ad::constant(cf), ad::constant(cu));
    CHECK(rc.c_f_region.rows() == 2);
    CHECK(rc.c_u_region.cols() == 7);
    CHECK(rc.c_f_region.value().row(0) != rc.c_f_region.value().row(1));
    const Mat att = net.att_f(ad::constant(h)).value();
    CHECK(att.minCoeff() > 0.0);
    CHECK(att.maxCoeff() < 1.0);
    const RegionControls zero =
        net.region_attention(ad::constant(h), ad::constant(Mat::Zero(1, 32)), ad::constant(cu));
    CHECK(zero.c_f_region.value().isZero());

    for (auto& l : net.att_f.layers) {
        l.weight.mutable_value().setZero();
        l.bias.mutable_value().setConstant(1e3);
    }
    const RegionControls ones = net.region_attention(ad::constant(h), ad::constant(cf), ad::constant(cu));
    for (int r = 0; r < 2; ++r) CHECK(ones.c_f_region.value().row(r) == cf);
}

TEST_CASE("deformation network") {
    Rng rng(21);
    GateNet net(FusionConfig{}, rng);
    CHECK(net.deform.layers.front().in_features() == 87);
    const Mat h = test::random_mat(rng, 30, 48);
    const Mat cf = test::random_mat(rng, 1, 32), cu = test::random_mat(rng, 1, 7);
    const RegionControls rc = net.region_attention(ad::constant(h), ad::constant(cf), ad::constant(cu));
    const Mat d0 = net.predict_deformation(ad::constant(h), rc).value();
    CHECK(d0.cols() == 10);
    CHECK(d0.isZero());

    net.deform.layers.back().weight.mutable_value() = test::random_mat(rng, 128, 10);
    const Mat d = net.predict_deformation(ad::constant(h), rc).value();
    Mat hp = h;
    hp.row(0).swap(hp.row(7));
    const RegionControls rcp = net.region_attention(ad::constant(hp), ad::constant(cf), ad::constant(cu));
    const Mat dp = net.predict_deformation(ad::constant(hp), rcp).value();
    CHECK(dp.row(0) == d.row(7));
    CHECK(dp.row(7) == d.row(0));
    CHECK(dp.row(3) == d.row(3));
}
