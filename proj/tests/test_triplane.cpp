#include "generators.hpp"

#include "hmt/gradcheck.hpp"
#include "hmt/triplane.hpp"

#include <doctest.h>

#include <numeric>

using namespace hmt;

TEST_CASE("output width is three planes times levels times features") {
    TriPlaneHash h;
    CHECK(h.config().output_dim() == 48);
    const ad::Var e = h.encode(ad::constant(Mat::Zero(5, 3)));
    CHECK(e.rows() == 5);
    CHECK(e.cols() == 48);
}

TEST_CASE("zero tables encode to zero") {
    TriPlaneHash h;
    Rng rng(1);
    const ad::Var e = h.encode(ad::constant(test::random_mat(rng, 10, 3)));
    CHECK(e.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hash indices") {
    TriPlaneHash h;
    REQUIRE(h.resolution(0) == 16);
    REQUIRE(h.is_dense(0));
    CHECK(h.hash_index(1, 2, 0) == 35u);
    const int top = h.config().levels - 1;
    REQUIRE_FALSE(h.is_dense(top));
    CHECK(h.hash_index(0, 0, top) == 0u);
    CHECK(h.hash_index(123, 45, top) == h.hash_index(123, 45, top));
    Rng rng(2);
    for (int l = 0; l < h.config().levels; ++l) {
        for (int k = 0; k < 200; ++k) {
            const auto ix = static_cast<std::uint32_t>(rng.uniform(0, h.resolution(l) + 1));
            const auto iy = static_cast<std::uint32_t>(rng.uniform(0, h.resolution(l) + 1));
            CHECK(h.hash_index(ix, iy, l) < h.config().table_size());
        }
    }
}

TEST_CASE("a query on a grid vertex returns that vertex's entry") {
    TriPlaneHash h;
    Rng rng(3);
    h.init_uniform(rng, 1.0);
    // Level 0 has resolution 16: vertex i sits at 2 i / 16 - 1.
    Mat p(1, 3);
    p << 2.0 * 3 / 16 - 1, 2.0 * 10 / 16 - 1, 2.0 * 12 / 16 - 1;
    const Mat e = h.encode(ad::constant(p)).value();
    const Mat& t = h.tables().value();
    const int L = h.config().levels;
    const int F = h.config().features;
    const std::array<std::array<std::uint32_t, 2>, 3> verts{{{3, 10}, {10, 12}, {3, 12}}};
    for (int plane = 0; plane < 3; ++plane) {
        const Eigen::Index row = h.table_offset(plane, 0) + h.hash_index(verts[plane][0], verts[plane][1], 0);
        for (int f = 0; f < F; ++f) CHECK(e(0, plane * L * F + f) == doctest::Approx(t(row, f)).epsilon(1e-14));
    }
}

TEST_CASE("encoding is continuous") {
    TriPlaneHash h;
    Rng rng(4);
    h.init_uniform(rng, 1e-2);
    const Mat p = test::random_mat(rng, 100, 3, -0.99, 0.99);
    const Mat q = (p.array() + 1e-6).matrix();
    const Mat d = h.encode(ad::constant(p)).value() - h.encode(ad::constant(q)).value();
    const double table_mag = h.tables().value().cwiseAbs().maxCoeff();
    // Each coordinate moves at most eps * R / 2 grid cells, times 2 corner differences.
    CHECK(d.cwiseAbs().maxCoeff() <= 2.0 * table_mag * 1e-6 * 256 * 2);
}

TEST_CASE("table and position gradients match finite differences") {
    TriPlaneConfig cfg;
    cfg.levels = 3;
    cfg.log2_table_size = 8;
    cfg.max_resolution = 40;
    TriPlaneHash h(cfg);
    Rng rng(5);
    h.init_uniform(rng, 0.5);
    const Mat pos = test::random_mat(rng, 6, 3, -0.9, 0.9);
    const Mat w = test::random_mat(rng, 6, cfg.output_dim());
    std::vector<ad::Var> params{h.tables()};
    const double err_t =
        ad::finite_diff_check([&] { return ad::sum(ad::mul(h.encode(ad::constant(pos)), ad::constant(w))); },
                              params, 1e-6);
    CHECK(err_t < 1e-6);
    const double err_p = ad::finite_diff_check(
        [&](const ad::Var& x) { return ad::sum(ad::mul(h.encode(x), ad::constant(w))); }, pos, 1e-7);
    CHECK(err_p < 1e-4);
}

TEST_CASE("permuting primitives permutes the encodings") {
    TriPlaneHash h;
    Rng rng(6);
    h.init_uniform(rng);
    const Mat p = test::random_mat(rng, 40, 3);
    std::vector<int> perm(40);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = 39; i > 0; --i) std::swap(perm[i], perm[static_cast<int>(rng.uniform(0, i + 1))]);
    Mat pp(40, 3);
    for (int i = 0; i < 40; ++i) pp.row(i) = p.row(perm[i]);
    const Mat e = h.encode(ad::constant(p)).value();
    const Mat ep = h.encode(ad::constant(pp)).value();
    for (int i = 0; i < 40; ++i) CHECK(ep.row(i) == e.row(perm[i]));
}

TEST_CASE("initial tables are small") {
    TriPlaneHash h;
    Rng rng(7);
    h.init_uniform(rng);
    CHECK(h.tables().value().cwiseAbs().maxCoeff() <= 1e-4);
    CHECK(h.tables().value().size() * 8 < 10 * 1024 * 1024);
}
