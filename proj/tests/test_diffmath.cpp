#include "generators.hpp"

#include "hmt/autodiff.hpp"
#include "hmt/gradcheck.hpp"
#include "hmt/hmmm.hpp"
#include "hmt/optim.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

using namespace hmt;
using namespace hmt::ad;

namespace {

// Keeps samples away from the kinks of abs / relu.
Mat away_from_zero(Rng& rng, Eigen::Index r, Eigen::Index c) {
    Mat m = test::random_mat(rng, r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (std::abs(m.data()[i]) < 0.05) m.data()[i] = m.data()[i] < 0 ? -0.3 : 0.3;
    }
    return m;
}

}  // namespace

TEST_CASE("polynomial and identity derivatives") {
    Var x = parameter(Mat::Constant(1, 1, 3.0));
    backward(sum(mul(x, x)));
    CHECK(x.grad()(0, 0) == doctest::Approx(6.0));

    Var y = parameter(Mat::Constant(1, 1, 5.0));
    backward(sum(y));
    CHECK(y.grad()(0, 0) == 1.0);
}

TEST_CASE("total opacity of two stacked splats differentiates to 1 - a2") {
    Var a1 = parameter(Mat::Constant(1, 1, 0.5));
    Var a2 = parameter(Mat::Constant(1, 1, 0.5));
    // A = a1 + a2 (1 - a1)
    Var total = add(a1, mul(a2, add_scalar(neg(a1), 1.0)));
    CHECK(total.item() == 0.75);
    backward(total);
    CHECK(a1.grad()(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(a2.grad()(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("grad shape equals value shape") {
    Rng rng(1);
    Var a = parameter(test::random_mat(rng, 4, 3));
    Var b = parameter(test::random_mat(rng, 3, 5));
    backward(sum(matmul(a, b)));
    CHECK(a.grad().rows() == 4);
    CHECK(a.grad().cols() == 3);
    CHECK(b.grad().rows() == 3);
    CHECK(b.grad().cols() == 5);
}

TEST_CASE("one Adam step from rest matches the hand evaluation") {
    optim::AdamConfig cfg;
    Mat p = Mat::Zero(1, 1);
    optim::OptimizerState st;
    optim::adam_step(p, Mat::Ones(1, 1), st, cfg);
    CHECK(st.step_count == 1);
    CHECK(p(0, 0) == doctest::Approx(-5e-4 * (1.0 / (1.0 + 1e-8))).epsilon(1e-14));
}

TEST_CASE("Adam leaves parameters alone for zero gradients or zero learning rate") {
    Rng rng(2);
    const Mat p0 = test::random_mat(rng, 3, 4);

    optim::OptimizerState st;
    st.first_moment = Mat::Zero(3, 4);
    st.second_moment = Mat::Constant(3, 4, 0.3);
    st.step_count = 7;
    Mat p = p0;
    optim::adam_step(p, Mat::Zero(3, 4), st, optim::AdamConfig{});
    CHECK(p == p0);
    CHECK(st.step_count == 8);

    optim::AdamConfig lr0;
    lr0.lr = 0.0;
    lr0.weight_decay = 1e-2;
    optim::OptimizerState fresh;
    Mat q = p0;
    for (int i = 0; i < 5; ++i) optim::adam_step(q, test::random_mat(rng, 3, 4), fresh, lr0);
    CHECK(q == p0);
    CHECK(fresh.first_moment.rows() == 3);
    CHECK(fresh.second_moment.cols() == 4);
    CHECK(fresh.step_count == 5);
}

TEST_CASE("Adam from a saved state is reproducible") {
    Rng rng(3);
    Mat p = test::random_mat(rng, 2, 2);
    optim::OptimizerState st;
    optim::AdamConfig cfg;
    cfg.weight_decay = 1e-2;
    optim::adam_step(p, test::random_mat(rng, 2, 2), st, cfg);
    const Mat g = test::random_mat(rng, 2, 2);
    Mat p1 = p, p2 = p;
    optim::OptimizerState s1 = st, s2 = st;
    optim::adam_step(p1, g, s1, cfg);
    optim::adam_step(p2, g, s2, cfg);
    CHECK(p1 == p2);
    CHECK(s1.first_moment == s2.first_moment);
    CHECK(s1.second_moment == s2.second_moment);
}

TEST_CASE("finite differences are exact for a quadratic") {
    const double err = finite_diff_check([](const Var& x) { return sum(mul(x, x)); }, Mat::Constant(1, 1, 3.0), 1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("gated fusion gradient agrees with finite differences") {
    Rng rng(4);
    std::vector<Var> params{parameter(test::random_mat(rng, 1, 32)), parameter(test::random_mat(rng, 1, 32)),
                            parameter(test::random_mat(rng, 1, 32, 0.05, 0.95))};
    const Var w = constant(test::random_mat(rng, 1, 32));
    const double err = finite_diff_check(
        [&] { return sum(mul(hmmm::gated_fuse(params[0], params[1], params[2]), w)); },
        params, 1e-6);
    CHECK(err < 1e-4);
}

TEST_CASE("every differentiable op matches central differences at random points") {
    using Unary = std::function<Var(const Var&)>;
    Rng rng(5);
    const Mat row = test::random_mat(rng, 1, 4);
    const Mat col = test::random_mat(rng, 3, 1);
    const Mat rhs = test::random_mat(rng, 4, 2);
    const Mat other = test::random_mat(rng, 3, 4);
    const std::vector<std::pair<std::string, Unary>> ops = {
        {"add", [&](const Var& x) { return add(x, constant(other)); }},
        {"sub", [&](const Var& x) { return sub(constant(other), x); }},
        {"mul", [&](const Var& x) { return mul(x, x); }},
        {"scale", [](const Var& x) { return scale(x, -2.5); }},
        {"add_scalar", [](const Var& x) { return add_scalar(x, 0.7); }},
        {"neg", [](const Var& x) { return neg(x); }},
        {"abs", [](const Var& x) { return abs(x); }},
        {"exp", [](const Var& x) { return exp(x); }},
        {"relu", [](const Var& x) { return relu(x); }},
        {"leaky_relu", [](const Var& x) { return leaky_relu(x, 0.1); }},
        {"sigmoid", [](const Var& x) { return sigmoid(x); }},
        {"add_row", [&](const Var& x) { return add_row(x, slice_rows(x, 1, 1)); }},
        {"mul_row", [&](const Var& x) { return mul_row(x, slice_rows(x, 2, 1)); }},
        {"mul_col", [&](const Var& x) { return mul_col(x, slice_cols(x, 0, 1)); }},
        {"broadcast_rows", [](const Var& x) { return broadcast_rows(slice_rows(x, 0, 1), 5); }},
        {"matmul", [&](const Var& x) { return matmul(x, constant(rhs)); }},
        {"matmul_self", [](const Var& x) { return matmul(x, transpose(x)); }},
        {"transpose", [](const Var& x) { return transpose(x); }},
        {"mean", [](const Var& x) { return mean(x); }},
        {"softmax", [](const Var& x) { return softmax(slice_rows(x, 0, 1)); }},
        {"concat_cols", [](const Var& x) { return concat_cols({x, scale(x, 2.0)}); }},
        {"slice_cols", [](const Var& x) { return slice_cols(x, 1, 2); }},
        {"shift_rows", [](const Var& x) { return shift_rows(x, 1); }},
        {"shift_rows_neg", [](const Var& x) { return shift_rows(x, -2); }},
        {"normalize_rows", [](const Var& x) { return normalize_rows(x); }},
        {"mul_col_const", [&](const Var& x) { return mul_col(x, constant(col)); }},
        {"mul_row_const", [&](const Var& x) { return mul_row(x, constant(row)); }},
    };
    for (const auto& [name, op] : ops) {
        for (int trial = 0; trial < 10; ++trial) {
            const Mat x = away_from_zero(rng, 3, 4);
            Rng wr(100 + trial);
            const Mat probe = op(constant(x)).value();
            const Mat w = test::random_mat(wr, probe.rows(), probe.cols());
            const double err = finite_diff_check([&](const Var& v) { return sum(mul(op(v), constant(w))); }, x, 1e-6);
            INFO(name << " trial " << trial);
            CHECK(err < 1e-4);
        }
    }
}

TEST_CASE("backward is bitwise deterministic") {
    auto run = [] {
        Rng rng(6);
        Var a = parameter(test::random_mat(rng, 5, 4));
        Var b = parameter(test::random_mat(rng, 4, 3));
        Var h = sigmoid(matmul(a, b));
        Var loss = mean(mul(h, concat_cols({slice_cols(h, 1, 2), slice_cols(h, 0, 1)})));
        backward(loss);
        return std::make_pair(Mat(a.grad()), Mat(b.grad()));
    };
    const auto r1 = run();
    const auto r2 = run();
    CHECK(r1.first == r2.first);
    CHECK(r1.second == r2.second);
}

TEST_CASE("constants never receive gradients") {
    Var c = constant(Mat::Ones(2, 2));
    Var p = parameter(Mat::Ones(2, 2));
    const auto leaves = backward(sum(mul(c, p)));
    REQUIRE(leaves.size() == 1);
    CHECK(leaves[0].node() == p.node());
    CHECK_FALSE(c.requires_grad());
}
