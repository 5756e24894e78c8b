#pragma once

#include "hmt/autodiff.hpp"
#include "hmt/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace hmt::nn {

// y = x W + b, with x: n x in, W: in x out, b: 1 x out.
struct Linear {
    ad::Var weight;
    ad::Var bias;

    Linear() = default;
    Linear(int in, int out, Rng& rng);
    static Linear zeros(int in, int out);

    int in_features() const { return static_cast<int>(weight.rows()); }
    int out_features() const { return static_cast<int>(weight.cols()); }
    ad::Var operator()(const ad::Var& x) const;
};

enum class Activation { identity, relu, leaky_relu, sigmoid };

ad::Var activate(const ad::Var& x, Activation act, double leaky_slope = 0.02);

// Stack of Linear layers; `hidden` after every layer but the last, `output`
// after the last.
struct Mlp {
    std::vector<Linear> layers;
    Activation hidden = Activation::relu;
    Activation output = Activation::identity;
    double leaky_slope = 0.02;

    Mlp() = default;
    Mlp(const std::vector<int>& widths, Activation hidden, Activation output, Rng& rng,
        bool zero_last = false);

    ad::Var operator()(const ad::Var& x) const;
};

// Flat (name, parameter) list for optimizers and checkpoints.
struct NamedParam {
    std::string name;
    ad::Var param;
};
using ParamList = std::vector<NamedParam>;

void collect(ParamList& out, const std::string& prefix, const Linear& l);
void collect(ParamList& out, const std::string& prefix, const Mlp& m);

}  // namespace hmt::nn
