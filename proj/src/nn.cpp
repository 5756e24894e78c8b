#include "hmt/nn.hpp"

#include "hmt/error.hpp"

#include <cmath>

namespace hmt::nn {

Linear::Linear(int in, int out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Mat w(in, out);
    Mat b(1, out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform(-bound, bound);
    weight = ad::parameter(std::move(w));
    bias = ad::parameter(std::move(b));
}

Linear Linear::zeros(int in, int out) {
    Linear l;
    l.weight = ad::parameter(Mat::Zero(in, out));
    l.bias = ad::parameter(Mat::Zero(1, out));
    return l;
}

ad::Var Linear::operator()(const ad::Var& x) const {
    return ad::add_row(ad::matmul(x, weight), bias);
}

ad::Var activate(const ad::Var& x, Activation act, double leaky_slope) {
    switch (act) {
        case Activation::identity: return x;
        case Activation::relu: return ad::relu(x);
        case Activation::leaky_relu: return ad::leaky_relu(x, leaky_slope);
        case Activation::sigmoid: return ad::sigmoid(x);
    }
    return x;
}

Mlp::Mlp(const std::vector<int>& widths, Activation hidden_act, Activation output_act, Rng& rng,
         bool zero_last)
    : hidden(hidden_act), output(output_act) {
    if (widths.size() < 2) throw ContractError("Mlp: need at least input and output widths");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const bool last = i + 2 == widths.size();
        layers.push_back(last && zero_last ? Linear::zeros(widths[i], widths[i + 1])
                                           : Linear(widths[i], widths[i + 1], rng));
    }
}

ad::Var Mlp::operator()(const ad::Var& x) const {
    ad::Var h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = layers[i](h);
        h = activate(h, i + 1 == layers.size() ? output : hidden, leaky_slope);
    }
    return h;
}

void collect(ParamList& out, const std::string& prefix, const Linear& l) {
    out.push_back({prefix + ".weight", l.weight});
    out.push_back({prefix + ".bias", l.bias});
}

void collect(ParamList& out, const std::string& prefix, const Mlp& m) {
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        collect(out, prefix + "." + std::to_string(i), m.layers[i]);
    }
}

}  // namespace hmt::nn
