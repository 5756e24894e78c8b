#include "hmt/optim.hpp"

#include "hmt/error.hpp"

#include <cmath>

namespace hmt::optim {

void adam_step(Mat& param, const Mat& grad, OptimizerState& state, const AdamConfig& cfg) {
    if (grad.rows() != param.rows() || grad.cols() != param.cols()) {
        throw ContractError("adam_step: gradient shape " + shape_str(grad) +
                            " does not match parameter " + shape_str(param));
    }
    if (state.first_moment.size() == 0) {
        state.first_moment = Mat::Zero(param.rows(), param.cols());
        state.second_moment = Mat::Zero(param.rows(), param.cols());
    } else if (state.first_moment.rows() != param.rows() ||
               state.first_moment.cols() != param.cols()) {
        throw ContractError("adam_step: optimizer state shape does not match parameter");
    }

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);

    if (cfg.weight_decay != 0.0) param *= (1.0 - cfg.lr * cfg.weight_decay);

    auto m = state.first_moment.array();
    auto v = state.second_moment.array();
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad.array();
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.array().square();
    param.array() -= cfg.lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
}

void Adam::add(std::string name, ad::Var param) {
    if (!param.requires_grad()) {
        throw ContractError("Adam::add: '" + name + "' is not a trainable parameter");
    }
    entries_.push_back({std::move(name), std::move(param), {}});
}

void Adam::step() {
    for (auto& e : entries_) adam_step(e.param.mutable_value(), e.param.grad(), e.state, cfg_);
}

void Adam::zero_grad() {
    for (auto& e : entries_) e.param.zero_grad();
}

}  // namespace hmt::optim
