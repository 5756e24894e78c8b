#pragma once

#include "hmt/autodiff.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hmt::optim {

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    // Decoupled decay; zero gives plain Adam.
    double weight_decay = 0.0;
};

struct OptimizerState {
    Mat first_moment;
    Mat second_moment;
    std::int64_t step_count = 0;
};

// One bias-corrected Adam(W) update on a raw array. Exposed separately from
// the optimizer class so the update rule can be exercised in isolation.
void adam_step(Mat& param, const Mat& grad, OptimizerState& state, const AdamConfig& cfg);

// Holds a set of named parameters sharing one configuration.
class Adam {
public:
    struct Entry {
        std::string name;
        ad::Var param;
        OptimizerState state;
    };

    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void add(std::string name, ad::Var param);
    void step();
    void zero_grad();

    AdamConfig& config() { return cfg_; }
    const AdamConfig& config() const { return cfg_; }
    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

private:
    AdamConfig cfg_;
    std::vector<Entry> entries_;
};

}  // namespace hmt::optim
