#pragma once

#include "hmt/autodiff.hpp"

#include <functional>
#include <span>

namespace hmt::ad {

// Max over coordinates of |g_analytic - g_fd| / max(1, |g_fd|) for a scalar
// function of one array, using central differences with step `eps`.
double finite_diff_check(const std::function<Var(const Var&)>& f, const Mat& x, double eps);

// Same measure over every entry of several existing parameters. `f` must
// rebuild its graph from the current parameter values on each call; the
// parameters are restored before returning.
double finite_diff_check(const std::function<Var()>& f, std::span<Var> params, double eps);

}  // namespace hmt::ad
