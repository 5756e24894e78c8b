#include "hmt/gradcheck.hpp"

#include "hmt/error.hpp"

#include <algorithm>
#include <cmath>

namespace hmt::ad {

namespace {

double eval_scalar(const std::function<Var()>& f) {
    const double v = f().item();
    if (!std::isfinite(v)) throw NumericalError("finite_diff_check: non-finite function value");
    return v;
}

}  // namespace

double finite_diff_check(const std::function<Var()>& f, std::span<Var> params, double eps) {
    if (!(eps > 0)) throw ContractError("finite_diff_check: eps must be positive");
    for (auto& p : params) p.zero_grad();
    backward(f());
    std::vector<Mat> analytic;
    for (auto& p : params) analytic.push_back(p.grad());

    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Mat& x = params[k].mutable_value();
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            double& xi = x.data()[i];
            const double orig = xi;
            xi = orig + eps;
            const double fp = eval_scalar(f);
            xi = orig - eps;
            const double fm = eval_scalar(f);
            xi = orig;
            const double fd = (fp - fm) / (2.0 * eps);
            const double err = std::abs(analytic[k].data()[i] - fd) / std::max(1.0, std::abs(fd));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

double finite_diff_check(const std::function<Var(const Var&)>& f, const Mat& x, double eps) {
    Var p = parameter(x);
    Var params[] = {p};
    return finite_diff_check([&] { return f(p); }, params, eps);
}

}  // namespace hmt::ad
