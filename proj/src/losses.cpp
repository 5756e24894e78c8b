#include "hmt/losses.hpp"

#include "hmt/error.hpp"

#include <array>
#include <cmath>
#include <string>

namespace hmt {

namespace detail {

namespace {

using Plane = Eigen::ArrayXXd;

// Gaussian weights of the largest odd width up to kSsimWindow that fits the
// image, renormalized.
Eigen::VectorXd gaussian_window(Eigen::Index rows, Eigen::Index cols) {
    int k = static_cast<int>(std::min<Eigen::Index>({rows, cols, kSsimWindow}));
    if (k % 2 == 0) --k;
    Eigen::VectorXd w(k);
    const int half = k / 2;
    for (int i = 0; i < k; ++i) {
        const double d = i - half;
        w(i) = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    }
    return w / w.sum();
}

Plane filter_valid(const Plane& x, const Eigen::VectorXd& g) {
    const int k = static_cast<int>(g.size());
    const Eigen::Index h = x.rows() - k + 1, w = x.cols() - k + 1;
    Plane tmp = Plane::Zero(x.rows(), w);
    for (int j = 0; j < k; ++j) tmp += g(j) * x.middleCols(j, w);
    Plane out = Plane::Zero(h, w);
    for (int j = 0; j < k; ++j) out += g(j) * tmp.middleRows(j, h);
    return out;
}

Plane filter_adjoint(const Plane& gout, const Eigen::VectorXd& g, Eigen::Index rows, Eigen::Index cols) {
    const int k = static_cast<int>(g.size());
    const Eigen::Index h = gout.rows(), w = gout.cols();
    Plane tmp = Plane::Zero(rows, w);
    for (int j = 0; j < k; ++j) tmp.middleRows(j, h) += g(j) * gout;
    Plane out = Plane::Zero(rows, cols);
    for (int j = 0; j < k; ++j) out.middleCols(j, w) += g(j) * tmp;
    return out;
}

}  // namespace

Plane channel_plane(const Mat& image, ImageSize size, int channel) {
    Plane p(size.height, size.width);
    for (int y = 0; y < size.height; ++y) {
        for (int x = 0; x < size.width; ++x) p(y, x) = image(static_cast<Eigen::Index>(y) * size.width + x, channel);
    }
    return p;
}

double ssim_channel(const Plane& x, const Plane& y, Plane* d_pred) {
    const Eigen::VectorXd g = gaussian_window(x.rows(), x.cols());
    const Plane mx = filter_valid(x, g);
    const Plane my = filter_valid(y, g);
    const Plane exx = filter_valid(x * x, g);
    const Plane eyy = filter_valid(y * y, g);
    const Plane exy = filter_valid(x * y, g);
    const Plane a1 = 2.0 * mx * my + kSsimC1;
    const Plane a2 = 2.0 * (exy - mx * my) + kSsimC2;
    const Plane b1 = mx * mx + my * my + kSsimC1;
    const Plane b2 = (exx - mx * mx) + (eyy - my * my) + kSsimC2;
    const Plane map = (a1 * a2) / (b1 * b2);
    const double count = static_cast<double>(map.size());
    if (d_pred) {
        const Plane g_mx = map * (2.0 * my / a1 - 2.0 * my / a2 - 2.0 * mx / b1 + 2.0 * mx / b2) / count;
        const Plane g_exy = map * 2.0 / a2 / count;
        const Plane g_exx = -map / b2 / count;
        *d_pred = filter_adjoint(g_mx, g, x.rows(), x.cols()) + y * filter_adjoint(g_exy, g, x.rows(), x.cols()) +
                  2.0 * x * filter_adjoint(g_exx, g, x.rows(), x.cols());
    }
    return map.sum() / count;
}

}  // namespace detail

namespace {

using Plane = Eigen::ArrayXXd;

void require_image(const ad::Var& pred, const Mat& gt, ImageSize size, const char* what) {
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
        throw ContractError(std::string(what) + ": prediction " + shape_str(pred.value()) +
                            " vs target " + shape_str(gt));
    }
    if (size.width <= 0 || size.height <= 0 || pred.rows() != size.pixels() || pred.cols() != 3) {
        throw ContractError(std::string(what) + ": image does not match its declared size");
    }
}

void scatter_plane(Mat& image, const Plane& p, ImageSize size, int channel) {
    for (int y = 0; y < size.height; ++y) {
        for (int x = 0; x < size.width; ++x) image(static_cast<Eigen::Index>(y) * size.width + x, channel) += p(y, x);
    }
}

Plane downsample(const Plane& p) {
    const Eigen::Index h = p.rows() / 2, w = p.cols() / 2;
    Plane out(h, w);
    for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
            out(y, x) = 0.25 * (p(2 * y, 2 * x) + p(2 * y, 2 * x + 1) + p(2 * y + 1, 2 * x) + p(2 * y + 1, 2 * x + 1));
        }
    }
    return out;
}

Plane downsample_adjoint(const Plane& g, Eigen::Index rows, Eigen::Index cols) {
    Plane out = Plane::Zero(rows, cols);
    for (Eigen::Index y = 0; y < g.rows(); ++y) {
        for (Eigen::Index x = 0; x < g.cols(); ++x) {
            const double v = 0.25 * g(y, x);
            out(2 * y, 2 * x) += v;
            out(2 * y, 2 * x + 1) += v;
            out(2 * y + 1, 2 * x) += v;
            out(2 * y + 1, 2 * x + 1) += v;
        }
    }
    return out;
}

Plane sign(const Plane& p) {
    return p.unaryExpr([](double v) { return double((v > 0) - (v < 0)); });
}

// Accumulates the four difference terms of one channel of the residual.
// Adds sum |diff| / count per term into `sums` and, when grad is non-null,
// d/dresidual of sum_t weight_t * term_t.
struct ProxyTerms {
    std::array<double, 4> sum{};
    std::array<double, 4> count{};
};

void proxy_channel(const Plane& r, ProxyTerms& terms, const std::array<double, 4>* weights, Plane* grad) {
    const Plane half = downsample(r);
    const Plane* scales[2] = {&r, &half};
    Plane g_half;
    if (grad) {
        *grad = Plane::Zero(r.rows(), r.cols());
        g_half = Plane::Zero(half.rows(), half.cols());
    }
    for (int s = 0; s < 2; ++s) {
        const Plane& p = *scales[s];
        Plane* g = grad ? (s == 0 ? grad : &g_half) : nullptr;
        if (p.cols() >= 2) {
            const Plane d = p.rightCols(p.cols() - 1) - p.leftCols(p.cols() - 1);
            terms.sum[2 * s] += d.abs().sum();
            terms.count[2 * s] += static_cast<double>(d.size());
            if (g) {
                const Plane gd = (*weights)[2 * s] * sign(d);
                g->rightCols(p.cols() - 1) += gd;
                g->leftCols(p.cols() - 1) -= gd;
            }
        }
        if (p.rows() >= 2) {
            const Plane d = p.bottomRows(p.rows() - 1) - p.topRows(p.rows() - 1);
            terms.sum[2 * s + 1] += d.abs().sum();
            terms.count[2 * s + 1] += static_cast<double>(d.size());
            if (g) {
                const Plane gd = (*weights)[2 * s + 1] * sign(d);
                g->bottomRows(p.rows() - 1) += gd;
                g->topRows(p.rows() - 1) -= gd;
            }
        }
    }
    if (grad && half.size() > 0) *grad += downsample_adjoint(g_half, r.rows(), r.cols());
}

double proxy_value(const ProxyTerms& t, std::array<double, 4>* weights) {
    int active = 0;
    for (double c : t.count) active += c > 0;
    double v = 0.0;
    for (int k = 0; k < 4; ++k) {
        if (t.count[k] > 0) {
            v += t.sum[k] / t.count[k] / active;
            if (weights) (*weights)[k] = 1.0 / (t.count[k] * active);
        } else if (weights) {
            (*weights)[k] = 0.0;
        }
    }
    return v;
}

}  // namespace

void LossWeights::validate() const {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !(lambda3 >= 0.0)) {
        throw ConfigError("loss weights must be non-negative");
    }
}

ad::Var l1_loss(const ad::Var& pred, const Mat& gt) {
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
        throw ContractError("l1_loss: shape mismatch " + shape_str(pred.value()) + " vs " + shape_str(gt));
    }
    return ad::mean(ad::abs(pred - ad::constant(gt)));
}

ad::Var d_ssim(const ad::Var& pred, const Mat& gt, ImageSize size) {
    require_image(pred, gt, size, "d_ssim");
    double s = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        s += detail::ssim_channel(detail::channel_plane(pred.value(), size, ch),
                                  detail::channel_plane(gt, size, ch), nullptr);
    }
    s /= 3.0;
    const double raw = 1.0 - s;
    Mat value(1, 1);
    value(0, 0) = std::clamp(raw, 0.0, 1.0);
    const bool inside = raw >= 0.0 && raw <= 1.0;
    return ad::make_op(std::move(value), {pred}, [gt, size, inside](ad::Node& n) {
        if (!inside) return;
        ad::Node& p = *n.parents[0];
        Mat& g = p.ensure_grad();
        const double scale = -n.grad(0, 0) / 3.0;
        for (int ch = 0; ch < 3; ++ch) {
            Plane d;
            detail::ssim_channel(detail::channel_plane(p.value, size, ch), detail::channel_plane(gt, size, ch), &d);
            scatter_plane(g, scale * d, size, ch);
        }
    });
}

ad::Var perceptual_proxy(const ad::Var& pred, const Mat& gt, ImageSize size) {
    require_image(pred, gt, size, "perceptual_proxy");
    const Mat residual = pred.value() - gt;
    ProxyTerms terms;
    for (int ch = 0; ch < 3; ++ch) proxy_channel(detail::channel_plane(residual, size, ch), terms, nullptr, nullptr);
    std::array<double, 4> weights{};
    Mat value(1, 1);
    value(0, 0) = proxy_value(terms, &weights);
    return ad::make_op(std::move(value), {pred}, [residual, size, weights](ad::Node& n) {
        Mat& g = n.parents[0]->ensure_grad();
        const std::array<double, 4> w = {weights[0] * n.grad(0, 0), weights[1] * n.grad(0, 0),
                                         weights[2] * n.grad(0, 0), weights[3] * n.grad(0, 0)};
        for (int ch = 0; ch < 3; ++ch) {
            ProxyTerms scratch;
            Plane d;
            proxy_channel(detail::channel_plane(residual, size, ch), scratch, &w, &d);
            scatter_plane(g, d, size, ch);
        }
    });
}

LossTerms total_loss(const ad::Var& pred, const Mat& gt, ImageSize size, const ad::Var& c_e_al,
                     const ad::Var& c_e_vl, const LossWeights& weights) {
    weights.validate();
    require_image(pred, gt, size, "total_loss");
    LossTerms t;
    const ad::Var l1 = l1_loss(pred, gt);
    const ad::Var ds = d_ssim(pred, gt, size);
    const ad::Var pp = perceptual_proxy(pred, gt, size);
    t.l1 = l1.item();
    t.d_ssim = ds.item();
    t.perceptual = pp.item();
    t.total = l1 + weights.lambda1 * ds + weights.lambda2 * pp;
    if (c_e_al.defined() && c_e_vl.defined()) {
        if (c_e_al.rows() != c_e_vl.rows() || c_e_al.cols() != c_e_vl.cols()) {
            throw ContractError("total_loss: alignment features differ in shape");
        }
        const ad::Var al = ad::mean(ad::abs(c_e_al - c_e_vl));
        t.align = al.item();
        t.total = t.total + weights.lambda3 * al;
    }
    return t;
}

}  // namespace hmt
