#include "hmt/metrics.hpp"

#include "hmt/cmdm.hpp"
#include "hmt/error.hpp"

#include <cmath>

namespace hmt {

namespace {

void require_same(const Mat& a, const Mat& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ContractError(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
}

}  // namespace

double mse(const Mat& pred, const Mat& gt) {
    require_same(pred, gt, "mse");
    if (pred.size() == 0) return 0.0;
    return (pred - gt).squaredNorm() / static_cast<double>(pred.size());
}

double psnr(const Mat& pred, const Mat& gt) {
    const double m = mse(pred, gt);
    if (m == 0.0) return kPsnrCap;
    return 10.0 * std::log10(1.0 / m);
}

double ssim(const Mat& pred, const Mat& gt, ImageSize size) {
    require_same(pred, gt, "ssim");
    if (pred.rows() != size.pixels() || pred.cols() != 3) throw ContractError("ssim: image does not match its size");
    double s = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        s += detail::ssim_channel(detail::channel_plane(pred, size, ch), detail::channel_plane(gt, size, ch), nullptr);
    }
    return s / 3.0;
}

double perceptual_distance(const Mat& pred, const Mat& gt, ImageSize size) {
    return perceptual_proxy(ad::constant(pred), gt, size).item();
}

AuError aue(const Mat& pred, const Mat& gt) {
    if (pred.rows() != gt.rows()) throw ContractError("aue: trajectory lengths differ");
    if (pred.cols() != cmdm::kAuCount || gt.cols() != cmdm::kAuCount) {
        throw ContractError("aue: expected 17 AU columns");
    }
    AuError e;
    if (pred.rows() == 0) return e;
    for (int id : cmdm::kLowerIds) {
        const int c = cmdm::au_slot(id);
        e.lower += (pred.col(c) - gt.col(c)).cwiseAbs().sum();
    }
    for (int id : cmdm::kUpperIds) {
        const int c = cmdm::au_slot(id);
        e.upper += (pred.col(c) - gt.col(c)).cwiseAbs().sum();
    }
    const double t = static_cast<double>(pred.rows());
    e.lower /= t * static_cast<double>(cmdm::kLowerIds.size());
    e.upper /= t * static_cast<double>(cmdm::kUpperIds.size());
    return e;
}

double lmd(const Mat& pred, const Mat& gt) {
    require_same(pred, gt, "lmd");
    if (pred.cols() % 2 != 0) throw ContractError("lmd: landmark rows must hold (x, y) pairs");
    const Eigen::Index k = pred.cols() / 2;
    if (pred.rows() == 0 || k == 0) return 0.0;
    double total = 0.0;
    for (Eigen::Index t = 0; t < pred.rows(); ++t) {
        for (Eigen::Index j = 0; j < k; ++j) {
            const double dx = pred(t, 2 * j) - gt(t, 2 * j);
            const double dy = pred(t, 2 * j + 1) - gt(t, 2 * j + 1);
            total += std::sqrt(dx * dx + dy * dy);
        }
    }
    return total / static_cast<double>(pred.rows() * k);
}

}  // namespace hmt
