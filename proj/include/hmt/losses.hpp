#pragma once

#include "hmt/autodiff.hpp"

namespace hmt {

// Image layout for every loss and metric: (H W) x 3, row y * width + x.
struct ImageSize {
    int width = 0;
    int height = 0;

    Eigen::Index pixels() const { return static_cast<Eigen::Index>(width) * height; }
};

struct LossWeights {
    double lambda1 = 0.2;   // D-SSIM
    double lambda2 = 0.5;   // gradient proxy for the perceptual term
    double lambda3 = 1e-3;  // feature alignment

    void validate() const;
};

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

ad::Var l1_loss(const ad::Var& pred, const Mat& gt);

// clamp(1 - SSIM, 0, 1), SSIM averaged over channels and valid window
// positions. Images smaller than the window use the largest odd window that
// fits, with renormalized weights.
ad::Var d_ssim(const ad::Var& pred, const Mat& gt, ImageSize size);

// Mean of four L1 terms between forward-difference images: horizontal and
// vertical, at full resolution and after 2x2 box downsampling.
ad::Var perceptual_proxy(const ad::Var& pred, const Mat& gt, ImageSize size);

struct LossTerms {
    ad::Var total;
    double l1 = 0;
    double d_ssim = 0;
    double perceptual = 0;
    double align = 0;
};

// L1 + lambda1 D-SSIM + lambda2 proxy + lambda3 align. The alignment term is
// dropped when either feature is undefined.
LossTerms total_loss(const ad::Var& pred, const Mat& gt, ImageSize size, const ad::Var& c_e_al,
                     const ad::Var& c_e_vl, const LossWeights& weights = {});

}  // namespace hmt

namespace hmt::detail {

// Mean SSIM of one channel pair; fills d_pred with dSSIM/dpred when non-null.
double ssim_channel(const Eigen::ArrayXXd& pred, const Eigen::ArrayXXd& gt, Eigen::ArrayXXd* d_pred);

Eigen::ArrayXXd channel_plane(const Mat& image, ImageSize size, int channel);

}  // namespace hmt::detail
