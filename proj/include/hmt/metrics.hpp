#pragma once

#include "hmt/losses.hpp"

#include <utility>

namespace hmt {

inline constexpr double kPsnrCap = 99.0;

double mse(const Mat& pred, const Mat& gt);
// 10 log10(1 / MSE); kPsnrCap when the images are identical.
double psnr(const Mat& pred, const Mat& gt);
double ssim(const Mat& pred, const Mat& gt, ImageSize size);
double perceptual_distance(const Mat& pred, const Mat& gt, ImageSize size);

struct AuError {
    double lower = 0;
    double upper = 0;
};

// Both T x 17 in ascending AU id order.
AuError aue(const Mat& pred, const Mat& gt);

// Landmarks as T x 2K rows (x0, y0, x1, y1, ...), in pixels.
double lmd(const Mat& pred, const Mat& gt);

}  // namespace hmt
