#pragma once

#include "hmt/autodiff.hpp"
#include "hmt/camera.hpp"
#include "hmt/gaussian_field.hpp"

#include <string_view>

namespace hmt {

struct RenderOptions {
    int threads = 1;
    // Per-pixel compositing stops once transmittance falls below this value.
    double min_transmittance = 1e-4;
    int tile_size = 16;
};

struct RenderStats {
    int culled = 0;   // behind the near plane
    int skipped = 0;  // non-invertible or non-finite 2-d covariance
    int drawn = 0;    // touched at least one pixel box
};

// Images are stored pixel-major: row y * width + x.
struct RenderOutput {
    ad::Var color;  // (H W) x 3, unclamped
    ad::Var alpha;  // (H W) x 1
    int width = 0;
    int height = 0;
    RenderStats stats;
};

// Differentiable w.r.t. every Var in the view.
RenderOutput render(const FieldView& view, const Camera& camera, const RenderOptions& opts = {});

enum class BlendMode { as_written, face_complement };

std::string_view to_string(BlendMode m);
BlendMode parse_blend_mode(std::string_view s);

struct BlendOutput {
    ad::Var image;  // (H W) x 3
    BlendMode mode = BlendMode::as_written;
};

// as_written:      C_face A_face + C_mouth (1 - A_mouth)
// face_complement: C_face A_face + C_mouth (1 - A_face)
BlendOutput blend_head(const ad::Var& c_face, const ad::Var& a_face, const ad::Var& c_mouth,
                       const ad::Var& a_mouth, BlendMode mode = BlendMode::as_written);

// Clamps to [0, 1] for display or 8-bit output.
Mat clamp_display(const Mat& image);

}  // namespace hmt
