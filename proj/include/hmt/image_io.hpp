#pragma once

#include "hmt/losses.hpp"

#include <filesystem>

namespace hmt::io {

// 8-bit RGB PNG. Values are clamped to [0, 1] and rounded.
void write_png(const std::filesystem::path& path, const Mat& image, ImageSize size);
Mat read_png(const std::filesystem::path& path, ImageSize* size = nullptr);

}  // namespace hmt::io
