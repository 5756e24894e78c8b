#include "hmt/image_io.hpp"

#include "hmt/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace hmt::io {

void write_png(const std::filesystem::path& path, const Mat& image, ImageSize size) {
    if (image.rows() != size.pixels() || image.cols() != 3) {
        throw ContractError("write_png: image " + shape_str(image) + " does not match its size");
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::vector<unsigned char> bytes(static_cast<std::size_t>(image.size()));
    for (Eigen::Index i = 0; i < image.size(); ++i) {
        const double v = std::clamp(image.data()[i], 0.0, 1.0);
        bytes[static_cast<std::size_t>(i)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(size.width);
    png.height = static_cast<png_uint_32>(size.height);
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
        throw DataError("cannot write " + path.string() + ": " + png.message);
    }
}

Mat read_png(const std::filesystem::path& path, ImageSize* size) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
        throw DataError("cannot read " + path.string() + ": " + png.message);
    }
    png.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> bytes(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr)) {
        throw DataError("cannot decode " + path.string() + ": " + png.message);
    }
    Mat image(static_cast<Eigen::Index>(png.width) * png.height, 3);
    for (Eigen::Index i = 0; i < image.size(); ++i) image.data()[i] = bytes[static_cast<std::size_t>(i)] / 255.0;
    if (size) *size = {static_cast<int>(png.width), static_cast<int>(png.height)};
    return image;
}

}  // namespace hmt::io
