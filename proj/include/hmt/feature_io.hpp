#pragma once

// HMTK tensor files: "HMTK", u16 version, u8 rank, rank x u64 dims, then the
// row-major payload as little-endian 64-bit floats.

#include "hmt/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hmt::io {

inline constexpr std::uint16_t kHmtkVersion = 1;

struct Tensor {
    std::vector<std::uint64_t> dims;
    std::vector<double> data;

    std::uint64_t count() const;
};

std::string encode_hmtk(const Tensor& t);
// Throws DataError on a bad magic, unknown version or truncated payload.
Tensor decode_hmtk(std::string_view bytes, const std::string& origin = "<memory>");

void write_hmtk(const std::filesystem::path& path, const Tensor& t);
Tensor read_hmtk(const std::filesystem::path& path);

// dims default to {rows, cols}; their product must equal the matrix size.
Tensor from_mat(const Mat& m, std::vector<std::uint64_t> dims = {});
Mat to_mat(const Tensor& t, Eigen::Index rows, Eigen::Index cols);

void write_matrix(const std::filesystem::path& path, const Mat& m, std::vector<std::uint64_t> dims = {});
// Reads any rank; the result has dims[0] rows and the remaining dims flattened.
Mat read_matrix(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace hmt::io
