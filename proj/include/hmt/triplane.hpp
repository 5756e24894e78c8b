#pragma once

#include "hmt/autodiff.hpp"
#include "hmt/rng.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace hmt {

struct TriPlaneConfig {
    int levels = 8;
    int features = 2;
    int log2_table_size = 14;
    int min_resolution = 16;
    int max_resolution = 256;

    std::uint32_t table_size() const { return std::uint32_t{1} << log2_table_size; }
    int output_dim() const { return 3 * levels * features; }
};

// Three axis-aligned 2D multiresolution hash grids (XY, YZ, XZ). Each level
// stores a T x F table; all tables live in a single trainable parameter of
// shape (3 * L * T) x F.
class TriPlaneHash {
public:
    explicit TriPlaneHash(TriPlaneConfig cfg = {});

    // Uniform in [-scale, scale].
    void init_uniform(Rng& rng, double scale = 1e-4);

    const TriPlaneConfig& config() const { return cfg_; }
    int resolution(int level) const { return resolutions_.at(static_cast<std::size_t>(level)); }
    bool is_dense(int level) const;

    // Index of vertex (ix, iy) inside one level's table.
    std::uint32_t hash_index(std::uint32_t ix, std::uint32_t iy, int level) const;

    // Row offset of the (plane, level) table inside the parameter.
    Eigen::Index table_offset(int plane, int level) const;

    // positions: N x 3 in [-1, 1]^3 (clamped). Returns N x (3 L F), ordered
    // plane-major, then level, then feature.
    ad::Var encode(const ad::Var& positions) const;

    ad::Var& tables() { return tables_; }
    const ad::Var& tables() const { return tables_; }

private:
    TriPlaneConfig cfg_;
    std::vector<int> resolutions_;
    ad::Var tables_;
};

}  // namespace hmt
