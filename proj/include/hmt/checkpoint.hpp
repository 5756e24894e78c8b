#pragma once

// Checkpoint files: "HMCK", u16 version, u64 config hash, u8 stage,
// u64 iteration, u32-length RNG state, u32 tensor count, then per tensor a
// u16-length name, u64 rows, u64 cols and little-endian 64-bit floats.

#include "hmt/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hmt {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
    std::uint64_t config_hash = 0;
    int stage = 0;
    std::int64_t iteration = 0;
    std::string rng_state;
    std::vector<std::pair<std::string, Mat>> tensors;

    const Mat* find(std::string_view name) const;
    bool operator==(const Checkpoint& o) const;
};

std::string encode_checkpoint(const Checkpoint& c);
// Throws DataError on bad magic, version or truncation; nothing is returned
// unless the whole file parsed.
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& origin = "<memory>");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hmt
