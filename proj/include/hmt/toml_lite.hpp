#pragma once

// Parser for the TOML subset used by run configs: [table] and [a.b] headers,
// bare keys, basic strings, integers, floats, booleans and single-line
// arrays. Keys are returned flattened ("train.motion_iters").

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hmt::toml {

struct Value {
    using Array = std::vector<Value>;
    std::variant<bool, std::int64_t, double, std::string, Array> data;

    bool is_number() const { return std::holds_alternative<std::int64_t>(data) || std::holds_alternative<double>(data); }
    double as_double(std::string_view key) const;
    std::int64_t as_int(std::string_view key) const;
    bool as_bool(std::string_view key) const;
    const std::string& as_string(std::string_view key) const;
    const Array& as_array(std::string_view key) const;
};

using Table = std::map<std::string, Value, std::less<>>;

// Throws ConfigError with the offending line number.
Table parse(std::string_view text, const std::string& origin = "<config>");
Table parse_file(const std::filesystem::path& path);

std::string quote(std::string_view s);

}  // namespace hmt::toml
