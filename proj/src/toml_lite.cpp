#include "hmt/toml_lite.hpp"

#include "hmt/error.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace hmt::toml {

namespace {

class LineParser {
public:
    LineParser(std::string_view line, const std::string& where) : s_(line), where_(where) {}

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }
    bool at_end_or_comment() {
        skip_ws();
        return pos_ >= s_.size() || s_[pos_] == '#';
    }
    bool consume(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& what) const { throw ConfigError(where_ + ": " + what); }

    std::string key() {
        skip_ws();
        std::string out;
        while (true) {
            const std::size_t start = pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
                                        s_[pos_] == '-')) {
                ++pos_;
            }
            if (pos_ == start) fail("expected a key");
            out.append(s_.substr(start, pos_ - start));
            skip_ws();
            if (pos_ < s_.size() && s_[pos_] == '.') {
                ++pos_;
                out.push_back('.');
                skip_ws();
                continue;
            }
            return out;
        }
    }

    Value value() {
        skip_ws();
        if (pos_ >= s_.size()) fail("missing value");
        const char c = s_[pos_];
        if (c == '"') return Value{string()};
        if (c == '[') return array();
        if (s_.substr(pos_, 4) == "true") {
            pos_ += 4;
            return Value{true};
        }
        if (s_.substr(pos_, 5) == "false") {
            pos_ += 5;
            return Value{false};
        }
        return number();
    }

private:
    std::string string() {
        ++pos_;
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            char c = s_[pos_++];
            if (c == '\\') {
                if (pos_ >= s_.size()) fail("unterminated escape");
                const char e = s_[pos_++];
                switch (e) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    default: fail(std::string("unsupported escape \\") + e);
                }
            }
            out.push_back(c);
        }
        if (pos_ >= s_.size()) fail("unterminated string");
        ++pos_;
        return out;
    }

    Value array() {
        ++pos_;
        Value::Array items;
        if (consume(']')) return Value{items};
        while (true) {
            items.push_back(value());
            if (consume(',')) {
                if (consume(']')) break;
                continue;
            }
            if (consume(']')) break;
            fail("expected ',' or ']' in array");
        }
        return Value{std::move(items)};
    }

    Value number() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '+' ||
                                    s_[pos_] == '-' || s_[pos_] == '.' || s_[pos_] == '_')) {
            ++pos_;
        }
        std::string tok;
        for (char c : s_.substr(start, pos_ - start)) {
            if (c != '_') tok.push_back(c);
        }
        if (tok.empty()) fail("expected a value");
        const bool is_float = tok.find_first_of(".eE") != std::string::npos || tok == "inf" || tok == "+inf" ||
                              tok == "-inf" || tok == "nan";
        if (!is_float) {
            std::int64_t v = 0;
            const char* b = tok.data() + (tok[0] == '+' ? 1 : 0);
            const auto [p, ec] = std::from_chars(b, tok.data() + tok.size(), v);
            if (ec != std::errc() || p != tok.data() + tok.size()) fail("bad integer '" + tok + "'");
            return Value{v};
        }
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size()) fail("bad number '" + tok + "'");
        return Value{v};
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::string where_;
};

[[noreturn]] void type_error(std::string_view key, const char* want) {
    throw ConfigError("config key '" + std::string(key) + "' must be " + want);
}

}  // namespace

double Value::as_double(std::string_view key) const {
    if (const auto* i = std::get_if<std::int64_t>(&data)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&data)) return *d;
    type_error(key, "a number");
}

std::int64_t Value::as_int(std::string_view key) const {
    if (const auto* i = std::get_if<std::int64_t>(&data)) return *i;
    type_error(key, "an integer");
}

bool Value::as_bool(std::string_view key) const {
    if (const auto* b = std::get_if<bool>(&data)) return *b;
    type_error(key, "a boolean");
}

const std::string& Value::as_string(std::string_view key) const {
    if (const auto* s = std::get_if<std::string>(&data)) return *s;
    type_error(key, "a string");
}

const Value::Array& Value::as_array(std::string_view key) const {
    if (const auto* a = std::get_if<Array>(&data)) return *a;
    type_error(key, "an array");
}

Table parse(std::string_view text, const std::string& origin) {
    Table out;
    std::string prefix;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        LineParser p(line, origin + ":" + std::to_string(line_no));
        if (p.at_end_or_comment()) continue;
        if (p.consume('[')) {
            prefix = p.key();
            if (!p.consume(']')) p.fail("expected ']' after table name");
            if (!p.at_end_or_comment()) p.fail("trailing characters after table header");
            continue;
        }
        const std::string key = p.key();
        if (!p.consume('=')) p.fail("expected '=' after key");
        Value v = p.value();
        if (!p.at_end_or_comment()) p.fail("trailing characters after value");
        const std::string full = prefix.empty() ? key : prefix + "." + key;
        if (!out.emplace(full, std::move(v)).second) p.fail("duplicate key '" + full + "'");
    }
    return out;
}

Table parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

}  // namespace hmt::toml
