#include "hmt/checkpoint.hpp"

#include "hmt/error.hpp"
#include "hmt/feature_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

namespace hmt {

namespace {

constexpr char kMagic[4] = {'H', 'M', 'C', 'K'};

template <typename T>
void put(std::string& out, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

class Cursor {
public:
    Cursor(std::string_view bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        unsigned char b[sizeof(T)];
        std::memcpy(b, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, b, sizeof(T));
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(bytes_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    bool at_end() const { return pos_ == bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw DataError(origin_ + ": truncated checkpoint");
    }
    std::string_view bytes_;
    std::string origin_;
    std::size_t pos_ = 0;
};

}  // namespace

const Mat* Checkpoint::find(std::string_view name) const {
    for (const auto& [n, m] : tensors) {
        if (n == name) return &m;
    }
    return nullptr;
}

bool Checkpoint::operator==(const Checkpoint& o) const {
    if (config_hash != o.config_hash || stage != o.stage || iteration != o.iteration || rng_state != o.rng_state ||
        tensors.size() != o.tensors.size()) {
        return false;
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const auto& a = tensors[i];
        const auto& b = o.tensors[i];
        if (a.first != b.first || a.second.rows() != b.second.rows() || a.second.cols() != b.second.cols()) return false;
        if (std::memcmp(a.second.data(), b.second.data(), sizeof(double) * a.second.size()) != 0) return false;
    }
    return true;
}

std::string encode_checkpoint(const Checkpoint& c) {
    std::string out(kMagic, 4);
    put<std::uint16_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, c.config_hash);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(c.stage));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(c.iteration));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c.rng_state.size()));
    out += c.rng_state;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& [name, m] : c.tensors) {
        if (name.size() > 0xffff) throw ContractError("checkpoint: tensor name too long");
        put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out += name;
        put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
        put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.size(); ++i) put<double>(out, m.data()[i]);
    }
    return out;
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& origin) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw DataError(origin + ": not a checkpoint (bad magic)");
    }
    Cursor cur(bytes.substr(4), origin);
    const auto version = cur.get<std::uint16_t>();
    if (version != kCheckpointVersion) {
        throw DataError(origin + ": unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint c;
    c.config_hash = cur.get<std::uint64_t>();
    c.stage = cur.get<std::uint8_t>();
    c.iteration = static_cast<std::int64_t>(cur.get<std::uint64_t>());
    c.rng_state = cur.str(cur.get<std::uint32_t>());
    const auto n = cur.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < n; ++k) {
        std::string name = cur.str(cur.get<std::uint16_t>());
        const auto rows = cur.get<std::uint64_t>();
        const auto cols = cur.get<std::uint64_t>();
        if (cols != 0 && rows > cur.remaining() / 8 / cols) throw DataError(origin + ": truncated checkpoint");
        Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = cur.get<double>();
        c.tensors.emplace_back(std::move(name), std::move(m));
    }
    if (!cur.at_end()) throw DataError(origin + ": trailing bytes after checkpoint");
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    io::write_file(path, encode_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(io::read_file(path), path.string());
}

}  // namespace hmt
