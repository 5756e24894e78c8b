#include "hmt/feature_io.hpp"

#include "hmt/error.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hmt::io {

namespace {

constexpr char kMagic[4] = {'H', 'M', 'T', 'K'};

template <typename T>
void put_le(std::string& out, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t& pos, const std::string& origin) {
    if (bytes.size() - pos < sizeof(T)) throw DataError(origin + ": truncated HMTK file");
    unsigned char b[sizeof(T)];
    std::memcpy(b, bytes.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    pos += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

}  // namespace

std::uint64_t Tensor::count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

std::string encode_hmtk(const Tensor& t) {
    if (t.dims.size() > 255) throw ContractError("HMTK: rank exceeds 255");
    if (t.count() != t.data.size()) throw ContractError("HMTK: dims do not match payload size");
    std::string out(kMagic, 4);
    put_le<std::uint16_t>(out, kHmtkVersion);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put_le<std::uint64_t>(out, d);
    out.reserve(out.size() + 8 * t.data.size());
    for (double v : t.data) put_le<double>(out, v);
    return out;
}

Tensor decode_hmtk(std::string_view bytes, const std::string& origin) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw DataError(origin + ": not an HMTK file (bad magic)");
    }
    std::size_t pos = 4;
    const auto version = get_le<std::uint16_t>(bytes, pos, origin);
    if (version != kHmtkVersion) {
        throw DataError(origin + ": unsupported HMTK version " + std::to_string(version));
    }
    const auto rank = get_le<std::uint8_t>(bytes, pos, origin);
    Tensor t;
    t.dims.resize(rank);
    for (auto& d : t.dims) d = get_le<std::uint64_t>(bytes, pos, origin);
    const std::uint64_t n = t.count();
    if ((bytes.size() - pos) / 8 != n || (bytes.size() - pos) % 8 != 0) {
        throw DataError(origin + ": HMTK payload size does not match its dims");
    }
    t.data.resize(n);
    for (auto& v : t.data) v = get_le<double>(bytes, pos, origin);
    return t;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + path.string());
}

void write_hmtk(const std::filesystem::path& path, const Tensor& t) { write_file(path, encode_hmtk(t)); }

Tensor read_hmtk(const std::filesystem::path& path) { return decode_hmtk(read_file(path), path.string()); }

Tensor from_mat(const Mat& m, std::vector<std::uint64_t> dims) {
    Tensor t;
    t.dims = dims.empty() ? std::vector<std::uint64_t>{static_cast<std::uint64_t>(m.rows()),
                                                       static_cast<std::uint64_t>(m.cols())}
                          : std::move(dims);
    if (t.count() != static_cast<std::uint64_t>(m.size())) {
        throw ContractError("HMTK: dims do not match matrix " + shape_str(m));
    }
    t.data.assign(m.data(), m.data() + m.size());
    return t;
}

Mat to_mat(const Tensor& t, Eigen::Index rows, Eigen::Index cols) {
    if (rows < 0 || cols < 0 || static_cast<std::uint64_t>(rows * cols) != t.data.size()) {
        throw DataError("HMTK: payload of " + std::to_string(t.data.size()) + " values cannot be viewed as " +
                        std::to_string(rows) + "x" + std::to_string(cols));
    }
    Mat m(rows, cols);
    std::copy(t.data.begin(), t.data.end(), m.data());
    return m;
}

void write_matrix(const std::filesystem::path& path, const Mat& m, std::vector<std::uint64_t> dims) {
    write_hmtk(path, from_mat(m, std::move(dims)));
}

Mat read_matrix(const std::filesystem::path& path) {
    const Tensor t = read_hmtk(path);
    if (t.dims.empty()) return to_mat(t, 1, 1);
    const auto rows = static_cast<Eigen::Index>(t.dims[0]);
    const Eigen::Index cols = rows == 0 ? 0 : static_cast<Eigen::Index>(t.data.size()) / rows;
    if (rows == 0) {
        std::uint64_t c = 1;
        for (std::size_t i = 1; i < t.dims.size(); ++i) c *= t.dims[i];
        return Mat(0, static_cast<Eigen::Index>(c));
    }
    return to_mat(t, rows, cols);
}

}  // namespace hmt::io
