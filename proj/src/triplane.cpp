#include "hmt/triplane.hpp"

#include "hmt/error.hpp"

#include <algorithm>
#include <cmath>

namespace hmt {

namespace {

constexpr std::uint32_t kPrime1 = 1u;
constexpr std::uint32_t kPrime2 = 2654435761u;

// Coordinate pairs for the XY, YZ and XZ planes.
constexpr std::array<std::array<int, 2>, 3> kPlaneAxes{{{0, 1}, {1, 2}, {0, 2}}};

struct Corner {
    Eigen::Index row;
    double w;
    double dw_du;  // derivative of w w.r.t. the plane's first coordinate in [-1, 1]
    double dw_dv;
};

}  // namespace

TriPlaneHash::TriPlaneHash(TriPlaneConfig cfg) : cfg_(cfg) {
    if (cfg_.levels < 1 || cfg_.features < 1 || cfg_.min_resolution < 1 ||
        cfg_.max_resolution < cfg_.min_resolution || cfg_.log2_table_size < 1 ||
        cfg_.log2_table_size > 30) {
        throw ContractError("TriPlaneHash: invalid configuration");
    }
    const double growth =
        cfg_.levels > 1 ? std::exp((std::log(double(cfg_.max_resolution)) -
                                    std::log(double(cfg_.min_resolution))) /
                                   (cfg_.levels - 1))
                        : 1.0;
    for (int l = 0; l < cfg_.levels; ++l) {
        resolutions_.push_back(
            static_cast<int>(std::floor(cfg_.min_resolution * std::pow(growth, l) + 1e-9)));
    }
    tables_ = ad::parameter(
        Mat::Zero(Eigen::Index{3} * cfg_.levels * cfg_.table_size(), cfg_.features));
}

void TriPlaneHash::init_uniform(Rng& rng, double scale) {
    Mat& t = tables_.mutable_value();
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-scale, scale);
}

bool TriPlaneHash::is_dense(int level) const {
    const std::uint64_t r = static_cast<std::uint64_t>(resolution(level)) + 1;
    return r * r <= cfg_.table_size();
}

std::uint32_t TriPlaneHash::hash_index(std::uint32_t ix, std::uint32_t iy, int level) const {
    if (level < 0 || level >= cfg_.levels) throw ContractError("hash_index: level out of range");
    if (is_dense(level)) {
        return iy * static_cast<std::uint32_t>(resolution(level) + 1) + ix;
    }
    return ((ix * kPrime1) ^ (iy * kPrime2)) & (cfg_.table_size() - 1);
}

Eigen::Index TriPlaneHash::table_offset(int plane, int level) const {
    return (Eigen::Index{plane} * cfg_.levels + level) * cfg_.table_size();
}

ad::Var TriPlaneHash::encode(const ad::Var& positions) const {
    if (positions.cols() != 3) throw ContractError("encode: positions must be N x 3");
    const Eigen::Index n = positions.rows();
    const int L = cfg_.levels;
    const int F = cfg_.features;
    const Mat& table = tables_.value();
    const Mat& pos = positions.value();

    // Four corners per (primitive, plane, level).
    const Eigen::Index corners_per_row = Eigen::Index{3} * L * 4;
    std::vector<Corner> corners(static_cast<std::size_t>(n * corners_per_row));
    std::vector<std::uint8_t> clamped(static_cast<std::size_t>(n * 3), 0);
    Mat out = Mat::Zero(n, Eigen::Index{3} * L * F);

    for (Eigen::Index i = 0; i < n; ++i) {
        std::array<double, 3> p{};
        for (int a = 0; a < 3; ++a) {
            const double v = pos(i, a);
            p[a] = std::clamp(v, -1.0, 1.0);
            clamped[static_cast<std::size_t>(i * 3 + a)] = (v < -1.0 || v > 1.0) ? 1 : 0;
        }
        for (int plane = 0; plane < 3; ++plane) {
            const double pu = p[kPlaneAxes[plane][0]];
            const double pv = p[kPlaneAxes[plane][1]];
            for (int l = 0; l < L; ++l) {
                const int R = resolutions_[static_cast<std::size_t>(l)];
                const double half_r = 0.5 * R;
                const double u = (pu + 1.0) * half_r;
                const double v = (pv + 1.0) * half_r;
                const int iu = std::clamp(static_cast<int>(std::floor(u)), 0, R - 1);
                const int iv = std::clamp(static_cast<int>(std::floor(v)), 0, R - 1);
                const double fu = u - iu;
                const double fv = v - iv;
                const Eigen::Index base = table_offset(plane, l);
                Corner* c = &corners[static_cast<std::size_t>(i * corners_per_row +
                                                              (plane * L + l) * 4)];
                for (int k = 0; k < 4; ++k) {
                    const int du = k & 1;
                    const int dv = k >> 1;
                    const double wu = du ? fu : 1.0 - fu;
                    const double wv = dv ? fv : 1.0 - fv;
                    c[k].row = base + hash_index(static_cast<std::uint32_t>(iu + du),
                                                 static_cast<std::uint32_t>(iv + dv), l);
                    c[k].w = wu * wv;
                    c[k].dw_du = (du ? 1.0 : -1.0) * wv * half_r;
                    c[k].dw_dv = (dv ? 1.0 : -1.0) * wu * half_r;
                    out.row(i).segment((plane * L + l) * F, F) += c[k].w * table.row(c[k].row);
                }
            }
        }
    }

    return ad::make_op(
        std::move(out), {positions, tables_},
        [corners = std::move(corners), clamped = std::move(clamped), n, L, F,
         corners_per_row](ad::Node& node) {
            ad::Node& pnode = *node.parents[0];
            ad::Node& tnode = *node.parents[1];
            const Mat& g = node.grad;
            Mat* gt = tnode.requires_grad ? &tnode.ensure_grad() : nullptr;
            Mat* gp = pnode.requires_grad ? &pnode.ensure_grad() : nullptr;
            for (Eigen::Index i = 0; i < n; ++i) {
                for (int plane = 0; plane < 3; ++plane) {
                    for (int l = 0; l < L; ++l) {
                        const Corner* c = &corners[static_cast<std::size_t>(
                            i * corners_per_row + (plane * L + l) * 4)];
                        const auto go = g.row(i).segment((plane * L + l) * F, F);
                        for (int k = 0; k < 4; ++k) {
                            if (gt) gt->row(c[k].row) += c[k].w * go;
                            if (gp) {
                                const double dot = go.dot(tnode.value.row(c[k].row));
                                const int au = kPlaneAxes[plane][0];
                                const int av = kPlaneAxes[plane][1];
                                if (!clamped[static_cast<std::size_t>(i * 3 + au)])
                                    (*gp)(i, au) += c[k].dw_du * dot;
                                if (!clamped[static_cast<std::size_t>(i * 3 + av)])
                                    (*gp)(i, av) += c[k].dw_dv * dot;
                            }
                        }
                    }
                }
            }
        });
}

}  // namespace hmt
