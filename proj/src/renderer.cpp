#include "hmt/renderer.hpp"

#include "hmt/error.hpp"
#include "hmt/parallel.hpp"
#include "hmt/splat_math.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace hmt {

namespace {

using Eigen::Matrix2d;
using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::Vector4d;

enum class Status : unsigned char { visible, culled, skipped, offscreen };

struct Projection {
    Status status = Status::offscreen;
    Vector3d t = Vector3d::Zero();
    Vector2d mean = Vector2d::Zero();
    double ca = 0, cb = 0, cc = 0;  // inverse 2-d covariance
    double opacity = 0;
    Vector3d color = Vector3d::Zero();
    Vector3d dir = Vector3d::Zero();
    double dist = 0;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel box
};

struct Raster {
    Camera camera;
    int width = 0;
    int height = 0;
    int tile = 16;
    int tiles_x = 0;
    int tiles_y = 0;
    int threads = 1;
    double min_transmittance = 0;
    int sh_degree = 0;
    std::vector<Projection> proj;
    std::vector<std::vector<int>> tile_lists;
};

struct GradAcc {
    double mean[2] = {0, 0};
    double conic[3] = {0, 0, 0};
    double opacity = 0;
    double color[3] = {0, 0, 0};

    GradAcc& operator+=(const GradAcc& o) {
        for (int k = 0; k < 2; ++k) mean[k] += o.mean[k];
        for (int k = 0; k < 3; ++k) conic[k] += o.conic[k];
        opacity += o.opacity;
        for (int k = 0; k < 3; ++k) color[k] += o.color[k];
        return *this;
    }
};

struct Contribution {
    int pos;
    double ahat;
    double gauss;
    double transmittance;
    double dx;
    double dy;
};

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_view(const FieldView& v) {
    const Eigen::Index n = v.size();
    auto expect = [n](const ad::Var& x, Eigen::Index cols, const char* name) {
        if (!x.defined() || x.rows() != n || x.cols() != cols) {
            throw ContractError(std::string("render: bad shape for ") + name);
        }
    };
    if (v.sh_degree < 0 || v.sh_degree > 1) throw ContractError("render: sh degree must be 0 or 1");
    expect(v.mu, 3, "mu");
    expect(v.log_scale, 3, "log_scale");
    expect(v.rot, 4, "rot");
    expect(v.alpha_logit, 1, "alpha_logit");
    expect(v.sh, sh_coeff_count(v.sh_degree), "sh");
}

void project_one(Raster& r, const FieldView& v, Eigen::Index i) {
    Projection& p = r.proj[i];
    const Vector3d mu = v.mu.value().row(i).transpose();
    const Vector3d ls = v.log_scale.value().row(i).transpose();
    const Vector4d q = v.rot.value().row(i).transpose();
    const auto sp = splat::project_gaussian<double>(mu, ls, q, r.camera);
    if (!sp) {
        p.status = Status::culled;
        return;
    }
    const double a = sp->cov(0, 0), b = sp->cov(0, 1), c = sp->cov(1, 1);
    const double det = a * c - b * b;
    if (!(det > 0.0) || !std::isfinite(det) || !sp->mean.allFinite()) {
        p.status = Status::skipped;
        return;
    }
    p.t = r.camera.to_camera(mu);
    p.mean = sp->mean;
    p.ca = c / det;
    p.cb = -b / det;
    p.cc = a / det;
    const double mid = 0.5 * (a + c);
    const double lambda = mid + std::sqrt(std::max(mid * mid - det, 0.0));
    const double radius = 3.0 * std::sqrt(lambda);
    p.x0 = std::max(0, static_cast<int>(std::ceil(p.mean.x() - radius - 0.5)));
    p.x1 = std::min(r.width - 1, static_cast<int>(std::floor(p.mean.x() + radius - 0.5)));
    p.y0 = std::max(0, static_cast<int>(std::ceil(p.mean.y() - radius - 0.5)));
    p.y1 = std::min(r.height - 1, static_cast<int>(std::floor(p.mean.y() + radius - 0.5)));
    if (p.x0 > p.x1 || p.y0 > p.y1) {
        p.status = Status::offscreen;
        return;
    }
    p.opacity = sigmoid(v.alpha_logit.value()(i, 0));
    const Vector3d ray = mu - r.camera.center();
    p.dist = ray.norm();
    p.dir = p.dist > 0.0 ? Vector3d(ray / p.dist) : Vector3d::Zero();
    const auto& sh = v.sh.value();
    p.color = splat::sh_to_color<double>(std::span<const double>(sh.row(i).data(), sh.cols()),
                                         r.sh_degree, p.dir);
    p.status = Status::visible;
}

template <typename Visit>
void walk_pixel(const Raster& r, const std::vector<int>& list, int px, int py, Visit&& visit) {
    const double fx = px + 0.5;
    const double fy = py + 0.5;
    double trans = 1.0;
    for (int pos = 0; pos < static_cast<int>(list.size()); ++pos) {
        const Projection& p = r.proj[list[pos]];
        if (px < p.x0 || px > p.x1 || py < p.y0 || py > p.y1) continue;
        const double dx = fx - p.mean.x();
        const double dy = fy - p.mean.y();
        const double power = -0.5 * (p.ca * dx * dx + 2.0 * p.cb * dx * dy + p.cc * dy * dy);
        const double g = std::exp(power);
        const double ahat = p.opacity * g;
        visit(Contribution{pos, ahat, g, trans, dx, dy});
        trans *= (1.0 - ahat);
        if (trans < r.min_transmittance) break;
    }
}

template <typename Fn>
void for_tile_pixels(const Raster& r, int tile_index, Fn&& fn) {
    const int tx = tile_index % r.tiles_x;
    const int ty = tile_index / r.tiles_x;
    const int xe = std::min(r.width, (tx + 1) * r.tile);
    const int ye = std::min(r.height, (ty + 1) * r.tile);
    for (int py = ty * r.tile; py < ye; ++py) {
        for (int px = tx * r.tile; px < xe; ++px) fn(px, py);
    }
}

Matrix3d rotation_derivative(const Vector4d& q, int k) {
    const double w = q(0), x = q(1), y = q(2), z = q(3);
    Matrix3d d;
    switch (k) {
        case 0: d << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0; break;
        case 1: d << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x; break;
        case 2: d << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y; break;
        default: d << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0; break;
    }
    return d;
}

void backward_tiles(const Raster& r, const Mat& grad, std::vector<GradAcc>& total) {
    const int tiles = r.tiles_x * r.tiles_y;
    std::vector<std::vector<GradAcc>> per_tile(tiles);
    parallel_for(tiles, r.threads, [&](std::size_t ti) {
        const auto& list = r.tile_lists[ti];
        auto& acc = per_tile[ti];
        acc.assign(list.size(), GradAcc{});
        if (list.empty()) return;
        std::vector<Contribution> contribs;
        for_tile_pixels(r, static_cast<int>(ti), [&](int px, int py) {
            const Eigen::Index row = static_cast<Eigen::Index>(py) * r.width + px;
            const Vector3d gc(grad(row, 0), grad(row, 1), grad(row, 2));
            const double ga = grad(row, 3);
            if (gc.isZero(0.0) && ga == 0.0) return;
            contribs.clear();
            walk_pixel(r, list, px, py, [&](const Contribution& c) { contribs.push_back(c); });
            Vector3d behind_c = Vector3d::Zero();
            double behind_a = 0.0;
            for (auto it = contribs.rbegin(); it != contribs.rend(); ++it) {
                const Projection& p = r.proj[list[it->pos]];
                GradAcc& g = acc[it->pos];
                const double d_ahat =
                    it->transmittance * (gc.dot(p.color - behind_c) + ga * (1.0 - behind_a));
                const double w = it->ahat * it->transmittance;
                for (int ch = 0; ch < 3; ++ch) g.color[ch] += gc(ch) * w;
                behind_c = it->ahat * p.color + (1.0 - it->ahat) * behind_c;
                behind_a = it->ahat + (1.0 - it->ahat) * behind_a;
                g.opacity += d_ahat * it->gauss;
                const double d_pow = d_ahat * it->ahat;
                g.mean[0] += d_pow * (p.ca * it->dx + p.cb * it->dy);
                g.mean[1] += d_pow * (p.cb * it->dx + p.cc * it->dy);
                g.conic[0] += d_pow * (-0.5 * it->dx * it->dx);
                g.conic[1] += d_pow * (-it->dx * it->dy);
                g.conic[2] += d_pow * (-0.5 * it->dy * it->dy);
            }
        });
    });
    for (int ti = 0; ti < tiles; ++ti) {
        const auto& list = r.tile_lists[ti];
        for (std::size_t pos = 0; pos < list.size(); ++pos) total[list[pos]] += per_tile[ti][pos];
    }
}

void backward_primitives(const Raster& r, const FieldView& v, const std::vector<GradAcc>& total,
                         ad::Node& n) {
    ad::Node* mu_n = n.parents[0].get();
    ad::Node* ls_n = n.parents[1].get();
    ad::Node* rot_n = n.parents[2].get();
    ad::Node* op_n = n.parents[3].get();
    ad::Node* sh_n = n.parents[4].get();
    Mat* g_mu = mu_n->requires_grad ? &mu_n->ensure_grad() : nullptr;
    Mat* g_ls = ls_n->requires_grad ? &ls_n->ensure_grad() : nullptr;
    Mat* g_rot = rot_n->requires_grad ? &rot_n->ensure_grad() : nullptr;
    Mat* g_op = op_n->requires_grad ? &op_n->ensure_grad() : nullptr;
    Mat* g_sh = sh_n->requires_grad ? &sh_n->ensure_grad() : nullptr;
    const Camera& cam = r.camera;
    const Matrix3d& W = cam.rotation;

    parallel_for(r.proj.size(), r.threads, [&](std::size_t i) {
        const Projection& p = r.proj[i];
        if (p.status != Status::visible) return;
        const GradAcc& a = total[i];

        if (g_op) (*g_op)(i, 0) += a.opacity * p.opacity * (1.0 - p.opacity);

        Vector3d g_mu_i = Vector3d::Zero();
        const Vector3d gcol(a.color[0], a.color[1], a.color[2]);
        if (g_sh) {
            for (int ch = 0; ch < 3; ++ch) (*g_sh)(i, ch) += kShC0 * gcol(ch);
        }
        if (r.sh_degree >= 1) {
            const auto& f = v.sh.value();
            Vector3d g_dir = Vector3d::Zero();
            for (int ch = 0; ch < 3; ++ch) {
                if (g_sh) {
                    (*g_sh)(i, 3 + ch) += -kShC1 * p.dir.y() * gcol(ch);
                    (*g_sh)(i, 6 + ch) += kShC1 * p.dir.z() * gcol(ch);
                    (*g_sh)(i, 9 + ch) += -kShC1 * p.dir.x() * gcol(ch);
                }
                g_dir.x() += -kShC1 * f(i, 9 + ch) * gcol(ch);
                g_dir.y() += -kShC1 * f(i, 3 + ch) * gcol(ch);
                g_dir.z() += kShC1 * f(i, 6 + ch) * gcol(ch);
            }
            if (p.dist > 0.0) g_mu_i += (g_dir - p.dir * p.dir.dot(g_dir)) / p.dist;
        }

        const Vector3d ls = v.log_scale.value().row(i).transpose();
        const Vector4d q = v.rot.value().row(i).transpose();
        const Matrix3d R = splat::quat_to_rotation<double>(q);
        const Vector3d S = ls.array().exp();
        const Matrix3d M3 = R * S.asDiagonal();
        const Matrix3d cov_cam = W * (M3 * M3.transpose()) * W.transpose();
        const auto J = splat::projection_jacobian<double>(p.t, cam);

        Matrix2d conic;
        conic << p.ca, p.cb, p.cb, p.cc;
        Matrix2d g_conic;
        g_conic << a.conic[0], 0.5 * a.conic[1], 0.5 * a.conic[1], a.conic[2];
        const Matrix2d g_cov2 = -conic * g_conic * conic;
        const Matrix3d g_cov_cam = J.transpose() * g_cov2 * J;
        const Eigen::Matrix<double, 2, 3> g_J = 2.0 * g_cov2 * J * cov_cam;

        const double x = p.t.x(), y = p.t.y(), z = p.t.z();
        const double iz = 1.0 / z, iz2 = iz * iz, iz3 = iz2 * iz;
        Vector3d g_t;
        g_t.x() = a.mean[0] * cam.fx * iz + g_J(0, 2) * (-cam.fx * iz2);
        g_t.y() = a.mean[1] * cam.fy * iz + g_J(1, 2) * (-cam.fy * iz2);
        g_t.z() = a.mean[0] * (-cam.fx * x * iz2) + a.mean[1] * (-cam.fy * y * iz2) +
                  g_J(0, 0) * (-cam.fx * iz2) + g_J(1, 1) * (-cam.fy * iz2) +
                  g_J(0, 2) * (2.0 * cam.fx * x * iz3) + g_J(1, 2) * (2.0 * cam.fy * y * iz3);
        g_mu_i += W.transpose() * g_t;
        if (g_mu) (*g_mu).row(i) += g_mu_i.transpose();

        const Matrix3d g_cov3 = W.transpose() * g_cov_cam * W;
        const Matrix3d g_M3 = 2.0 * g_cov3 * M3;
        if (g_ls) {
            for (int j = 0; j < 3; ++j) (*g_ls)(i, j) += g_M3.col(j).dot(R.col(j)) * S(j);
        }
        if (g_rot) {
            const Matrix3d g_R = g_M3 * S.asDiagonal();
            for (int k = 0; k < 4; ++k) (*g_rot)(i, k) += g_R.cwiseProduct(rotation_derivative(q, k)).sum();
        }
    });
}

}  // namespace

RenderOutput render(const FieldView& view, const Camera& camera, const RenderOptions& opts) {
    check_view(view);
    camera.validate();
    if (opts.tile_size < 1) throw ContractError("render: tile size must be positive");

    auto r = std::make_shared<Raster>();
    r->camera = camera;
    r->width = camera.width;
    r->height = camera.height;
    r->tile = opts.tile_size;
    r->tiles_x = (r->width + r->tile - 1) / r->tile;
    r->tiles_y = (r->height + r->tile - 1) / r->tile;
    r->threads = std::max(opts.threads, 1);
    r->min_transmittance = opts.min_transmittance;
    r->sh_degree = view.sh_degree;
    const Eigen::Index n = view.size();
    r->proj.resize(n);
    parallel_for(n, r->threads, [&](std::size_t i) { project_one(*r, view, i); });

    RenderOutput out;
    out.width = r->width;
    out.height = r->height;
    std::vector<int> order;
    for (Eigen::Index i = 0; i < n; ++i) {
        switch (r->proj[i].status) {
            case Status::visible: order.push_back(static_cast<int>(i)); break;
            case Status::culled: ++out.stats.culled; break;
            case Status::skipped: ++out.stats.skipped; break;
            case Status::offscreen: break;
        }
    }
    out.stats.drawn = static_cast<int>(order.size());
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double za = r->proj[a].t.z(), zb = r->proj[b].t.z();
        return za < zb || (za == zb && a < b);
    });
    r->tile_lists.assign(static_cast<std::size_t>(r->tiles_x) * r->tiles_y, {});
    for (int id : order) {
        const Projection& p = r->proj[id];
        for (int ty = p.y0 / r->tile; ty <= p.y1 / r->tile; ++ty) {
            for (int tx = p.x0 / r->tile; tx <= p.x1 / r->tile; ++tx) {
                r->tile_lists[static_cast<std::size_t>(ty) * r->tiles_x + tx].push_back(id);
            }
        }
    }

    Mat image = Mat::Zero(static_cast<Eigen::Index>(r->width) * r->height, 4);
    parallel_for(r->tile_lists.size(), r->threads, [&](std::size_t ti) {
        const auto& list = r->tile_lists[ti];
        if (list.empty()) return;
        for_tile_pixels(*r, static_cast<int>(ti), [&](int px, int py) {
            Vector3d c = Vector3d::Zero();
            double alpha = 0.0;
            walk_pixel(*r, list, px, py, [&](const Contribution& k) {
                const double w = k.ahat * k.transmittance;
                c += w * r->proj[list[k.pos]].color;
                alpha += w;
            });
            const Eigen::Index row = static_cast<Eigen::Index>(py) * r->width + px;
            image.row(row) << c.x(), c.y(), c.z(), alpha;
        });
    });

    const FieldView v = view;
    ad::Var packed = ad::make_op(std::move(image),
                                 {view.mu, view.log_scale, view.rot, view.alpha_logit, view.sh},
                                 [r, v](ad::Node& node) {
                                     std::vector<GradAcc> total(r->proj.size());
                                     backward_tiles(*r, node.grad, total);
                                     backward_primitives(*r, v, total, node);
                                 });
    out.color = ad::slice_cols(packed, 0, 3);
    out.alpha = ad::slice_cols(packed, 3, 1);
    return out;
}

std::string_view to_string(BlendMode m) {
    return m == BlendMode::as_written ? "as-written" : "face-complement";
}

BlendMode parse_blend_mode(std::string_view s) {
    if (s == "as-written") return BlendMode::as_written;
    if (s == "face-complement") return BlendMode::face_complement;
    throw ConfigError("unknown blend mode '" + std::string(s) + "'");
}

BlendOutput blend_head(const ad::Var& c_face, const ad::Var& a_face, const ad::Var& c_mouth,
                       const ad::Var& a_mouth, BlendMode mode) {
    const Eigen::Index n = c_face.rows();
    if (c_face.cols() != 3 || c_mouth.cols() != 3 || c_mouth.rows() != n || a_face.rows() != n ||
        a_mouth.rows() != n || a_face.cols() != 1 || a_mouth.cols() != 1) {
        throw ContractError("blend_head: image shapes differ");
    }
    const ad::Var& a_back = mode == BlendMode::as_written ? a_mouth : a_face;
    const ad::Var keep = ad::add_scalar(ad::neg(a_back), 1.0);
    return {ad::mul_col(c_face, a_face) + ad::mul_col(c_mouth, keep), mode};
}

Mat clamp_display(const Mat& image) { return image.cwiseMax(0.0).cwiseMin(1.0); }

}  // namespace hmt
