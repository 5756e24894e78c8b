#pragma once

// Scalar-generic kernels shared by the rasterizer, its tests and the
// brute-force oracles: quaternion rotation, EWA projection, front-to-back
// compositing and low-order spherical harmonics.

#include "hmt/camera.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <span>

namespace hmt::splat {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vec4 = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar>
using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

inline constexpr double kNearPlane = 1e-4;
inline constexpr double kCovarianceRegularization = 1e-6;
inline constexpr double kMinTransmittance = 1e-4;

// Rotation of a (w, x, y, z) quaternion assumed to be unit length.
template <typename Scalar>
Mat3<Scalar> quat_to_rotation(const Vec4<Scalar>& q) {
    const Scalar w = q(0), x = q(1), y = q(2), z = q(3);
    Mat3<Scalar> r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

template <typename Scalar>
Mat3<Scalar> covariance_3d(const Vec3<Scalar>& log_scale, const Vec4<Scalar>& q) {
    const Mat3<Scalar> m = quat_to_rotation(q) * log_scale.array().exp().matrix().asDiagonal();
    return m * m.transpose();
}

template <typename Scalar>
struct Projected {
    Vec2<Scalar> mean;
    Mat2<Scalar> cov;  // regularized
    Scalar depth;
};

// Perspective Jacobian of (fx x/z + cx, fy y/z + cy) at camera-space t.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 3> projection_jacobian(const Vec3<Scalar>& t, const Camera& cam) {
    Eigen::Matrix<Scalar, 2, 3> j;
    const Scalar iz = Scalar(1) / t.z();
    j << cam.fx * iz, 0, -cam.fx * t.x() * iz * iz,
        0, cam.fy * iz, -cam.fy * t.y() * iz * iz;
    return j;
}

// EWA splat of one primitive. Returns nullopt when the center is not in
// front of the near plane.
template <typename Scalar>
std::optional<Projected<Scalar>> project_gaussian(const Vec3<Scalar>& mu,
                                                  const Vec3<Scalar>& log_scale,
                                                  const Vec4<Scalar>& q, const Camera& cam,
                                                  Scalar regularization = kCovarianceRegularization) {
    const Mat3<Scalar> w = cam.rotation.cast<Scalar>();
    const Vec3<Scalar> t = w * mu + cam.translation.cast<Scalar>();
    if (!(t.z() > Scalar(kNearPlane))) return std::nullopt;
    const auto j = projection_jacobian(t, cam);
    const Mat3<Scalar> cov_cam = w * covariance_3d(log_scale, q) * w.transpose();
    Projected<Scalar> p;
    p.mean << cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy;
    p.cov = j * cov_cam * j.transpose() + regularization * Mat2<Scalar>::Identity();
    p.depth = t.z();
    return p;
}

template <typename Scalar>
struct Splat {
    Vec3<Scalar> color;
    Scalar alpha;
};

template <typename Scalar>
struct Composite {
    Vec3<Scalar> color = Vec3<Scalar>::Zero();
    Scalar alpha = 0;
    Scalar transmittance = 1;
    int used = 0;  // primitives consumed before termination
};

// Front-to-back accumulation of splats sorted by increasing depth. Stops
// after the primitive that drives transmittance below `min_transmittance`;
// pass 0 to evaluate every splat.
template <typename Scalar>
Composite<Scalar> composite_pixel(std::span<const Splat<Scalar>> sorted,
                                  Scalar min_transmittance = Scalar(kMinTransmittance)) {
    Composite<Scalar> out;
    for (const auto& s : sorted) {
        const Scalar w = s.alpha * out.transmittance;
        out.color += w * s.color;
        out.alpha += w;
        out.transmittance *= (1 - s.alpha);
        ++out.used;
        if (out.transmittance < min_transmittance) break;
    }
    return out;
}

// Band-0 (and optionally band-1) SH evaluation. `coeffs` holds
// 3 (degree + 1)^2 values, coefficient-major: coeffs[3 k + channel].
template <typename Scalar>
Vec3<Scalar> sh_to_color(std::span<const Scalar> coeffs, int degree, const Vec3<Scalar>& dir) {
    constexpr double c0 = 0.28209479177387814;
    constexpr double c1 = 0.4886025119029199;
    Vec3<Scalar> c;
    for (int ch = 0; ch < 3; ++ch) c(ch) = Scalar(0.5) + Scalar(c0) * coeffs[ch];
    if (degree >= 1) {
        for (int ch = 0; ch < 3; ++ch) {
            c(ch) += -Scalar(c1) * dir.y() * coeffs[3 + ch] + Scalar(c1) * dir.z() * coeffs[6 + ch] -
                     Scalar(c1) * dir.x() * coeffs[9 + ch];
        }
    }
    return c;
}

}  // namespace hmt::splat
