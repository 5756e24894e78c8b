#pragma once

#include <Eigen/Dense>

namespace hmt {

// Pinhole camera. Pixel (x, y) has its center at (x + 0.5, y + 0.5).
struct Camera {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world -> camera
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    // Throws ContractError unless the rotation is orthonormal within 1e-9 and
    // the image has positive size.
    void validate() const;

    Eigen::Vector3d to_camera(const Eigen::Vector3d& p) const { return rotation * p + translation; }
    Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
    Eigen::Vector2d project(const Eigen::Vector3d& p) const {
        const Eigen::Vector3d c = to_camera(p);
        return {fx * c.x() / c.z() + cx, fy * c.y() / c.z() + cy};
    }
};

// Fixed frontal camera used by the synthetic benchmark: looks down +z from
// (0, 0, -3) with a focal length proportional to the image width.
Camera benchmark_camera(int width, int height);

}  // namespace hmt
