#include "hmt/camera.hpp"

#include "hmt/error.hpp"

namespace hmt {

void Camera::validate() const {
    if (width <= 0 || height <= 0) throw ContractError("camera: image size must be positive");
    const double err = (rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (!(err <= 1e-9)) throw ContractError("camera: rotation is not orthonormal");
    if (!(fx > 0.0) || !(fy > 0.0)) throw ContractError("camera: focal lengths must be positive");
}

Camera benchmark_camera(int width, int height) {
    Camera c;
    c.translation = Eigen::Vector3d(0.0, 0.0, 3.0);
    c.fx = 1.35 * width;
    c.fy = 1.35 * width;
    c.cx = 0.5 * width;
    c.cy = 0.5 * height;
    c.width = width;
    c.height = height;
    return c;
}

}  // namespace hmt
