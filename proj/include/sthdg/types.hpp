#pragma once

#include <Eigen/Dense>

namespace sthdg {

// Space-time points and vectors are ordered (t, x1, x2).
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr int kTime = 0;

} // namespace sthdg
