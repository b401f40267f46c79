#pragma once

#include <Eigen/Dense>

namespace ttswing {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Mat3 = Eigen::Matrix3d;
using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;

inline constexpr int kArmDof = 5;
using Vec5 = Eigen::Matrix<double, kArmDof, 1>;
using Mat5 = Eigen::Matrix<double, kArmDof, kArmDof>;
using Mat35 = Eigen::Matrix<double, 3, kArmDof>;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace ttswing
