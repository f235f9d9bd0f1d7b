#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace pamtt {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline bool all_finite(const Eigen::Ref<const VecX>& v) { return v.allFinite(); }

}  // namespace pamtt
