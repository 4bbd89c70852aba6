#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "biplanar/geometry.hpp"
#include "biplanar/landmarks.hpp"

namespace biplanar {

/// x -> rotation * x + translation, rotation proper orthonormal.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform translate(double x, double y, double z) {
    return {Eigen::Matrix3d::Identity(), Eigen::Vector3d(x, y, z)};
  }

  WorldPoint apply(const WorldPoint& p) const;
  RigidTransform inverse() const;
};

/// (a * b)(x) = a(b(x)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

/// Rotation about a unit axis by `angle` radians.
Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle);

nlohmann::json to_json(const RigidTransform& t);
RigidTransform rigid_from_json(const nlohmann::json& j);

struct FitResult {
  RigidTransform transform;
  double rms = 0;  // mm over matched labels
  std::vector<std::string> labels;
};

/// Least-squares rotation + translation (no scale) taking `model` onto
/// `target`, matched by label. Throws InsufficientCorrespondences for fewer
/// than three shared labels and DegenerateConfiguration when the shared
/// points are coincident or collinear.
FitResult fit_rigid(const LandmarkSet& model, const LandmarkSet& target);

/// Rank threshold on covariance singular values, relative to the largest.
inline constexpr double kDegenerateSingularRatio = 1e-9;

}  // namespace biplanar
