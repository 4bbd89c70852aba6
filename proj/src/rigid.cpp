#include "biplanar/rigid.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "biplanar/error.hpp"

namespace biplanar {

namespace {

Eigen::Vector3d vec(const WorldPoint& p) { return {p.x, p.y, p.z}; }

}  // namespace

WorldPoint RigidTransform::apply(const WorldPoint& p) const {
  const Eigen::Vector3d q = rotation * vec(p) + translation;
  return {q.x(), q.y(), q.z()};
}

RigidTransform RigidTransform::inverse() const {
  const Eigen::Matrix3d rt = rotation.transpose();
  return {rt, -(rt * translation)};
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

nlohmann::json to_json(const RigidTransform& t) {
  nlohmann::json rot = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rot.push_back({t.rotation(r, 0), t.rotation(r, 1), t.rotation(r, 2)});
  return {{"rotation", rot}, {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

RigidTransform rigid_from_json(const nlohmann::json& j) {
  try {
    RigidTransform t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t.rotation(r, c) = j.at("rotation").at(r).at(c).get<double>();
    for (int r = 0; r < 3; ++r) t.translation(r) = j.at("translation").at(r).get<double>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("rigid transform JSON: ") + e.what());
  }
}

FitResult fit_rigid(const LandmarkSet& model, const LandmarkSet& target) {
  FitResult result;
  std::vector<Eigen::Vector3d> src, dst;
  for (const auto& m : model.entries()) {
    if (const WorldPoint* t = target.find(m.label)) {
      result.labels.push_back(m.label);
      src.push_back(vec(m.point));
      dst.push_back(vec(*t));
    }
  }
  const auto n = src.size();
  if (n < 3) {
    throw Error(ErrorCode::InsufficientCorrespondences,
                "rigid fit needs at least 3 shared labels, found " + std::to_string(n));
  }

  Eigen::Vector3d src_mean = Eigen::Vector3d::Zero(), dst_mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    src_mean += src[i];
    dst_mean += dst[i];
  }
  src_mean /= static_cast<double>(n);
  dst_mean /= static_cast<double>(n);

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i) cov += (src[i] - src_mean) * (dst[i] - dst_mean).transpose();

  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  // Rank 2 (planar points, always the case for three) is well posed; rank <= 1 is not.
  if (!(sv(0) > 0) || sv(1) <= kDegenerateSingularRatio * sv(0)) {
    std::ostringstream os;
    os << "shared landmarks are coincident or collinear (singular values " << sv.transpose() << ")";
    throw Error(ErrorCode::DegenerateConfiguration, os.str());
  }

  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;

  result.transform.rotation = v * d * u.transpose();
  result.transform.translation = dst_mean - result.transform.rotation * src_mean;

  double sq = 0;
  for (std::size_t i = 0; i < n; ++i) sq += (result.transform.rotation * src[i] + result.transform.translation - dst[i]).squaredNorm();
  result.rms = std::sqrt(sq / static_cast<double>(n));
  return result;
}

}  // namespace biplanar
