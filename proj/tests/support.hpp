#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "biplanar/calibration.hpp"
#include "biplanar/geometry.hpp"
#include "biplanar/landmarks.hpp"
#include "biplanar/rigid.hpp"

namespace testing_support {

using biplanar::WorldPoint;

// Seeded generators so every property test is reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double sigma) { return std::normal_distribution<double>(0.0, sigma)(engine_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }

  WorldPoint point(double xy, double z_lo, double z_hi) { return {uniform(-xy, xy), uniform(-xy, xy), uniform(z_lo, z_hi)}; }

  Eigen::Vector3d unit_vector() {
    Eigen::Vector3d v;
    do {
      v = {normal(1), normal(1), normal(1)};
    } while (v.norm() < 1e-6);
    return v.normalized();
  }

  // Uniform over SO(3) via a random unit quaternion.
  Eigen::Matrix3d rotation() {
    Eigen::Quaterniond q(normal(1), normal(1), normal(1), normal(1));
    q.normalize();
    return q.toRotationMatrix();
  }

  biplanar::RigidTransform transform(double max_shift) {
    return {rotation(), Eigen::Vector3d(uniform(-max_shift, max_shift), uniform(-max_shift, max_shift),
                                        uniform(-max_shift, max_shift))};
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Points the HSS geometry projects cleanly: inside both fans, within the scan.
inline WorldPoint scan_point(Rng& rng, const biplanar::ScannerCalibration& cal) {
  return rng.point(300, cal.z_start - 1500, cal.z_start);
}

// Six vertebra landmarks in a local frame, mm: endplate centres, pedicles,
// spinous and transverse tips.
inline biplanar::LandmarkSet vertebra_model(double body_height = 22) {
  biplanar::LandmarkSet set;
  set.add("sup_endplate", {0, 0, body_height / 2});
  set.add("inf_endplate", {0, 0, -body_height / 2});
  set.add("pedicle_l", {-22, 14, 4});
  set.add("pedicle_r", {-22, -14, 4});
  set.add("spinous", {-48, 0, -6});
  set.add("transverse_l", {-26, 32, 2});
  return set;
}

struct Vertebra {
  std::string name;
  biplanar::RigidTransform pose;  // model frame -> world
};

// T1..T12, L1..L5 stacked downward from z = -250 mm along a mild scoliotic
// curve with axial rotation.
inline std::vector<Vertebra> spine_poses() {
  std::vector<Vertebra> out;
  double z = -250;
  for (int i = 0; i < 17; ++i) {
    const std::string name = i < 12 ? "T" + std::to_string(i + 1) : "L" + std::to_string(i - 11);
    const double s = static_cast<double>(i) / 16.0;
    const double lateral = 25 * std::sin(M_PI * s);
    const double sagittal = -15 * std::cos(M_PI * s);
    const Eigen::Matrix3d r = biplanar::axis_angle(Eigen::Vector3d::UnitZ(), 0.2 * std::sin(M_PI * s)) *
                              biplanar::axis_angle(Eigen::Vector3d::UnitX(), 0.15 * std::cos(M_PI * s));
    out.push_back({name, {r, Eigen::Vector3d(sagittal, lateral, z)}});
    z -= 22 + 1.2 * i;
  }
  return out;
}

inline biplanar::LandmarkSet transformed(const biplanar::LandmarkSet& set, const biplanar::RigidTransform& t,
                                         const std::string& prefix = {}) {
  biplanar::LandmarkSet out;
  for (const auto& lm : set.entries()) out.add(prefix + lm.label, t.apply(lm.point));
  return out;
}

inline double rotation_error(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) { return (a - b).norm(); }

// Midpoint of the closest-approach segment between the two emission lines,
// built from the pixel coordinates alone.
inline Eigen::Vector3d closest_approach_midpoint(const biplanar::StereoPair& pair, const biplanar::ScannerCalibration& cal) {
  const double zf = cal.z_start - pair.frontal.v * cal.pitch_vertical;
  const double zl = cal.z_start - pair.lateral.v * cal.pitch_vertical;
  const Eigen::Vector3d p1(-cal.f_frontal, 0, zf);
  const Eigen::Vector3d q1(0, (pair.frontal.u - cal.cols_frontal / 2.0) * cal.pitch_frontal, zf);
  const Eigen::Vector3d p2(0, -cal.f_lateral, zl);
  const Eigen::Vector3d q2((cal.cols_lateral / 2.0 - pair.lateral.u) * cal.pitch_lateral, 0, zl);
  const Eigen::Vector3d d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = d1.dot(d1), b = d1.dot(d2), c = d2.dot(d2), d = d1.dot(r), e = d2.dot(r);
  const double den = a * c - b * b;
  const double s = (b * e - c * d) / den;
  const double t = (a * e - b * d) / den;
  return 0.5 * ((p1 + s * d1) + (p2 + t * d2));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("biplanar_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
