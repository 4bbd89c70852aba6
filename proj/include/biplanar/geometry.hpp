#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "biplanar/calibration.hpp"

namespace biplanar {

/// Global frame in mm: X toward the frontal detector, Y toward the lateral
/// detector, Z vertically up.
struct WorldPoint {
  double x = 0;
  double y = 0;
  double z = 0;

  bool operator==(const WorldPoint&) const = default;
};

inline WorldPoint operator+(WorldPoint a, WorldPoint b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline WorldPoint operator-(WorldPoint a, WorldPoint b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline WorldPoint operator*(double s, WorldPoint a) { return {s * a.x, s * a.y, s * a.z}; }
inline double dot(WorldPoint a, WorldPoint b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(WorldPoint a) { return std::sqrt(dot(a, a)); }
inline double distance(WorldPoint a, WorldPoint b) { return norm(a - b); }

enum class View { Frontal, Lateral };

std::string_view to_string(View view);
/// Accepts "frontal"/"pa" and "lateral"/"lat", case-insensitive. Throws ParseError.
View parse_view(std::string_view text);
inline View other(View view) { return view == View::Frontal ? View::Lateral : View::Frontal; }

/// Continuous pixel coordinates; integer (i, j) is the centre of column i, row j.
/// No range clamp is applied anywhere in the geometry layer.
struct ImagePoint {
  View view = View::Frontal;
  double u = 0;  // column
  double v = 0;  // row

  bool operator==(const ImagePoint&) const = default;
};

struct StereoPair {
  std::string label;
  ImagePoint frontal{View::Frontal};
  ImagePoint lateral{View::Lateral};
};

/// Emission line from the emitter; `direction` is unit length.
struct Ray {
  WorldPoint origin;
  WorldPoint direction;

  WorldPoint at(double t) const { return origin + t * direction; }
};

/// Homogeneous frontal column before the perspective division.
struct HomogeneousColumn {
  double u_h = 0;  // P_y * f_frontal
  double w_h = 0;  // f_frontal + P_x
};

ImagePoint project_frontal(const WorldPoint& p, const ScannerCalibration& cal);
ImagePoint project_lateral(const WorldPoint& p, const ScannerCalibration& cal);
ImagePoint project(const WorldPoint& p, View view, const ScannerCalibration& cal);

HomogeneousColumn project_homogeneous_frontal(const WorldPoint& p, const ScannerCalibration& cal);

/// In-plane coordinate of a pixel on the isocenter plane of its view: y on the
/// x = 0 plane for frontal, x on the y = 0 plane for lateral.
double pixel_to_isocenter_plane(const ImagePoint& ip, const ScannerCalibration& cal);
/// 3D position of a pixel on its view's isocenter plane.
WorldPoint isocenter_point(const ImagePoint& ip, const ScannerCalibration& cal);

/// Solves the 2x2 axial system for (x, y) and averages the two rows for z.
/// Throws DegenerateGeometry when the back-projected rays are near parallel.
WorldPoint reconstruct(const StereoPair& pair, const ScannerCalibration& cal);

/// Relative determinant threshold for `reconstruct`, scaled by f_frontal * f_lateral.
inline constexpr double kSingularRelativeThreshold = 1e-6;
/// Row disagreement beyond which a pair is flagged as a probable labeling error.
inline constexpr double kRowMismatchWarningPx = 5.0;

inline double row_mismatch(const StereoPair& pair) { return std::abs(pair.frontal.v - pair.lateral.v); }
inline bool row_mismatch_warning(const StereoPair& pair) { return row_mismatch(pair) > kRowMismatchWarningPx; }

/// The epipolar line of a point in one view is the same row in the other view.
inline double epipolar_row(const ImagePoint& ip) { return ip.v; }

/// Ray from the view's emitter at the pixel's row height through the pixel's
/// isocenter-plane point. The direction has no z component.
Ray backproject_ray(const ImagePoint& ip, const ScannerCalibration& cal);

/// Position of a view's emitter when the gantry is at row `v`.
WorldPoint emitter_position(View view, double v, const ScannerCalibration& cal);

/// Distance along a back-projected ray from the emitter to the detector plane.
double distance_to_detector(const Ray& ray, View view, const ScannerCalibration& cal);

/// Conventional radiography: one fixed point source at `source_z`, same
/// emitter/isocenter distance as the slot model, image read out on the
/// isocenter plane with the calibration's pitches.
struct PinholeCamera {
  View view = View::Frontal;
  double source_z = 0;

  WorldPoint source(const ScannerCalibration& cal) const;
};

/// Throws SingularProjection when the point is at or behind the source plane.
ImagePoint project_pinhole(const WorldPoint& p, const PinholeCamera& camera, const ScannerCalibration& cal);
/// Ray from the fixed source through the isocenter-plane point of `ip`.
Ray pinhole_ray(const ImagePoint& ip, const PinholeCamera& camera, const ScannerCalibration& cal);

}  // namespace biplanar
