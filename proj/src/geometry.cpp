#include "biplanar/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <string>

#include "biplanar/error.hpp"

namespace biplanar {

namespace {

// Shared by both views so the two rows of a world point are bit-identical.
double row_of_height(double z, const ScannerCalibration& cal) { return (cal.z_start - z) / cal.pitch_vertical; }
double height_of_row(double v, const ScannerCalibration& cal) { return cal.z_start - cal.pitch_vertical * v; }

[[noreturn]] void singular(const char* what, const WorldPoint& p) {
  std::ostringstream os;
  os << what << ": point (" << p.x << ", " << p.y << ", " << p.z << ") is at or behind the emitter plane";
  throw Error(ErrorCode::SingularProjection, os.str());
}

WorldPoint normalized(WorldPoint d) { return (1.0 / norm(d)) * d; }

}  // namespace

std::string_view to_string(View view) { return view == View::Frontal ? "frontal" : "lateral"; }

View parse_view(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "frontal" || s == "pa") return View::Frontal;
  if (s == "lateral" || s == "lat") return View::Lateral;
  throw Error(ErrorCode::ParseError, "unknown view '" + std::string(text) + "'");
}

ImagePoint project_frontal(const WorldPoint& p, const ScannerCalibration& cal) {
  const double depth = cal.f_frontal + p.x;
  if (!(depth > 0)) singular("project_frontal", p);
  // Written as (offset at isocenter) * (demagnification) so that points on the
  // isocenter plane map at exactly 1/pitch.
  const double offset = (p.y / cal.pitch_frontal) * (cal.f_frontal / depth);
  return {View::Frontal, cal.cols_frontal / 2.0 + offset, row_of_height(p.z, cal)};
}

ImagePoint project_lateral(const WorldPoint& p, const ScannerCalibration& cal) {
  const double depth = cal.f_lateral + p.y;
  if (!(depth > 0)) singular("project_lateral", p);
  const double offset = (p.x / cal.pitch_lateral) * (cal.f_lateral / depth);
  return {View::Lateral, cal.cols_lateral / 2.0 - offset, row_of_height(p.z, cal)};
}

ImagePoint project(const WorldPoint& p, View view, const ScannerCalibration& cal) {
  return view == View::Frontal ? project_frontal(p, cal) : project_lateral(p, cal);
}

HomogeneousColumn project_homogeneous_frontal(const WorldPoint& p, const ScannerCalibration& cal) {
  // [f 0 0 0; 0 0 1 0] * [0 1 0 0; 0 0 1 -Pz; 1 0 0 f; 0 0 0 1] * [P; 1]
  const double cam_x = p.y;
  const double cam_z = p.x + cal.f_frontal;
  return {cal.f_frontal * cam_x, cam_z};
}

double pixel_to_isocenter_plane(const ImagePoint& ip, const ScannerCalibration& cal) {
  if (ip.view == View::Frontal) return cal.pitch_frontal * (ip.u - cal.cols_frontal / 2.0);
  return cal.pitch_lateral * (cal.cols_lateral / 2.0 - ip.u);
}

WorldPoint isocenter_point(const ImagePoint& ip, const ScannerCalibration& cal) {
  const double s = pixel_to_isocenter_plane(ip, cal);
  const double z = height_of_row(ip.v, cal);
  return ip.view == View::Frontal ? WorldPoint{0, s, z} : WorldPoint{s, 0, z};
}

WorldPoint reconstruct(const StereoPair& pair, const ScannerCalibration& cal) {
  const double y_f = pixel_to_isocenter_plane(pair.frontal, cal);
  const double x_l = pixel_to_isocenter_plane(pair.lateral, cal);
  const double ff = cal.f_frontal;
  const double fl = cal.f_lateral;

  // [-y_f  ff ] [Px]   [ff * y_f]
  // [ fl  -x_l] [Py] = [fl * x_l]
  const double a00 = -y_f, a01 = ff, a10 = fl, a11 = -x_l;
  const double b0 = ff * y_f, b1 = fl * x_l;
  const double det = a00 * a11 - a01 * a10;
  if (!(std::abs(det) > kSingularRelativeThreshold * ff * fl)) {
    std::ostringstream os;
    os << "reconstruct '" << pair.label << "': back-projected rays are parallel in the axial plane (det " << det << ")";
    throw Error(ErrorCode::DegenerateGeometry, os.str());
  }
  const double px = (b0 * a11 - a01 * b1) / det;
  const double py = (a00 * b1 - b0 * a10) / det;
  const double pz = cal.z_start - cal.pitch_vertical * (pair.lateral.v + pair.frontal.v) / 2.0;
  return {px, py, pz};
}

WorldPoint emitter_position(View view, double v, const ScannerCalibration& cal) {
  const double z = height_of_row(v, cal);
  return view == View::Frontal ? WorldPoint{-cal.f_frontal, 0, z} : WorldPoint{0, -cal.f_lateral, z};
}

Ray backproject_ray(const ImagePoint& ip, const ScannerCalibration& cal) {
  const WorldPoint origin = emitter_position(ip.view, ip.v, cal);
  const WorldPoint target = isocenter_point(ip, cal);
  WorldPoint dir = target - origin;
  dir.z = 0;
  return {origin, normalized(dir)};
}

double distance_to_detector(const Ray& ray, View view, const ScannerCalibration& cal) {
  if (view == View::Frontal) return (cal.d_frontal - cal.f_frontal - ray.origin.x) / ray.direction.x;
  return (cal.d_lateral - cal.f_lateral - ray.origin.y) / ray.direction.y;
}

WorldPoint PinholeCamera::source(const ScannerCalibration& cal) const {
  return view == View::Frontal ? WorldPoint{-cal.f_frontal, 0, source_z} : WorldPoint{0, -cal.f_lateral, source_z};
}

ImagePoint project_pinhole(const WorldPoint& p, const PinholeCamera& camera, const ScannerCalibration& cal) {
  const bool frontal = camera.view == View::Frontal;
  const double f = frontal ? cal.f_frontal : cal.f_lateral;
  const double depth = f + (frontal ? p.x : p.y);
  if (!(depth > 0)) singular("project_pinhole", p);
  const double scale = f / depth;
  const double z_iso = camera.source_z + (p.z - camera.source_z) * scale;
  const double v = row_of_height(z_iso, cal);
  if (frontal) return {View::Frontal, cal.cols_frontal / 2.0 + (p.y / cal.pitch_frontal) * scale, v};
  return {View::Lateral, cal.cols_lateral / 2.0 - (p.x / cal.pitch_lateral) * scale, v};
}

Ray pinhole_ray(const ImagePoint& ip, const PinholeCamera& camera, const ScannerCalibration& cal) {
  const WorldPoint origin = camera.source(cal);
  return {origin, normalized(isocenter_point(ip, cal) - origin)};
}

}  // namespace biplanar
