#include "biplanar/volume.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "biplanar/error.hpp"

namespace biplanar {

namespace {

std::size_t voxel_count(const Volume::Dims& dims) {
  return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
}

void check_layout(const Volume::Dims& dims, const Volume::Spacing& spacing) {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw Error(ErrorCode::InvalidRequest, "volume dims must be >= 1 on every axis");
    if (!(spacing[a] > 0) || !std::isfinite(spacing[a]))
      throw Error(ErrorCode::InvalidRequest, "volume spacing must be positive");
  }
}

// Interpolation weights along one axis for a continuous voxel coordinate
// already known to lie inside [-0.5, n - 0.5].
struct AxisWeights {
  int i0;
  int i1;
  double t;
};

inline AxisWeights axis_weights(double f, int n) {
  if (n == 1) return {0, 0, 0.0};
  f = std::clamp(f, 0.0, static_cast<double>(n - 1));
  int i0 = static_cast<int>(f);
  if (i0 > n - 2) i0 = n - 2;
  return {i0, i0 + 1, f - i0};
}

// Sampling in voxel coordinates; returns 0 outside the bounding box.
inline double sample_voxel(const Volume& vol, double fx, double fy, double fz) {
  const auto& d = vol.dims();
  if (!(fx >= -0.5 && fx <= d[0] - 0.5 && fy >= -0.5 && fy <= d[1] - 0.5 && fz >= -0.5 && fz <= d[2] - 0.5))
    return 0.0;
  const AxisWeights wx = axis_weights(fx, d[0]);
  const AxisWeights wy = axis_weights(fy, d[1]);
  const AxisWeights wz = axis_weights(fz, d[2]);
  const auto data = vol.data();
  const std::size_t sx = 1;
  const std::size_t sy = static_cast<std::size_t>(d[0]);
  const std::size_t sz = sy * static_cast<std::size_t>(d[1]);
  const std::size_t ox0 = wx.i0 * sx, ox1 = wx.i1 * sx;
  const std::size_t oy0 = wy.i0 * sy, oy1 = wy.i1 * sy;
  const std::size_t oz0 = wz.i0 * sz, oz1 = wz.i1 * sz;

  // std::lerp is exact at t = 0 and t = 1, so voxel centres return stored values.
  const double c00 = std::lerp(data[ox0 + oy0 + oz0], data[ox1 + oy0 + oz0], wx.t);
  const double c10 = std::lerp(data[ox0 + oy1 + oz0], data[ox1 + oy1 + oz0], wx.t);
  const double c01 = std::lerp(data[ox0 + oy0 + oz1], data[ox1 + oy0 + oz1], wx.t);
  const double c11 = std::lerp(data[ox0 + oy1 + oz1], data[ox1 + oy1 + oz1], wx.t);
  return std::lerp(std::lerp(c00, c10, wy.t), std::lerp(c01, c11, wy.t), wz.t);
}

}  // namespace

Volume::Volume(Dims dims, Spacing spacing, WorldPoint origin, std::vector<double> data)
    : dims_(dims), spacing_(spacing), origin_(origin), data_(std::move(data)) {
  check_layout(dims_, spacing_);
  if (data_.size() != voxel_count(dims_)) {
    std::ostringstream os;
    os << "volume data has " << data_.size() << " values, dims require " << voxel_count(dims_);
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

Volume::Volume(Dims dims, Spacing spacing, WorldPoint origin) : dims_(dims), spacing_(spacing), origin_(origin) {
  check_layout(dims_, spacing_);
  data_.assign(voxel_count(dims_), 0.0);
}

WorldPoint Volume::box_min() const {
  return {origin_.x - 0.5 * spacing_[0], origin_.y - 0.5 * spacing_[1], origin_.z - 0.5 * spacing_[2]};
}

WorldPoint Volume::box_max() const {
  return {origin_.x + (dims_[0] - 0.5) * spacing_[0], origin_.y + (dims_[1] - 0.5) * spacing_[1],
          origin_.z + (dims_[2] - 0.5) * spacing_[2]};
}

std::string_view to_string(TransferFunction::Mode mode) {
  switch (mode) {
    case TransferFunction::Mode::Identity: return "identity";
    case TransferFunction::Mode::WindowedLinear: return "window";
    case TransferFunction::Mode::HighPassDensity: return "highpass";
  }
  return "identity";
}

TransferFunction::Mode parse_transfer_mode(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "identity") return TransferFunction::Mode::Identity;
  if (s == "window" || s == "windowed" || s == "windowedlinear") return TransferFunction::Mode::WindowedLinear;
  if (s == "highpass" || s == "high-pass" || s == "highpassdensity") return TransferFunction::Mode::HighPassDensity;
  throw Error(ErrorCode::ParseError, "unknown transfer function '" + std::string(text) + "'");
}

void validate(const TransferFunction& tf) {
  if (tf.mode == TransferFunction::Mode::WindowedLinear && !(tf.width > 0))
    throw Error(ErrorCode::InvalidRequest, "window width must be positive");
}

double sample_trilinear(const Volume& vol, const WorldPoint& p) {
  const auto& s = vol.spacing();
  const auto& o = vol.origin();
  return sample_voxel(vol, (p.x - o.x) / s[0], (p.y - o.y) / s[1], (p.z - o.z) / s[2]);
}

std::optional<std::pair<double, double>> clip_to_box(const Volume& vol, const Ray& ray) {
  const WorldPoint lo = vol.box_min();
  const WorldPoint hi = vol.box_max();
  const double o[3] = {ray.origin.x, ray.origin.y, ray.origin.z};
  const double d[3] = {ray.direction.x, ray.direction.y, ray.direction.z};
  const double bmin[3] = {lo.x, lo.y, lo.z};
  const double bmax[3] = {hi.x, hi.y, hi.z};

  double t0 = 0.0;  // rays start at their origin
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < bmin[a] || o[a] > bmax[a]) return std::nullopt;
      continue;
    }
    double ta = (bmin[a] - o[a]) / d[a];
    double tb = (bmax[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t1 > t0)) return std::nullopt;
  return std::make_pair(t0, t1);
}

double line_integral(const Volume& vol, const Ray& ray, double step, const TransferFunction& tf) {
  if (!(step > 0)) throw Error(ErrorCode::InvalidRequest, "integration step must be positive");
  const auto clip = clip_to_box(vol, ray);
  if (!clip) return 0.0;
  const auto [t0, t1] = *clip;
  const double length = t1 - t0;
  const auto n = static_cast<long>(std::ceil(length / step));
  if (n <= 0) return 0.0;
  const double h = length / static_cast<double>(n);

  // Walk in voxel coordinates to keep the inner loop free of divisions.
  const auto& s = vol.spacing();
  const auto& o = vol.origin();
  const WorldPoint start = ray.at(t0 + 0.5 * h);
  const double fx0 = (start.x - o.x) / s[0], fy0 = (start.y - o.y) / s[1], fz0 = (start.z - o.z) / s[2];
  const double dfx = h * ray.direction.x / s[0], dfy = h * ray.direction.y / s[1], dfz = h * ray.direction.z / s[2];

  double sum = 0.0;
  if (tf.mode == TransferFunction::Mode::Identity) {
    for (long i = 0; i < n; ++i) sum += sample_voxel(vol, fx0 + i * dfx, fy0 + i * dfy, fz0 + i * dfz);
  } else {
    for (long i = 0; i < n; ++i) sum += tf(sample_voxel(vol, fx0 + i * dfx, fy0 + i * dfy, fz0 + i * dfz));
  }
  return sum * h;
}

double default_step(const Volume& vol) {
  const auto& s = vol.spacing();
  return 0.5 * std::min({s[0], s[1], s[2]});
}

}  // namespace biplanar
