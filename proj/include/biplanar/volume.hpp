#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "biplanar/geometry.hpp"

namespace biplanar {

/// Regular scalar grid, x fastest. `origin` is the centre of voxel (0, 0, 0);
/// the bounding box extends half a voxel beyond the outer voxel centres.
class Volume {
 public:
  using Dims = std::array<int, 3>;
  using Spacing = std::array<double, 3>;

  Volume() = default;
  /// Throws DimensionMismatch when data.size() != nx*ny*nz and InvalidRequest
  /// for non-positive dims or spacing.
  Volume(Dims dims, Spacing spacing, WorldPoint origin, std::vector<double> data);
  /// Zero-filled.
  Volume(Dims dims, Spacing spacing, WorldPoint origin);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  const WorldPoint& origin() const { return origin_; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * k);
  }
  double at(int i, int j, int k) const { return data_[index(i, j, k)]; }
  double& at(int i, int j, int k) { return data_[index(i, j, k)]; }

  WorldPoint voxel_center(int i, int j, int k) const {
    return {origin_.x + i * spacing_[0], origin_.y + j * spacing_[1], origin_.z + k * spacing_[2]};
  }
  WorldPoint box_min() const;
  WorldPoint box_max() const;
  WorldPoint center() const { return 0.5 * (box_min() + box_max()); }
  std::array<double, 3> extent() const {
    return {dims_[0] * spacing_[0], dims_[1] * spacing_[1], dims_[2] * spacing_[2]};
  }

  bool operator==(const Volume&) const = default;

 private:
  Dims dims_{1, 1, 1};
  Spacing spacing_{1, 1, 1};
  WorldPoint origin_{};
  std::vector<double> data_ = std::vector<double>(1, 0.0);
};

/// Maps interpolated volume samples before integration.
struct TransferFunction {
  enum class Mode { Identity, WindowedLinear, HighPassDensity };

  Mode mode = Mode::Identity;
  double threshold = 0;  // HighPassDensity: max(value - threshold, 0)
  double level = 0;      // WindowedLinear: clamp((value - (level - width/2)) / width, 0, 1)
  double width = 1;

  static TransferFunction identity() { return {}; }
  static TransferFunction high_pass(double threshold) { return {Mode::HighPassDensity, threshold, 0, 1}; }
  static TransferFunction window(double level, double width) { return {Mode::WindowedLinear, 0, level, width}; }

  double operator()(double value) const {
    switch (mode) {
      case Mode::Identity: return value;
      case Mode::HighPassDensity: return value > threshold ? value - threshold : 0.0;
      case Mode::WindowedLinear: {
        const double t = (value - (level - 0.5 * width)) / width;
        return t < 0 ? 0.0 : (t > 1 ? 1.0 : t);
      }
    }
    return value;
  }

  bool operator==(const TransferFunction&) const = default;
};

std::string_view to_string(TransferFunction::Mode mode);
TransferFunction::Mode parse_transfer_mode(std::string_view text);
/// Throws InvalidRequest when a windowed function has width <= 0.
void validate(const TransferFunction& tf);

/// Trilinear interpolation; 0 outside the bounding box. In the half-voxel
/// margin between the outer voxel centres and the box the edge value holds.
double sample_trilinear(const Volume& vol, const WorldPoint& p);

/// Parametric interval [t_enter, t_exit] of the ray inside the bounding box;
/// the ray starts at t = 0.
std::optional<std::pair<double, double>> clip_to_box(const Volume& vol, const Ray& ray);

/// Composite midpoint rule over the clipped segment. The segment is split into
/// ceil(length / step) equal pieces, so the effective step never exceeds `step`.
/// Throws InvalidRequest for step <= 0.
double line_integral(const Volume& vol, const Ray& ray, double step,
                     const TransferFunction& tf = TransferFunction::identity());

/// Half of the smallest voxel spacing.
double default_step(const Volume& vol);

}  // namespace biplanar
