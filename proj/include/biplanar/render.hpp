#pragma once

#include <string_view>
#include <vector>

#include <json.hpp>

#include "biplanar/calibration.hpp"
#include "biplanar/geometry.hpp"
#include "biplanar/volume.hpp"

namespace biplanar {

enum class Geometry { SlotScan, Pinhole };

std::string_view to_string(Geometry geometry);
Geometry parse_geometry(std::string_view text);

/// Display mapping applied only on export: (value - min) / (max - min), then
/// x^(1/gamma), then optionally 1 - x.
struct ExportMapping {
  double min = 0;
  double max = 0;
  double gamma = 1;
  bool invert = false;

  bool operator==(const ExportMapping&) const = default;
};

/// Raw line integrals, row-major. Row r of `pixels` is detector row
/// `first_row + r`.
struct RadiographImage {
  View view = View::Frontal;
  int rows = 0;
  int cols = 0;
  int first_row = 0;
  std::vector<double> pixels;
  ExportMapping mapping;

  double at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * cols + c]; }
};

struct RenderRequest {
  Geometry geometry = Geometry::SlotScan;
  View view = View::Frontal;
  ScannerCalibration cal;
  int first_row = 0;
  int row_count = 0;
  double step = 1.0;
  TransferFunction tf;
  double source_z = 0;  // pinhole only
};

/// Rows covering the volume's z extent starting at the row of its top face
/// (clamped at row 0), half-voxel step, pinhole source at the volume's z centre.
/// `cal.rows` is raised if needed so the range is valid.
RenderRequest default_request(const Volume& vol, Geometry geometry, View view, ScannerCalibration cal);

/// Throws InvalidRequest for row ranges outside [0, cal.rows), non-positive
/// step or an invalid transfer function.
void validate(const RenderRequest& req);

/// Row-parallel renderer. `threads` <= 0 uses the OpenMP default. The result
/// is bit-identical to `render_serial`.
RadiographImage render(const RenderRequest& req, const Volume& vol, int threads = 0);

/// Single-threaded reference, one ray per pixel with no row culling.
RadiographImage render_serial(const RenderRequest& req, const Volume& vol);

/// Emission line for pixel (u, v) under the request's geometry.
Ray pixel_ray(const RenderRequest& req, double u, double v);

/// Min/max of the raw pixels, gamma 1.
ExportMapping auto_mapping(const RadiographImage& img);

nlohmann::json to_json(const RenderRequest& req);

}  // namespace biplanar
