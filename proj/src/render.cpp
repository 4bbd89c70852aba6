#include "biplanar/render.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "biplanar/error.hpp"

namespace biplanar {

namespace {

int view_cols(View view, const ScannerCalibration& cal) {
  return (view == View::Frontal ? cal.cols_frontal : cal.cols_lateral) + 1;
}

RadiographImage blank_image(const RenderRequest& req) {
  RadiographImage img;
  img.view = req.view;
  img.rows = req.row_count;
  img.cols = view_cols(req.view, req.cal);
  img.first_row = req.first_row;
  img.pixels.assign(static_cast<std::size_t>(img.rows) * img.cols, 0.0);
  return img;
}

void render_row(const RenderRequest& req, const Volume& vol, int r, double* out, int cols) {
  const double v = req.first_row + r;
  for (int c = 0; c < cols; ++c) out[c] = line_integral(vol, pixel_ray(req, c, v), req.step, req.tf);
}

// A slot-scan row only sees the axial slab at its own height.
bool slot_row_misses(const RenderRequest& req, const Volume& vol, int r) {
  if (req.geometry != Geometry::SlotScan) return false;
  const double z = req.cal.z_start - req.cal.pitch_vertical * (req.first_row + r);
  return z < vol.box_min().z || z > vol.box_max().z;
}

}  // namespace

std::string_view to_string(Geometry geometry) { return geometry == Geometry::SlotScan ? "slot" : "pinhole"; }

Geometry parse_geometry(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "slot" || s == "slotscan" || s == "slot-scan" || s == "eos") return Geometry::SlotScan;
  if (s == "pinhole" || s == "dr") return Geometry::Pinhole;
  throw Error(ErrorCode::ParseError, "unknown geometry '" + std::string(text) + "'");
}

RenderRequest default_request(const Volume& vol, Geometry geometry, View view, ScannerCalibration cal) {
  RenderRequest req;
  req.geometry = geometry;
  req.view = view;
  req.step = default_step(vol);
  req.source_z = vol.center().z;
  req.row_count = static_cast<int>(std::ceil(vol.extent()[2] / cal.pitch_vertical));
  const double top_row = (cal.z_start - vol.box_max().z) / cal.pitch_vertical;
  req.first_row = std::max(0, static_cast<int>(std::floor(top_row)));
  cal.rows = std::max(cal.rows, req.first_row + req.row_count);
  req.cal = cal;
  return req;
}

void validate(const RenderRequest& req) {
  validate(req.cal);
  if (req.row_count < 1 || req.first_row < 0 || req.first_row + req.row_count > req.cal.rows) {
    std::ostringstream os;
    os << "row range [" << req.first_row << ", " << req.first_row + req.row_count << ") is outside [0, "
       << req.cal.rows << ")";
    throw Error(ErrorCode::InvalidRequest, os.str());
  }
  if (!(req.step > 0)) throw Error(ErrorCode::InvalidRequest, "step must be positive");
  if (!std::isfinite(req.source_z)) throw Error(ErrorCode::InvalidRequest, "pinhole source height must be finite");
  validate(req.tf);
}

Ray pixel_ray(const RenderRequest& req, double u, double v) {
  const ImagePoint ip{req.view, u, v};
  if (req.geometry == Geometry::SlotScan) return backproject_ray(ip, req.cal);
  return pinhole_ray(ip, PinholeCamera{req.view, req.source_z}, req.cal);
}

RadiographImage render_serial(const RenderRequest& req, const Volume& vol) {
  validate(req);
  RadiographImage img = blank_image(req);
  for (int r = 0; r < img.rows; ++r) render_row(req, vol, r, img.pixels.data() + static_cast<std::size_t>(r) * img.cols, img.cols);
  img.mapping = auto_mapping(img);
  return img;
}

RadiographImage render(const RenderRequest& req, const Volume& vol, int threads) {
  validate(req);
  RadiographImage img = blank_image(req);
  const int rows = img.rows;
  const int cols = img.cols;
  double* pixels = img.pixels.data();
#ifdef _OPENMP
  const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
#endif
  for (int r = 0; r < rows; ++r) {
    if (slot_row_misses(req, vol, r)) continue;
    render_row(req, vol, r, pixels + static_cast<std::size_t>(r) * cols, cols);
  }
  (void)threads;
  img.mapping = auto_mapping(img);
  return img;
}

ExportMapping auto_mapping(const RadiographImage& img) {
  ExportMapping m;
  if (img.pixels.empty()) return m;
  const auto [lo, hi] = std::minmax_element(img.pixels.begin(), img.pixels.end());
  m.min = *lo;
  m.max = *hi;
  return m;
}

nlohmann::json to_json(const RenderRequest& req) {
  nlohmann::json tf = {{"mode", to_string(req.tf.mode)}};
  if (req.tf.mode == TransferFunction::Mode::HighPassDensity) tf["threshold"] = req.tf.threshold;
  if (req.tf.mode == TransferFunction::Mode::WindowedLinear) {
    tf["level"] = req.tf.level;
    tf["width"] = req.tf.width;
  }
  nlohmann::json j = {
      {"geometry", to_string(req.geometry)},
      {"view", to_string(req.view)},
      {"calibration", to_json(req.cal)},
      {"first_row", req.first_row},
      {"row_count", req.row_count},
      {"step", req.step},
      {"transfer_function", tf},
  };
  if (req.geometry == Geometry::Pinhole) j["source_z"] = req.source_z;
  return j;
}

}  // namespace biplanar
