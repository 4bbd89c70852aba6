#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace biplanar {

/// Instrument geometry of a biplanar slot scanner. Lengths are mm, pitches are
/// mm per pixel measured at the isocenter plane. `cols_*` are the highest
/// column index, so an image has `cols_* + 1` columns.
struct ScannerCalibration {
  double f_frontal = 987.0;   // emitter to isocenter
  double d_frontal = 1300.0;  // emitter to detector
  double f_lateral = 918.0;
  double d_lateral = 1300.0;
  double w_frontal = 450.0;   // physical detector width
  double w_lateral = 450.0;
  double pitch_frontal = 0.179363;
  double pitch_lateral = 0.179363;
  double pitch_vertical = 0.179363;
  double z_start = 0.0;       // emitter height at row 0
  int cols_frontal = 1895;
  int cols_lateral = 1763;
  int rows = 8000;

  /// Width of the frontal image measured on the isocenter plane.
  double effective_width_frontal() const { return (cols_frontal + 1) * pitch_frontal; }
  double effective_width_lateral() const { return (cols_lateral + 1) * pitch_lateral; }
  /// Detector width demagnified onto the isocenter plane.
  double projected_detector_width_frontal() const { return w_frontal * f_frontal / d_frontal; }
  double projected_detector_width_lateral() const { return w_lateral * f_lateral / d_lateral; }

  bool operator==(const ScannerCalibration&) const = default;
};

inline constexpr std::string_view kHssDefaultName = "hss-default";
/// Relative tolerance between the pixel-derived and detector-derived widths.
inline constexpr double kEffectiveWidthTolerance = 0.01;

/// Parameters of the pediatric radiology installation at HSS. z_start and rows
/// are per-scan and default to 0 mm and 8000 rows.
ScannerCalibration hss_default();

/// Throws Error(InvalidCalibration) naming the first violated invariant.
void validate(const ScannerCalibration& cal);

/// Flat JSON object. Omitted fields take their `hss_default()` values; the
/// result is validated. `lambda_x`/`lambda_y`/`lambda_z` (and `lambda_f`,
/// `lambda_l`) are accepted as aliases for the three pitch fields.
ScannerCalibration calibration_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScannerCalibration& cal);

/// Accepts a file path or the bundled profile name `hss-default`.
ScannerCalibration load_calibration(std::string_view path_or_name);
void save_calibration(const ScannerCalibration& cal, const std::filesystem::path& path);

}  // namespace biplanar
