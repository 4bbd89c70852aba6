#include "biplanar/calibration.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "biplanar/error.hpp"

namespace biplanar {

namespace {

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::InvalidCalibration, "invalid calibration: " + what);
}

void check_width(const char* view, double pixel_width, double detector_width) {
  const double rel = std::abs(pixel_width - detector_width) / detector_width;
  if (!(rel <= kEffectiveWidthTolerance)) {
    std::ostringstream os;
    os << view << " effective width " << pixel_width << " mm disagrees with demagnified detector width "
       << detector_width << " mm (relative " << rel << ")";
    invalid(os.str());
  }
}

}  // namespace

ScannerCalibration hss_default() { return ScannerCalibration{}; }

void validate(const ScannerCalibration& c) {
  const double lengths[] = {c.f_frontal, c.d_frontal, c.f_lateral, c.d_lateral, c.w_frontal,
                            c.w_lateral, c.pitch_frontal, c.pitch_lateral, c.pitch_vertical, c.z_start};
  for (double v : lengths) {
    if (!std::isfinite(v)) invalid("non-finite value");
  }
  if (!(c.f_frontal > 0 && c.f_frontal < c.d_frontal)) invalid("require 0 < f_frontal < d_frontal");
  if (!(c.f_lateral > 0 && c.f_lateral < c.d_lateral)) invalid("require 0 < f_lateral < d_lateral");
  if (!(c.pitch_frontal > 0 && c.pitch_lateral > 0 && c.pitch_vertical > 0)) invalid("pitches must be positive");
  if (!(c.w_frontal > 0 && c.w_lateral > 0)) invalid("detector widths must be positive");
  if (c.cols_frontal <= 0 || c.cols_lateral <= 0 || c.rows <= 0) invalid("cols and rows must be positive");

  check_width("frontal", c.effective_width_frontal(), c.projected_detector_width_frontal());
  check_width("lateral", c.effective_width_lateral(), c.projected_detector_width_lateral());

  if (c.f_frontal > c.f_lateral && c.w_frontal == c.w_lateral &&
      !(c.effective_width_frontal() > c.effective_width_lateral())) {
    invalid("frontal image must be wider than lateral when f_frontal > f_lateral");
  }
}

ScannerCalibration calibration_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "calibration must be a JSON object");
  ScannerCalibration c = hss_default();

  auto number = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw Error(ErrorCode::ParseError, "calibration field '" + key + "' must be a number");
    return v.get<double>();
  };
  auto integer = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer()) throw Error(ErrorCode::ParseError, "calibration field '" + key + "' must be an integer");
    return v.get<int>();
  };

  for (const auto& [key, v] : j.items()) {
    if (key == "f_frontal") c.f_frontal = number(v, key);
    else if (key == "d_frontal") c.d_frontal = number(v, key);
    else if (key == "f_lateral") c.f_lateral = number(v, key);
    else if (key == "d_lateral") c.d_lateral = number(v, key);
    else if (key == "w_frontal") c.w_frontal = number(v, key);
    else if (key == "w_lateral") c.w_lateral = number(v, key);
    else if (key == "pitch_frontal" || key == "lambda_x" || key == "lambda_f") c.pitch_frontal = number(v, key);
    else if (key == "pitch_lateral" || key == "lambda_y" || key == "lambda_l") c.pitch_lateral = number(v, key);
    else if (key == "pitch_vertical" || key == "lambda_z") c.pitch_vertical = number(v, key);
    else if (key == "z_start") c.z_start = number(v, key);
    else if (key == "cols_frontal") c.cols_frontal = integer(v, key);
    else if (key == "cols_lateral") c.cols_lateral = integer(v, key);
    else if (key == "rows") c.rows = integer(v, key);
    else if (key == "name" || key == "comment") continue;
    else throw Error(ErrorCode::ParseError, "unknown calibration field '" + key + "'");
  }
  validate(c);
  return c;
}

nlohmann::json to_json(const ScannerCalibration& c) {
  return {
      {"f_frontal", c.f_frontal},         {"d_frontal", c.d_frontal},
      {"f_lateral", c.f_lateral},         {"d_lateral", c.d_lateral},
      {"w_frontal", c.w_frontal},         {"w_lateral", c.w_lateral},
      {"pitch_frontal", c.pitch_frontal}, {"pitch_lateral", c.pitch_lateral},
      {"pitch_vertical", c.pitch_vertical}, {"z_start", c.z_start},
      {"cols_frontal", c.cols_frontal},   {"cols_lateral", c.cols_lateral},
      {"rows", c.rows},
  };
}

ScannerCalibration load_calibration(std::string_view path_or_name) {
  if (path_or_name == kHssDefaultName) {
    ScannerCalibration c = hss_default();
    validate(c);
    return c;
  }
  std::ifstream in{std::filesystem::path(path_or_name)};
  if (!in) throw Error(ErrorCode::IoError, "cannot open calibration file '" + std::string(path_or_name) + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("calibration JSON: ") + e.what());
  }
  return calibration_from_json(j);
}

void save_calibration(const ScannerCalibration& cal, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write calibration file '" + path.string() + "'");
  out << to_json(cal).dump(2) << '\n';
}

}  // namespace biplanar
