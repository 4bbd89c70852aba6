#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "biplanar/calibration.hpp"
#include "biplanar/csv.hpp"
#include "biplanar/geometry.hpp"

namespace biplanar {

struct Landmark {
  std::string label;
  WorldPoint point;

  bool operator==(const Landmark&) const = default;
};

/// Ordered landmarks with unique labels.
class LandmarkSet {
 public:
  LandmarkSet() = default;
  /// Throws InvalidRequest on a duplicate label.
  explicit LandmarkSet(std::vector<Landmark> entries);

  void add(std::string label, WorldPoint point);
  const WorldPoint* find(std::string_view label) const;
  const std::vector<Landmark>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  bool operator==(const LandmarkSet&) const = default;

 private:
  std::vector<Landmark> entries_;
};

/// Per-pair outcome of a batch reconstruction, in input order.
struct PointDiagnostics {
  std::string label;
  bool ok = false;
  std::optional<WorldPoint> point;
  double row_mismatch = 0;  // |v_f - v_l|, px
  double residual_px = 0;   // RMS over both views of the reprojection distance
  bool row_warning = false; // row_mismatch above kRowMismatchWarningPx
  std::string error;
};

struct ReconstructionResult {
  LandmarkSet landmarks;  // successful points only
  std::vector<PointDiagnostics> diagnostics;

  std::size_t failures() const;
};

/// Diagnostics for a single pair; failure is recorded rather than thrown.
PointDiagnostics reconstruct_with_diagnostics(const StereoPair& pair, const ScannerCalibration& cal);

/// Reconstructs every pair; degenerate pairs are marked failed and the batch
/// continues. Throws InvalidRequest when labels repeat.
ReconstructionResult reconstruct_set(const std::vector<StereoPair>& pairs, const ScannerCalibration& cal);

/// 2D landmark CSV: `label,view,u,v` (extra columns ignored).
struct PairsInput {
  std::vector<StereoPair> pairs;       // labels with both views, in first-seen order
  std::vector<std::string> incomplete; // labels with a single view
};
/// Throws ParseError (with the line number) for bad rows or a repeated
/// (label, view).
PairsInput pairs_from_csv(const CsvTable& table);
void write_pairs_csv(std::ostream& out, const std::vector<StereoPair>& pairs);

/// 3D landmark CSV: `label,x,y,z`.
LandmarkSet landmarks_from_csv(const CsvTable& table);
void write_landmarks_csv(std::ostream& out, const LandmarkSet& set);

}  // namespace biplanar
