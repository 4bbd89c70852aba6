#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "biplanar/calibration.hpp"
#include "biplanar/geometry.hpp"

namespace biplanar {

struct SessionImage {
  std::string file;  // name inside the session directory
  int rows = 0;
  int cols = 0;
  int bit_depth = 16;
};

struct LandmarkPlacements {
  std::string label;
  std::optional<ImagePoint> frontal;
  std::optional<ImagePoint> lateral;

  std::optional<ImagePoint>& slot(View view) { return view == View::Frontal ? frontal : lateral; }
  const std::optional<ImagePoint>& slot(View view) const { return view == View::Frontal ? frontal : lateral; }
};

struct AuditEntry {
  std::string timestamp;  // server time, ISO 8601 UTC
  std::string action;     // create | place | delete | fit
  std::string label;
  std::string view;
  std::optional<double> u;
  std::optional<double> v;
  std::string client_timestamp;
};

struct Session {
  std::string id;
  std::string created;
  ScannerCalibration cal;
  SessionImage frontal;
  SessionImage lateral;
  std::vector<LandmarkPlacements> landmarks;
  std::vector<AuditEntry> audit;

  const SessionImage& image(View view) const { return view == View::Frontal ? frontal : lateral; }
};

/// Input image for a new session: either raw file bytes or a path to read.
struct ImageSource {
  std::string bytes;
  std::filesystem::path path;
};

/// File-backed session model behind the annotation HTTP API. One directory
/// per session holds `session.json` plus the two immutable image files; every
/// mutation rewrites `session.json` via write-then-rename. Mutations of one
/// session are serialized, reads share the lock, and distinct sessions never
/// contend.
class SessionStore {
 public:
  /// Creates `root` if needed and loads every session found under it.
  explicit SessionStore(std::filesystem::path root);
  ~SessionStore();

  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  /// Throws UnreadableImage, or ImageMismatch when the row counts differ or a
  /// width disagrees with the calibration's column count.
  std::string create(const ImageSource& frontal, const ImageSource& lateral, ScannerCalibration cal);

  std::vector<std::string> ids() const;

  /// Full snapshot: calibration, images, placements with reconstructions and
  /// diagnostics, audit log. Throws UnknownSession.
  nlohmann::json state(const std::string& id) const;

  /// Stores (or replaces) one placement and returns the guidance row for the
  /// other view plus the landmark's current state. Throws UnknownSession,
  /// OutOfRange.
  nlohmann::json place(const std::string& id, const std::string& label, View view, double u, double v,
                       const std::string& client_timestamp = {});

  /// Removes one view's placement, or both when `view` is empty. Throws
  /// UnknownSession, OutOfRange (no such placement).
  nlohmann::json remove(const std::string& id, const std::string& label, std::optional<View> view);

  struct Payload {
    std::string content_type;
    std::string body;
  };
  /// `landmarks` (2D CSV), `points` (3D CSV) or `scene` (JSON).
  Payload export_session(const std::string& id, std::string_view format) const;
  /// Fits a `label,x,y,z` model CSV onto the session's reconstructed points.
  nlohmann::json fit(const std::string& id, std::string_view model_csv);
  /// Original file bytes, or an 8-bit PNG preview no larger than `max_side`.
  Payload image(const std::string& id, View view, bool preview, int max_side = 1024) const;

  const std::filesystem::path& root() const { return root_; }

 private:
  struct Entry;

  std::shared_ptr<Entry> find(const std::string& id) const;
  void persist(const Session& s) const;
  std::optional<Session> load(const std::filesystem::path& dir) const;

  std::filesystem::path root_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

/// JSON form of one landmark: placements plus, when both views are placed,
/// the reconstruction from `reconstruct_with_diagnostics` and reprojections.
nlohmann::json landmark_json(const LandmarkPlacements& lm, const ScannerCalibration& cal);

}  // namespace biplanar
