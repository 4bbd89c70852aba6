#include "biplanar/session.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <mutex>
#include <random>
#include <sstream>

#include "biplanar/error.hpp"
#include "biplanar/image_io.hpp"
#include "biplanar/landmarks.hpp"
#include "biplanar/mesh.hpp"
#include "biplanar/rigid.hpp"

namespace biplanar {

namespace fs = std::filesystem;

struct SessionStore::Entry {
  mutable std::shared_mutex mutex;
  Session session;
};

namespace {

constexpr const char* kSessionFile = "session.json";

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
  return os.str();
}

std::string random_id() {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(m);
  std::ostringstream os;
  os << std::hex << std::setfill('0') << std::setw(16) << rng() << std::setw(16) << rng();
  return os.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableImage, "cannot open image '" + p.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const fs::path& target, const std::string& bytes) {
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

nlohmann::json image_point_json(const ImagePoint& p) { return {{"u", p.u}, {"v", p.v}}; }

nlohmann::json image_json(const SessionImage& im) {
  return {{"file", im.file}, {"rows", im.rows}, {"cols", im.cols}, {"bit_depth", im.bit_depth}};
}

SessionImage image_from_json(const nlohmann::json& j) {
  return {j.at("file").get<std::string>(), j.at("rows").get<int>(), j.at("cols").get<int>(), j.at("bit_depth").get<int>()};
}

nlohmann::json audit_json(const AuditEntry& a) {
  nlohmann::json j = {{"timestamp", a.timestamp}, {"action", a.action}};
  if (!a.label.empty()) j["label"] = a.label;
  if (!a.view.empty()) j["view"] = a.view;
  if (a.u) j["u"] = *a.u;
  if (a.v) j["v"] = *a.v;
  if (!a.client_timestamp.empty()) j["client_timestamp"] = a.client_timestamp;
  return j;
}

AuditEntry audit_from_json(const nlohmann::json& j) {
  AuditEntry a;
  a.timestamp = j.at("timestamp").get<std::string>();
  a.action = j.at("action").get<std::string>();
  a.label = j.value("label", std::string());
  a.view = j.value("view", std::string());
  if (j.contains("u")) a.u = j.at("u").get<double>();
  if (j.contains("v")) a.v = j.at("v").get<double>();
  a.client_timestamp = j.value("client_timestamp", std::string());
  return a;
}

// Stored document: placements only; reconstructions are derived on read.
nlohmann::json document(const Session& s) {
  nlohmann::json lms = nlohmann::json::array();
  for (const auto& lm : s.landmarks) {
    nlohmann::json j = {{"label", lm.label}};
    j["frontal"] = lm.frontal ? image_point_json(*lm.frontal) : nlohmann::json(nullptr);
    j["lateral"] = lm.lateral ? image_point_json(*lm.lateral) : nlohmann::json(nullptr);
    lms.push_back(std::move(j));
  }
  nlohmann::json audit = nlohmann::json::array();
  for (const auto& a : s.audit) audit.push_back(audit_json(a));
  return {{"id", s.id},
          {"created", s.created},
          {"calibration", to_json(s.cal)},
          {"images", {{"frontal", image_json(s.frontal)}, {"lateral", image_json(s.lateral)}}},
          {"landmarks", lms},
          {"audit", audit}};
}

Session session_from_document(const nlohmann::json& j) {
  Session s;
  s.id = j.at("id").get<std::string>();
  s.created = j.at("created").get<std::string>();
  s.cal = calibration_from_json(j.at("calibration"));
  s.frontal = image_from_json(j.at("images").at("frontal"));
  s.lateral = image_from_json(j.at("images").at("lateral"));
  for (const auto& lj : j.at("landmarks")) {
    LandmarkPlacements lm;
    lm.label = lj.at("label").get<std::string>();
    for (View view : {View::Frontal, View::Lateral}) {
      const auto& pj = lj.at(std::string(to_string(view)));
      if (!pj.is_null()) lm.slot(view) = ImagePoint{view, pj.at("u").get<double>(), pj.at("v").get<double>()};
    }
    s.landmarks.push_back(std::move(lm));
  }
  for (const auto& aj : j.at("audit")) s.audit.push_back(audit_from_json(aj));
  return s;
}

std::vector<StereoPair> complete_pairs(const Session& s) {
  std::vector<StereoPair> pairs;
  for (const auto& lm : s.landmarks) {
    if (lm.frontal && lm.lateral) pairs.push_back({lm.label, *lm.frontal, *lm.lateral});
  }
  return pairs;
}

LandmarkSet reconstructed_points(const Session& s) {
  return reconstruct_set(complete_pairs(s), s.cal).landmarks;
}

}  // namespace

nlohmann::json landmark_json(const LandmarkPlacements& lm, const ScannerCalibration& cal) {
  nlohmann::json j = {{"label", lm.label}};
  j["frontal"] = lm.frontal ? image_point_json(*lm.frontal) : nlohmann::json(nullptr);
  j["lateral"] = lm.lateral ? image_point_json(*lm.lateral) : nlohmann::json(nullptr);
  if (!(lm.frontal && lm.lateral)) {
    j["reconstruction"] = nullptr;
    return j;
  }
  const auto d = reconstruct_with_diagnostics({lm.label, *lm.frontal, *lm.lateral}, cal);
  nlohmann::json r = {{"row_mismatch", d.row_mismatch}, {"row_warning", d.row_warning}};
  if (d.ok) {
    const WorldPoint& p = *d.point;
    r["point"] = {{"x", p.x}, {"y", p.y}, {"z", p.z}};
    r["residual_px"] = d.residual_px;
    r["reprojected"] = {{"frontal", image_point_json(project_frontal(p, cal))},
                        {"lateral", image_point_json(project_lateral(p, cal))}};
  } else {
    r["error"] = d.error;
  }
  j["reconstruction"] = r;
  return j;
}

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
  for (const auto& dir : fs::directory_iterator(root_)) {
    if (!dir.is_directory()) continue;
    if (auto s = load(dir.path())) {
      auto entry = std::make_shared<Entry>();
      entry->session = std::move(*s);
      sessions_.emplace(entry->session.id, std::move(entry));
    }
  }
}

SessionStore::~SessionStore() = default;

std::optional<Session> SessionStore::load(const fs::path& dir) const {
  std::ifstream in(dir / kSessionFile);
  if (!in) return std::nullopt;
  try {
    nlohmann::json j;
    in >> j;
    return session_from_document(j);
  } catch (const std::exception&) {
    return std::nullopt;  // not a session directory we understand
  }
}

void SessionStore::persist(const Session& s) const {
  write_file_atomic(root_ / s.id / kSessionFile, document(s).dump(2) + "\n");
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "unknown session '" + id + "'");
  return it->second;
}

std::string SessionStore::create(const ImageSource& frontal_src, const ImageSource& lateral_src, ScannerCalibration cal) {
  const std::string frontal_bytes = frontal_src.bytes.empty() ? read_file(frontal_src.path) : frontal_src.bytes;
  const std::string lateral_bytes = lateral_src.bytes.empty() ? read_file(lateral_src.path) : lateral_src.bytes;
  const GrayImage fi = decode_image(frontal_bytes);
  const GrayImage li = decode_image(lateral_bytes);
  if (fi.rows != li.rows) {
    throw Error(ErrorCode::ImageMismatch, "frontal image has " + std::to_string(fi.rows) + " rows, lateral has " +
                                              std::to_string(li.rows));
  }
  if (fi.cols != cal.cols_frontal + 1 || li.cols != cal.cols_lateral + 1) {
    std::ostringstream os;
    os << "image widths " << fi.cols << "/" << li.cols << " do not match calibration columns " << cal.cols_frontal + 1
       << "/" << cal.cols_lateral + 1;
    throw Error(ErrorCode::ImageMismatch, os.str());
  }
  cal.rows = fi.rows;
  validate(cal);

  auto extension = [](const std::string& bytes) { return bytes.size() > 1 && bytes[0] == 'P' ? ".pgm" : ".png"; };

  auto entry = std::make_shared<Entry>();
  Session& s = entry->session;
  s.created = now_iso8601();
  s.cal = cal;
  s.frontal = {std::string("frontal") + extension(frontal_bytes), fi.rows, fi.cols, fi.bit_depth};
  s.lateral = {std::string("lateral") + extension(lateral_bytes), li.rows, li.cols, li.bit_depth};
  s.audit.push_back({s.created, "create", {}, {}, {}, {}, {}});

  std::unique_lock lock(map_mutex_);
  do {
    s.id = random_id();
  } while (sessions_.count(s.id) || fs::exists(root_ / s.id));
  const fs::path dir = root_ / s.id;
  fs::create_directories(dir);
  write_file_atomic(dir / s.frontal.file, frontal_bytes);
  write_file_atomic(dir / s.lateral.file, lateral_bytes);
  persist(s);
  sessions_.emplace(s.id, entry);
  return s.id;
}

std::vector<std::string> SessionStore::ids() const {
  std::shared_lock lock(map_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

nlohmann::json SessionStore::state(const std::string& id) const {
  const auto entry = find(id);
  std::shared_lock lock(entry->mutex);
  const Session& s = entry->session;
  nlohmann::json j = document(s);
  nlohmann::json lms = nlohmann::json::array();
  for (const auto& lm : s.landmarks) lms.push_back(landmark_json(lm, s.cal));
  j["landmarks"] = lms;
  return j;
}

nlohmann::json SessionStore::place(const std::string& id, const std::string& label, View view, double u, double v,
                                   const std::string& client_timestamp) {
  if (label.empty()) throw Error(ErrorCode::OutOfRange, "landmark label must not be empty");
  const auto entry = find(id);
  std::unique_lock lock(entry->mutex);
  Session& s = entry->session;
  const int max_col = view == View::Frontal ? s.cal.cols_frontal : s.cal.cols_lateral;
  if (!(u >= 0 && u <= max_col) || !(v >= 0 && v < s.image(view).rows)) {
    std::ostringstream os;
    os << to_string(view) << " placement (" << u << ", " << v << ") outside u in [0, " << max_col << "], v in [0, "
       << s.image(view).rows << ")";
    throw Error(ErrorCode::OutOfRange, os.str());
  }

  auto it = std::find_if(s.landmarks.begin(), s.landmarks.end(), [&](const auto& l) { return l.label == label; });
  Session updated = s;
  auto lit = updated.landmarks.begin() + (it - s.landmarks.begin());
  if (it == s.landmarks.end()) {
    updated.landmarks.push_back({label, {}, {}});
    lit = updated.landmarks.end() - 1;
  }
  lit->slot(view) = ImagePoint{view, u, v};
  updated.audit.push_back({now_iso8601(), "place", label, std::string(to_string(view)), u, v, client_timestamp});
  persist(updated);
  s = std::move(updated);

  const auto& lm = *std::find_if(s.landmarks.begin(), s.landmarks.end(), [&](const auto& l) { return l.label == label; });
  return {{"label", label},
          {"view", to_string(view)},
          {"guidance", {{"view", to_string(other(view))}, {"row", epipolar_row(*lm.slot(view))}}},
          {"landmark", landmark_json(lm, s.cal)}};
}

nlohmann::json SessionStore::remove(const std::string& id, const std::string& label, std::optional<View> view) {
  const auto entry = find(id);
  std::unique_lock lock(entry->mutex);
  Session& s = entry->session;
  auto it = std::find_if(s.landmarks.begin(), s.landmarks.end(), [&](const auto& l) { return l.label == label; });
  if (it == s.landmarks.end() || (view && !it->slot(*view))) {
    throw Error(ErrorCode::OutOfRange, "no placement for landmark '" + label + "'" +
                                           (view ? " in the " + std::string(to_string(*view)) + " view" : ""));
  }
  Session updated = s;
  auto uit = updated.landmarks.begin() + (it - s.landmarks.begin());
  if (view) uit->slot(*view).reset();
  if (!view || (!uit->frontal && !uit->lateral)) updated.landmarks.erase(uit);
  updated.audit.push_back({now_iso8601(), "delete", label, view ? std::string(to_string(*view)) : std::string(), {}, {}, {}});
  persist(updated);
  s = std::move(updated);

  const auto rest = std::find_if(s.landmarks.begin(), s.landmarks.end(), [&](const auto& l) { return l.label == label; });
  return {{"label", label}, {"landmark", rest == s.landmarks.end() ? nlohmann::json(nullptr) : landmark_json(*rest, s.cal)}};
}

SessionStore::Payload SessionStore::export_session(const std::string& id, std::string_view format) const {
  const auto entry = find(id);
  std::shared_lock lock(entry->mutex);
  const Session& s = entry->session;
  std::ostringstream os;
  if (format == "landmarks") {
    os << "label,view,u,v\n";
    for (const auto& lm : s.landmarks) {
      for (View view : {View::Frontal, View::Lateral}) {
        if (const auto& p = lm.slot(view))
          os << lm.label << ',' << to_string(view) << ',' << format_number(p->u) << ',' << format_number(p->v) << '\n';
      }
    }
    return {"text/csv", os.str()};
  }
  if (format == "points") {
    write_landmarks_csv(os, reconstructed_points(s));
    return {"text/csv", os.str()};
  }
  if (format == "scene") {
    ScenePlacement placement{s.cal, s.frontal.rows, "images/frontal", "images/lateral"};
    nlohmann::json j = scene_json({}, placement, "");
    nlohmann::json pts = nlohmann::json::array();
    const LandmarkSet points = reconstructed_points(s);
    for (const auto& l : points.entries())
      pts.push_back({{"label", l.label}, {"x", l.point.x}, {"y", l.point.y}, {"z", l.point.z}});
    j["landmarks"] = pts;
    return {"application/json", j.dump(2)};
  }
  throw Error(ErrorCode::InvalidRequest, "unknown export format '" + std::string(format) +
                                             "' (expected landmarks, points or scene)");
}

nlohmann::json SessionStore::fit(const std::string& id, std::string_view model_csv) {
  const LandmarkSet model = landmarks_from_csv(parse_csv(model_csv));
  const auto entry = find(id);
  std::unique_lock lock(entry->mutex);
  Session& s = entry->session;
  const FitResult fit = fit_rigid(model, reconstructed_points(s));
  Session updated = s;
  updated.audit.push_back({now_iso8601(), "fit", {}, {}, {}, {}, {}});
  persist(updated);
  s = std::move(updated);
  return {{"transform", to_json(fit.transform)}, {"rms", fit.rms}, {"labels", fit.labels}};
}

SessionStore::Payload SessionStore::image(const std::string& id, View view, bool preview, int max_side) const {
  const auto entry = find(id);
  std::shared_lock lock(entry->mutex);
  const Session& s = entry->session;
  const SessionImage& im = s.image(view);
  std::ifstream in(root_ / s.id / im.file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "session image '" + im.file + "' is missing");
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (preview) return {"image/png", encode_png(preview8(decode_image(bytes), max_side))};
  const bool pgm = im.file.ends_with(".pgm");
  return {pgm ? "image/x-portable-graymap" : "image/png", std::move(bytes)};
}

}  // namespace biplanar
