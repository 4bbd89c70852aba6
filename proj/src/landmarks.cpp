#include "biplanar/landmarks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "biplanar/error.hpp"

namespace biplanar {

namespace {

double image_distance(const ImagePoint& a, const ImagePoint& b) { return std::hypot(a.u - b.u, a.v - b.v); }

}  // namespace

LandmarkSet::LandmarkSet(std::vector<Landmark> entries) {
  for (auto& e : entries) add(std::move(e.label), e.point);
}

void LandmarkSet::add(std::string label, WorldPoint point) {
  if (find(label)) throw Error(ErrorCode::InvalidRequest, "duplicate landmark label '" + label + "'");
  entries_.push_back({std::move(label), point});
}

const WorldPoint* LandmarkSet::find(std::string_view label) const {
  const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Landmark& l) { return l.label == label; });
  return it == entries_.end() ? nullptr : &it->point;
}

std::size_t ReconstructionResult::failures() const {
  return static_cast<std::size_t>(std::count_if(diagnostics.begin(), diagnostics.end(), [](const auto& d) { return !d.ok; }));
}

PointDiagnostics reconstruct_with_diagnostics(const StereoPair& pair, const ScannerCalibration& cal) {
  PointDiagnostics d;
  d.label = pair.label;
  d.row_mismatch = row_mismatch(pair);
  d.row_warning = row_mismatch_warning(pair);
  try {
    const WorldPoint p = reconstruct(pair, cal);
    const double ef = image_distance(project_frontal(p, cal), pair.frontal);
    const double el = image_distance(project_lateral(p, cal), pair.lateral);
    d.point = p;
    d.residual_px = std::sqrt(0.5 * (ef * ef + el * el));
    d.ok = true;
  } catch (const Error& e) {
    d.error = std::string(to_string(e.code())) + ": " + e.what();
  }
  return d;
}

ReconstructionResult reconstruct_set(const std::vector<StereoPair>& pairs, const ScannerCalibration& cal) {
  std::set<std::string_view> seen;
  for (const auto& p : pairs) {
    if (!seen.insert(p.label).second) throw Error(ErrorCode::InvalidRequest, "duplicate landmark label '" + p.label + "'");
  }
  ReconstructionResult out;
  out.diagnostics.reserve(pairs.size());
  for (const auto& pair : pairs) {
    auto d = reconstruct_with_diagnostics(pair, cal);
    if (d.ok) out.landmarks.add(d.label, *d.point);
    out.diagnostics.push_back(std::move(d));
  }
  return out;
}

PairsInput pairs_from_csv(const CsvTable& table) {
  const int c_label = table.require_column("label");
  const int c_view = table.require_column("view");
  const int c_u = table.require_column("u");
  const int c_v = table.require_column("v");

  struct Partial {
    std::optional<ImagePoint> frontal;
    std::optional<ImagePoint> lateral;
  };
  std::vector<std::string> order;
  std::map<std::string, Partial> partial;

  for (const auto& row : table.rows) {
    const std::string& label = row.fields[c_label];
    if (label.empty()) throw Error(ErrorCode::ParseError, "CSV line " + std::to_string(row.line) + ": empty label");
    View view;
    try {
      view = parse_view(row.fields[c_view]);
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, "CSV line " + std::to_string(row.line) + ": " + e.what());
    }
    const ImagePoint ip{view, parse_number(row.fields[c_u], row.line, "u"), parse_number(row.fields[c_v], row.line, "v")};
    auto [it, inserted] = partial.try_emplace(label);
    if (inserted) order.push_back(label);
    auto& slot = view == View::Frontal ? it->second.frontal : it->second.lateral;
    if (slot) {
      throw Error(ErrorCode::ParseError, "CSV line " + std::to_string(row.line) + ": second " +
                                             std::string(to_string(view)) + " entry for '" + label + "'");
    }
    slot = ip;
  }

  PairsInput out;
  for (const auto& label : order) {
    const auto& p = partial.at(label);
    if (p.frontal && p.lateral) out.pairs.push_back({label, *p.frontal, *p.lateral});
    else out.incomplete.push_back(label);
  }
  return out;
}

void write_pairs_csv(std::ostream& out, const std::vector<StereoPair>& pairs) {
  out << "label,view,u,v\n";
  for (const auto& p : pairs) {
    for (const ImagePoint* ip : {&p.frontal, &p.lateral}) {
      out << p.label << ',' << to_string(ip->view) << ',' << format_number(ip->u) << ',' << format_number(ip->v) << '\n';
    }
  }
}

LandmarkSet landmarks_from_csv(const CsvTable& table) {
  const int c_label = table.require_column("label");
  const int c_x = table.require_column("x");
  const int c_y = table.require_column("y");
  const int c_z = table.require_column("z");
  LandmarkSet set;
  for (const auto& row : table.rows) {
    const WorldPoint p{parse_number(row.fields[c_x], row.line, "x"), parse_number(row.fields[c_y], row.line, "y"),
                       parse_number(row.fields[c_z], row.line, "z")};
    try {
      set.add(row.fields[c_label], p);
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, "CSV line " + std::to_string(row.line) + ": " + e.what());
    }
  }
  return set;
}

void write_landmarks_csv(std::ostream& out, const LandmarkSet& set) {
  out << "label,x,y,z\n";
  for (const auto& l : set.entries()) {
    out << l.label << ',' << format_number(l.point.x) << ',' << format_number(l.point.y) << ','
        << format_number(l.point.z) << '\n';
  }
}

}  // namespace biplanar
