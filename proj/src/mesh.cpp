#include "biplanar/mesh.hpp"

#include <fstream>
#include <sstream>

#include "biplanar/csv.hpp"
#include "biplanar/error.hpp"

namespace biplanar {

namespace {

nlohmann::json point_json(const WorldPoint& p) { return {p.x, p.y, p.z}; }

nlohmann::json image_plane(View view, const ScenePlacement& s) {
  const auto& cal = s.cal;
  const int rows = s.rows > 0 ? s.rows : cal.rows;
  const int last_col = view == View::Frontal ? cal.cols_frontal : cal.cols_lateral;
  // Pixel edges sit half a pixel outside the pixel centres.
  const ImagePoint tl{view, -0.5, -0.5}, tr{view, last_col + 0.5, -0.5};
  const ImagePoint br{view, last_col + 0.5, rows - 0.5}, bl{view, -0.5, rows - 0.5};
  const double pitch = view == View::Frontal ? cal.pitch_frontal : cal.pitch_lateral;
  nlohmann::json j = {
      {"plane", view == View::Frontal ? "x=0" : "y=0"},
      {"columns", last_col + 1},
      {"rows", rows},
      {"width_mm", (last_col + 1) * pitch},
      {"height_mm", rows * cal.pitch_vertical},
      {"pixel_pitch_mm", {pitch, cal.pitch_vertical}},
      {"corners", {point_json(isocenter_point(tl, cal)), point_json(isocenter_point(tr, cal)),
                   point_json(isocenter_point(br, cal)), point_json(isocenter_point(bl, cal))}},
  };
  const std::string& file = view == View::Frontal ? s.frontal_image : s.lateral_image;
  if (!file.empty()) j["file"] = file;
  return j;
}

}  // namespace

void Mesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (const auto& f : faces) {
    for (int idx : f) {
      if (idx < 0 || idx >= n) throw Error(ErrorCode::InvalidRequest, "mesh '" + name + "' face index out of range");
    }
  }
  for (const auto& [label, idx] : landmarks) {
    if (idx < 0 || idx >= n) throw Error(ErrorCode::InvalidRequest, "mesh '" + name + "' landmark '" + label + "' out of range");
  }
}

LandmarkSet Mesh::landmark_set() const {
  LandmarkSet set;
  for (const auto& [label, idx] : landmarks) set.add(label, vertices.at(idx));
  return set;
}

Mesh make_box(const std::string& name, const WorldPoint& c, const WorldPoint& size) {
  Mesh m;
  m.name = name;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i)
        m.vertices.push_back({c.x + (i - 0.5) * size.x, c.y + (j - 0.5) * size.y, c.z + (k - 0.5) * size.z});
  // vertex index = i + 2j + 4k
  m.faces = {{0, 2, 1}, {1, 2, 3},   // z-
             {4, 5, 6}, {5, 7, 6},   // z+
             {0, 1, 4}, {1, 5, 4},   // y-
             {2, 6, 3}, {3, 6, 7},   // y+
             {0, 4, 2}, {2, 4, 6},   // x-
             {1, 3, 5}, {3, 7, 5}};  // x+
  return m;
}

Mesh apply_transform(const RigidTransform& t, const Mesh& mesh) {
  Mesh out = mesh;
  for (auto& v : out.vertices) v = t.apply(v);
  return out;
}

void write_obj(std::ostream& out, const std::vector<Mesh>& meshes) {
  out << "# units: mm\n";
  int base = 1;
  for (const auto& m : meshes) {
    out << "o " << m.name << '\n';
    for (const auto& [label, idx] : m.landmarks) out << "# landmark " << label << ' ' << idx << '\n';
    for (const auto& v : m.vertices)
      out << "v " << format_number(v.x) << ' ' << format_number(v.y) << ' ' << format_number(v.z) << '\n';
    for (const auto& f : m.faces) out << "f " << f[0] + base << ' ' << f[1] + base << ' ' << f[2] + base << '\n';
    base += static_cast<int>(m.vertices.size());
  }
}

Mesh read_obj(std::istream& in) {
  Mesh m;
  std::string line;
  int line_no = 0;
  bool seen_object = false;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::ParseError, "OBJ line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream is(line);
    std::string tag;
    if (!(is >> tag)) continue;
    if (tag == "o") {
      if (seen_object && !m.vertices.empty()) break;
      seen_object = true;
      std::getline(is >> std::ws, m.name);
    } else if (tag == "v") {
      WorldPoint p;
      if (!(is >> p.x >> p.y >> p.z)) fail("vertex needs three coordinates");
      m.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (is >> tok) {
        try {
          int i = std::stoi(tok.substr(0, tok.find('/')));
          idx.push_back(i < 0 ? static_cast<int>(m.vertices.size()) + i : i - 1);
        } catch (const std::exception&) {
          fail("bad face index '" + tok + "'");
        }
      }
      if (idx.size() < 3) fail("face needs at least three vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) m.faces.push_back({idx[0], idx[k], idx[k + 1]});
    } else if (tag == "#") {
      std::string word, label;
      int idx = 0;
      if (is >> word && word == "landmark") {
        if (!(is >> label >> idx)) fail("malformed landmark comment");
        m.landmarks[label] = idx;
      }
    }
  }
  try {
    m.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return m;
}

Mesh read_obj_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  return read_obj(in);
}

nlohmann::json scene_json(const std::vector<Mesh>& meshes, const std::optional<ScenePlacement>& images,
                          const std::string& obj_file) {
  nlohmann::json j = {{"units", "mm"}, {"frame", "X toward frontal detector, Y toward lateral detector, Z up"}};
  if (!meshes.empty()) {
    nlohmann::json objects = nlohmann::json::array();
    for (const auto& m : meshes) objects.push_back(m.name);
    j["meshes"] = {{"file", obj_file}, {"objects", objects}};
  }
  if (images) j["images"] = {{"frontal", image_plane(View::Frontal, *images)}, {"lateral", image_plane(View::Lateral, *images)}};
  return j;
}

void export_scene(const std::vector<Mesh>& meshes, const std::optional<ScenePlacement>& images,
                  const std::filesystem::path& path) {
  auto obj_path = path;
  obj_path.replace_extension(".obj");
  if (!meshes.empty()) {
    std::ofstream obj(obj_path);
    if (!obj) throw Error(ErrorCode::IoError, "cannot write '" + obj_path.string() + "'");
    write_obj(obj, meshes);
    if (!obj) throw Error(ErrorCode::IoError, "write failed for '" + obj_path.string() + "'");
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << scene_json(meshes, images, obj_path.filename().string()).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

}  // namespace biplanar
