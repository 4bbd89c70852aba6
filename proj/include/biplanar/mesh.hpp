#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "biplanar/calibration.hpp"
#include "biplanar/geometry.hpp"
#include "biplanar/landmarks.hpp"
#include "biplanar/rigid.hpp"

namespace biplanar {

struct Mesh {
  std::string name = "mesh";
  std::vector<WorldPoint> vertices;
  std::vector<std::array<int, 3>> faces;    // 0-based vertex indices
  std::map<std::string, int> landmarks;     // label -> vertex index

  /// Throws InvalidRequest for out-of-range face or landmark indices.
  void validate() const;
  /// Positions of the named landmark vertices.
  LandmarkSet landmark_set() const;

  bool operator==(const Mesh&) const = default;
};

/// Axis-aligned box of 8 vertices and 12 outward-facing triangles.
Mesh make_box(const std::string& name, const WorldPoint& center, const WorldPoint& size);

/// Vertices mapped by R v + t; faces and labels untouched.
Mesh apply_transform(const RigidTransform& t, const Mesh& mesh);

/// One `o` object per mesh with global 1-based face indices. Landmark
/// vertices are recorded as `# landmark <label> <index>` comments.
void write_obj(std::ostream& out, const std::vector<Mesh>& meshes);
/// Reads the first object of an OBJ stream (v and f records; polygons are
/// fan-triangulated). Throws ParseError.
Mesh read_obj(std::istream& in);
Mesh read_obj_file(const std::filesystem::path& path);

/// Where the radiographs sit in the 3D scene.
struct ScenePlacement {
  ScannerCalibration cal;
  int rows = 0;                // 0 takes cal.rows
  std::string frontal_image;   // optional file references
  std::string lateral_image;
};

/// Frontal image on the x = 0 plane and lateral on the y = 0 plane, with
/// corner coordinates in mm (top-left, top-right, bottom-right, bottom-left as
/// seen in the image).
nlohmann::json scene_json(const std::vector<Mesh>& meshes, const std::optional<ScenePlacement>& images,
                          const std::string& obj_file);

/// Writes `path` (scene JSON) and, when meshes are given, `path` with an
/// `.obj` extension. Throws IoError.
void export_scene(const std::vector<Mesh>& meshes, const std::optional<ScenePlacement>& images,
                  const std::filesystem::path& path);

}  // namespace biplanar
