#include "biplanar/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include "biplanar/error.hpp"

namespace biplanar {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

[[noreturn]] void parse_error(const std::filesystem::path& file, const std::string& what) {
  throw Error(ErrorCode::ParseError, file.string() + ": " + what);
}

template <typename T, std::size_t N>
std::array<T, N> parse_tuple(const std::filesystem::path& file, const std::string& key, const std::string& value) {
  std::istringstream is(value);
  std::array<T, N> out{};
  for (auto& v : out) {
    if (!(is >> v)) parse_error(file, "expected " + std::to_string(N) + " values for " + key);
  }
  std::string extra;
  if (is >> extra) parse_error(file, "too many values for " + key);
  return out;
}

template <typename T>
T byteswap_value(T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  std::reverse(b, b + sizeof(T));
  std::memcpy(&v, b, sizeof(T));
  return v;
}

template <typename T>
std::vector<double> decode(const std::vector<char>& bytes, bool big_endian) {
  const std::size_t n = bytes.size() / sizeof(T);
  const bool swap = big_endian != (std::endian::native == std::endian::big);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    T v;
    std::memcpy(&v, bytes.data() + i * sizeof(T), sizeof(T));
    if (swap) v = byteswap_value(v);
    out[i] = static_cast<double>(v);
  }
  return out;
}

template <typename T>
void encode(std::ofstream& out, std::span<const double> data, bool round) {
  const bool swap = std::endian::native == std::endian::big;
  std::vector<T> buf(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    double v = data[i];
    if (round) {
      v = std::clamp(std::round(v), static_cast<double>(std::numeric_limits<T>::lowest()),
                     static_cast<double>(std::numeric_limits<T>::max()));
    }
    T t = static_cast<T>(v);
    buf[i] = swap ? byteswap_value(t) : t;
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(T)));
}

std::array<double, 3> triple(const nlohmann::json& spec, const char* key, double fallback) {
  if (!spec.contains(key)) return {fallback, fallback, fallback};
  const auto& v = spec.at(key);
  if (v.is_number()) return {v.get<double>(), v.get<double>(), v.get<double>()};
  if (v.is_array() && v.size() == 3) return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  throw Error(ErrorCode::ParseError, std::string("phantom field '") + key + "' must be a number or a 3-array");
}

}  // namespace

Volume read_metaimage(const std::filesystem::path& header) {
  std::ifstream in(header, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + header.string() + "'");

  std::map<std::string, std::string> fields;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) parse_error(header, "malformed header line '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    fields[key] = value;
    if (key == "ElementDataFile") break;  // always the last header entry
  }

  auto require = [&](const char* key) -> const std::string& {
    const auto it = fields.find(key);
    if (it == fields.end()) parse_error(header, std::string("missing ") + key);
    return it->second;
  };

  if (require("NDims") != "3") parse_error(header, "NDims must be 3");
  if (auto it = fields.find("CompressedData"); it != fields.end() && lower(it->second) == "true")
    parse_error(header, "compressed data is not supported");

  const auto dims = parse_tuple<int, 3>(header, "DimSize", require("DimSize"));
  std::array<double, 3> spacing{1, 1, 1};
  if (auto it = fields.find("ElementSpacing"); it != fields.end())
    spacing = parse_tuple<double, 3>(header, "ElementSpacing", it->second);
  std::array<double, 3> offset{0, 0, 0};
  for (const char* key : {"Offset", "Origin", "Position"}) {
    if (auto it = fields.find(key); it != fields.end()) {
      offset = parse_tuple<double, 3>(header, key, it->second);
      break;
    }
  }
  bool big_endian = false;
  for (const char* key : {"BinaryDataByteOrderMSB", "ElementByteOrderMSB"}) {
    if (auto it = fields.find(key); it != fields.end()) big_endian = lower(it->second) == "true";
  }
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) parse_error(header, "DimSize entries must be >= 1");
    if (!(spacing[a] > 0)) parse_error(header, "ElementSpacing entries must be positive");
  }

  const std::string& type = require("ElementType");
  std::size_t elem_size = 0;
  if (type == "MET_SHORT") elem_size = 2;
  else if (type == "MET_FLOAT") elem_size = 4;
  else parse_error(header, "unsupported ElementType " + type);

  const std::string& data_file = require("ElementDataFile");
  std::vector<char> bytes;
  if (data_file == "LOCAL") {
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  } else {
    const auto raw_path = header.parent_path() / data_file;
    std::ifstream raw(raw_path, std::ios::binary);
    if (!raw) throw Error(ErrorCode::IoError, "cannot open data file '" + raw_path.string() + "'");
    bytes.assign(std::istreambuf_iterator<char>(raw), std::istreambuf_iterator<char>());
  }

  const std::size_t expected =
      static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
  if (bytes.size() != expected * elem_size) {
    std::ostringstream os;
    os << header.string() << ": data holds " << bytes.size() / elem_size << " elements"
       << (bytes.size() % elem_size ? " (plus a partial element)" : "") << ", DimSize requires " << expected;
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }

  std::vector<double> data =
      elem_size == 2 ? decode<std::int16_t>(bytes, big_endian) : decode<float>(bytes, big_endian);
  return Volume({dims[0], dims[1], dims[2]}, {spacing[0], spacing[1], spacing[2]}, {offset[0], offset[1], offset[2]},
                std::move(data));
}

void write_metaimage(const Volume& vol, const std::filesystem::path& header, ElementType type) {
  auto raw_path = header;
  raw_path.replace_extension(".raw");

  std::ofstream raw(raw_path, std::ios::binary);
  if (!raw) throw Error(ErrorCode::IoError, "cannot write '" + raw_path.string() + "'");
  if (type == ElementType::Int16) encode<std::int16_t>(raw, vol.data(), true);
  else encode<float>(raw, vol.data(), false);
  if (!raw) throw Error(ErrorCode::IoError, "write failed for '" + raw_path.string() + "'");

  std::ofstream out(header);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + header.string() + "'");
  out.precision(std::numeric_limits<double>::max_digits10);
  const auto& d = vol.dims();
  const auto& s = vol.spacing();
  const auto& o = vol.origin();
  out << "ObjectType = Image\n"
      << "NDims = 3\n"
      << "BinaryData = True\n"
      << "BinaryDataByteOrderMSB = False\n"
      << "CompressedData = False\n"
      << "TransformMatrix = 1 0 0 0 1 0 0 0 1\n"
      << "Offset = " << o.x << ' ' << o.y << ' ' << o.z << '\n'
      << "ElementSpacing = " << s[0] << ' ' << s[1] << ' ' << s[2] << '\n'
      << "DimSize = " << d[0] << ' ' << d[1] << ' ' << d[2] << '\n'
      << "ElementType = " << (type == ElementType::Int16 ? "MET_SHORT" : "MET_FLOAT") << '\n'
      << "ElementDataFile = " << raw_path.filename().string() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + header.string() + "'");
}

Volume make_phantom(const nlohmann::json& spec) {
  if (!spec.is_object()) throw Error(ErrorCode::ParseError, "phantom description must be a JSON object");
  try {
    const std::string kind = spec.value("phantom", std::string("sphere"));
    const auto dims_d = triple(spec, "dims", 128);
    const auto spacing = triple(spec, "spacing", 2.0);
    const Volume::Dims dims{static_cast<int>(dims_d[0]), static_cast<int>(dims_d[1]), static_cast<int>(dims_d[2])};
    const double extent_z = dims[2] * spacing[2];
    const auto center = triple(spec, "center", 0.0);
    const WorldPoint c = spec.contains("center") ? WorldPoint{center[0], center[1], center[2]}
                                                 : WorldPoint{0, 0, -0.5 * extent_z};
    const WorldPoint origin{c.x - 0.5 * (dims[0] - 1) * spacing[0], c.y - 0.5 * (dims[1] - 1) * spacing[1],
                            c.z - 0.5 * (dims[2] - 1) * spacing[2]};

    const double radius = spec.value("radius", 50.0);
    const double value = spec.value("value", 1.0);
    const double background = spec.value("background", 0.0);
    if (!(radius > 0)) throw Error(ErrorCode::ParseError, "phantom radius must be positive");

    std::vector<WorldPoint> sphere_centers;
    double half_height = 0;
    if (kind == "sphere") {
      sphere_centers.push_back(c);
    } else if (kind == "spine") {
      const int count = spec.value("count", 2);
      const double gap = spec.value("gap", 2.5 * radius);
      if (count < 1) throw Error(ErrorCode::ParseError, "spine count must be >= 1");
      for (int i = 0; i < count; ++i) sphere_centers.push_back(c + WorldPoint{0, 0, (i - 0.5 * (count - 1)) * gap});
    } else if (kind == "cylinder") {
      half_height = 0.5 * spec.value("height", 2.0 * radius);
    } else {
      throw Error(ErrorCode::ParseError, "unknown phantom type '" + kind + "'");
    }

    Volume vol(dims, {spacing[0], spacing[1], spacing[2]}, origin);
    const double r2 = radius * radius;
    for (int k = 0; k < dims[2]; ++k) {
      for (int j = 0; j < dims[1]; ++j) {
        for (int i = 0; i < dims[0]; ++i) {
          const WorldPoint p = vol.voxel_center(i, j, k);
          bool inside = false;
          if (kind == "cylinder") {
            const double dx = p.x - c.x, dy = p.y - c.y;
            inside = dx * dx + dy * dy <= r2 && std::abs(p.z - c.z) <= half_height;
          } else {
            for (const auto& sc : sphere_centers) inside = inside || dot(p - sc, p - sc) <= r2;
          }
          vol.at(i, j, k) = inside ? value : background;
        }
      }
    }
    return vol;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("phantom description: ") + e.what());
  }
}

Volume load_volume(const std::filesystem::path& path) {
  const std::string ext = lower(path.extension().string());
  if (ext == ".json") {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    nlohmann::json spec;
    try {
      in >> spec;
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    return make_phantom(spec);
  }
  if (ext == ".mhd" || ext == ".mha") return read_metaimage(path);
  throw Error(ErrorCode::ParseError, "unsupported volume file '" + path.string() + "'");
}

}  // namespace biplanar
