#include "biplanar/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "biplanar/error.hpp"

namespace biplanar {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

int CsvTable::require_column(std::string_view name) const {
  const int c = column(name);
  if (c < 0) throw Error(ErrorCode::ParseError, "CSV header lacks column '" + std::string(name) + "'");
  return c;
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto fields = split(t);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      std::ostringstream os;
      os << "CSV line " << line_no << ": expected " << table.header.size() << " fields, found " << fields.size();
      throw Error(ErrorCode::ParseError, os.str());
    }
    table.rows.push_back({line_no, std::move(fields)});
  }
  if (!have_header) throw Error(ErrorCode::ParseError, "CSV input has no header row");
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return read_csv(in);
}

CsvTable parse_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  return read_csv(in);
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view text, int line, std::string_view column) {
  double v = 0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
    std::ostringstream os;
    os << "CSV line " << line << ": column '" << column << "' is not a finite number ('" << text << "')";
    throw Error(ErrorCode::ParseError, os.str());
  }
  return v;
}

}  // namespace biplanar
