#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace biplanar {

/// Minimal comma-separated table: a required header row, no quoting, fields
/// trimmed of surrounding whitespace. Blank lines and lines starting with '#'
/// are skipped.
struct CsvTable {
  struct Row {
    int line = 0;  // 1-based line number in the source
    std::vector<std::string> fields;
  };

  std::vector<std::string> header;
  std::vector<Row> rows;

  /// Index of `name` in the header, or -1.
  int column(std::string_view name) const;
  /// Throws ParseError naming the missing column.
  int require_column(std::string_view name) const;
};

/// Throws ParseError with the line number for ragged rows.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);
CsvTable parse_csv(std::string_view text);

/// Shortest round-trip decimal representation.
std::string format_number(double v);
/// Throws ParseError mentioning `line` when `text` is not a finite number.
double parse_number(std::string_view text, int line, std::string_view column);

}  // namespace biplanar
