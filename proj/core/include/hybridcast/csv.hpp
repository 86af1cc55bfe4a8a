#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "hybridcast/common.hpp"

namespace hybridcast::csv {

struct Row {
  std::size_t line = 0;  // 1-based line in the source
  std::vector<std::string> fields;
};

// A header line plus data rows. Blank lines and lines starting with '#' are
// skipped; fields are trimmed. Double-quoted fields may contain commas.
struct Table {
  std::string source;
  std::vector<std::string> header;
  std::vector<Row> rows;

  /// Index of a header column, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
  /// Throws ParseError naming the header line unless the header equals `expected`.
  void require_header(const std::vector<std::string>& expected) const;
  std::size_t header_line = 0;
};

Table parse(std::string_view text, std::string source);
Table read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

// Field parsing with row-tagged errors.
double to_double(const Row& row, std::size_t col, const Table& table);
long to_long(const Row& row, std::size_t col, const Table& table);
int to_count(const Row& row, std::size_t col, const Table& table);  // nonnegative
bool to_bool(const Row& row, std::size_t col, const Table& table);
Date to_date(const Row& row, std::size_t col, const Table& table);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Fixed-point formatting; probabilities are written with 6 decimals.
std::string fixed(double value, int decimals = 6);
/// Shortest round-trip representation of a double.
std::string exact(double value);

}  // namespace hybridcast::csv
