#include "hybridcast/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hybridcast::csv {

namespace {

std::vector<std::string> split_line(std::string_view line, std::size_t line_no, const std::string& source) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      if (!trim(current).empty()) throw ParseError(source, line_no, "unexpected quote inside field");
      current.clear();
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? current : std::string(trim(current)));
      current.clear();
      was_quoted = false;
    } else {
      current.push_back(c);
    }
  }
  if (quoted) throw ParseError(source, line_no, "unterminated quoted field");
  fields.push_back(was_quoted ? current : std::string(trim(current)));
  return fields;
}

[[noreturn]] void field_error(const Row& row, std::size_t col, const Table& table, const std::string& what) {
  const std::string name = col < table.header.size() ? table.header[col] : std::to_string(col);
  throw ParseError(table.source, row.line,
                   "row " + std::to_string(row.line) + ", column '" + name + "': " + what);
}

const std::string& field(const Row& row, std::size_t col, const Table& table) {
  if (col >= row.fields.size()) field_error(row, col, table, "missing field");
  return row.fields[col];
}

}  // namespace

std::optional<std::size_t> Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

void Table::require_header(const std::vector<std::string>& expected) const {
  if (header == expected) return;
  std::string want;
  for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
  std::string got;
  for (const auto& h : header) got += (got.empty() ? "" : ",") + h;
  throw ParseError(source, header_line, "schema mismatch: expected header '" + want + "', got '" + got + "'");
}

Table parse(std::string_view text, std::string source) {
  Table table;
  table.source = std::move(source);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  // Skip a UTF-8 byte order mark.
  if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    auto fields = split_line(line, line_no, table.source);
    if (!have_header) {
      for (auto& f : fields) f = to_lower(f);
      table.header = std::move(fields);
      table.header_line = line_no;
      have_header = true;
    } else {
      if (fields.size() != table.header.size())
        throw ParseError(table.source, line_no,
                         "row " + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                             " fields, found " + std::to_string(fields.size()));
      table.rows.push_back(Row{line_no, std::move(fields)});
    }
    if (end == text.size()) break;
  }
  if (!have_header) throw ParseError(table.source, 1, "missing header line");
  return table;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Table read_file(const std::filesystem::path& path) { return parse(read_text(path), path.string()); }

double to_double(const Row& row, std::size_t col, const Table& table) {
  const auto& f = field(row, col, table);
  double value = 0.0;
  const auto* last = f.data() + f.size();
  const auto [ptr, ec] = std::from_chars(f.data(), last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value))
    field_error(row, col, table, "not a number: '" + f + "'");
  return value;
}

long to_long(const Row& row, std::size_t col, const Table& table) {
  const auto& f = field(row, col, table);
  long value = 0;
  const auto* last = f.data() + f.size();
  const auto [ptr, ec] = std::from_chars(f.data(), last, value);
  if (ec != std::errc{} || ptr != last) field_error(row, col, table, "not an integer: '" + f + "'");
  return value;
}

int to_count(const Row& row, std::size_t col, const Table& table) {
  const long v = to_long(row, col, table);
  if (v < 0) field_error(row, col, table, "negative count " + std::to_string(v));
  return static_cast<int>(v);
}

bool to_bool(const Row& row, std::size_t col, const Table& table) {
  const auto v = to_lower(field(row, col, table));
  if (v == "yes" || v == "true" || v == "1" || v == "y") return true;
  if (v == "no" || v == "false" || v == "0" || v == "n") return false;
  field_error(row, col, table, "expected yes/no, got '" + v + "'");
}

Date to_date(const Row& row, std::size_t col, const Table& table) {
  const auto& f = field(row, col, table);
  auto d = Date::try_parse(f);
  if (!d) field_error(row, col, table, "unparsable date '" + f + "'");
  return *d;
}

std::string escape(std::string_view f) {
  if (f.find_first_of(",\"\n") == std::string_view::npos && trim(f).size() == f.size()) return std::string(f);
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

std::string fixed(double value, int decimals) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s = buf;
  if (s.size() > 1 && s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string exact(double value) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace hybridcast::csv
