#pragma once

// Minimal CSV helpers: header-indexed rows, '#' comment lines skipped.

#include <boost/tokenizer.hpp>

#include <charconv>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ordint/error.hpp"

namespace ordint::csv {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_line(const std::string& line) {
  using Sep = boost::escaped_list_separator<char>;
  boost::tokenizer<Sep> tok(line, Sep('\\', ',', '"'));
  std::vector<std::string> out;
  for (const auto& field : tok) out.push_back(trim(field));
  return out;
}

class Table {
 public:
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based line number of each row in the source, for error reports.
  std::vector<std::size_t> line_numbers;

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }

  std::size_t require(const std::string& name) const {
    auto c = column(name);
    if (!c) throw ConfigError("missing CSV column '" + name + "'");
    return *c;
  }
};

inline Table read(std::istream& in) {
  Table t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
      line.erase(0, 3);
    if (trim(line).empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    try {
      fields = split_line(line);
    } catch (const boost::escaped_list_error&) {
      if (!have_header) throw DataError("malformed CSV header");
      fields.clear();  // kept as an empty row so callers can count the skip
    }
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(lineno);
  }
  if (!have_header) throw DataError("CSV input has no header row");
  return t;
}

inline std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\n\\") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << quote(fields[i]);
  }
  out << '\n';
}

// Shortest round-trip text for a double.
inline std::string fmt(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace ordint::csv
