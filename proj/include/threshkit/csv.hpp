#pragma once

// Minimal RFC 4180 style delimited-text reader/writer. Fields may be quoted
// with '"'; embedded quotes are doubled. Lines starting with '#' before the
// header are metadata comments.

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "threshkit/error.hpp"

namespace threshkit::csv {

using Row = std::vector<std::string>;

struct Table {
  std::map<std::string, std::string> meta;  // from "# key=value" lines
  Row header;
  std::vector<Row> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

inline Row split_line(std::string_view line, char delim = ',') {
  Row out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline std::string quote(std::string_view field, char delim = ',') {
  if (field.find_first_of(std::string{delim} + "\"\n\r") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string join(const Row& row, char delim = ',') {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out.push_back(delim);
    out += quote(row[i], delim);
  }
  return out;
}

inline Table read(std::istream& in, const std::string& source = "<stream>", char delim = ',') {
  Table table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!have_header && !line.empty() && line.front() == '#') {
      auto body = std::string_view(line).substr(1);
      while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      if (auto eq = body.find('='); eq != std::string_view::npos) {
        table.meta.emplace(std::string(body.substr(0, eq)), std::string(body.substr(eq + 1)));
      }
      continue;
    }
    if (line.empty()) continue;
    Row row = split_line(line, delim);
    if (!have_header) {
      table.header = std::move(row);
      have_header = true;
      continue;
    }
    if (row.size() != table.header.size()) {
      throw InputError(source + ": row " + std::to_string(line_no) + ": expected " +
                       std::to_string(table.header.size()) + " columns, got " +
                       std::to_string(row.size()));
    }
    table.rows.push_back(std::move(row));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw InputError(source + ": missing header row");
  return table;
}

inline Table read_file(const std::filesystem::path& path, char delim = ',') {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return read(in, path.string(), delim);
}

inline std::string write(const Table& table, char delim = ',') {
  std::ostringstream out;
  for (const auto& [k, v] : table.meta) out << "# " << k << '=' << v << '\n';
  out << join(table.header, delim) << '\n';
  for (const auto& row : table.rows) out << join(row, delim) << '\n';
  return out.str();
}

}  // namespace threshkit::csv
