#pragma once

// Number formatting and Markdown table rendering for reports.

#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace threshkit::fmtx {

/// Three decimals, "NA" for undefined values.
inline std::string fixed3(double v) {
  if (std::isnan(v)) return "NA";
  if (v == 0.0) v = 0.0;  // no "-0.000"
  auto s = fmt::format("{:.3f}", v);
  return s == "-0.000" ? "0.000" : s;
}

/// Scientific notation with three significant digits, e.g. "3.12E-109".
inline std::string pvalue(double p) {
  if (std::isnan(p)) return "NA";
  return fmt::format("{:.2E}", p);
}

inline std::string latex_pvalue(double p) {
  auto s = pvalue(p);
  const auto e = s.find('E');
  if (e == std::string::npos) return s;
  return "$" + s.substr(0, e) + "E{" + (s[e + 1] == '+' ? s.substr(e + 2) : s.substr(e + 1)) + "}$";
}

inline std::string markdown_table(const std::vector<std::string>& header,
                                  const std::vector<std::vector<std::string>>& rows) {
  std::string out = "|";
  for (const auto& h : header) out += " " + h + " |";
  out += "\n|";
  for (std::size_t i = 0; i < header.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
  out += "\n";
  for (const auto& r : rows) {
    out += "|";
    for (const auto& c : r) out += " " + c + " |";
    out += "\n";
  }
  return out;
}

inline std::string latex_row(const std::vector<std::string>& cells) {
  return fmt::format("{} \\\\ \\hline\n", fmt::join(cells, " & "));
}

}  // namespace threshkit::fmtx
