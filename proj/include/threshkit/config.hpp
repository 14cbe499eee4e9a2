#pragma once

// Key-value configuration file ("key = value", '#' comments, lists
// comma-separated). Keys mirror PipelineConfig; unknown keys are errors.

#include <charconv>
#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "threshkit/error.hpp"
#include "threshkit/io.hpp"
#include "threshkit/selection.hpp"

namespace threshkit {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    if (comma == std::string_view::npos) comma = s.size();
    auto item = trim(s.substr(start, comma - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = comma + 1;
  }
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InputError("config: " + key + " expects a number, got '" + v + "'");
  }
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || p != v.data() + v.size()) {
    throw InputError("config: " + key + " expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

}  // namespace detail

inline void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "alpha") cfg.alpha = parse_real(key, value);
  else if (key == "pearson_cutoff") cfg.pearson_cutoff = parse_real(key, value);
  else if (key == "rank_cutoff") cfg.rank_cutoff = parse_real(key, value);
  else if (key == "min_abs_delta") cfg.min_abs_delta = parse_real(key, value);
  else if (key == "min_precision") cfg.min_precision = parse_real(key, value);
  else if (key == "intervals") cfg.intervals = parse_count(key, value);
  else if (key == "preference_order") cfg.preference_order = split_list(value);
  else if (key == "include") cfg.include = split_list(value);
  else if (key == "exclude") cfg.exclude = split_list(value);
  else if (key == "qa_include") cfg.qa_include = split_list(value);
  else if (key == "exact_limit_mwu") cfg.exact_limits.mann_whitney = parse_count(key, value);
  else if (key == "exact_limit_signed_rank") cfg.exact_limits.signed_rank = parse_count(key, value);
  else if (key == "histogram_bins") cfg.histogram_bins = parse_count(key, value);
  else throw InputError("config: unknown key '" + key + "'");
}

inline PipelineConfig parse_config(std::string_view text, const std::string& source = "<config>") {
  PipelineConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw InputError(source + ": line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set_config_value(cfg, detail::trim(std::string_view(body).substr(0, eq)),
                       detail::trim(std::string_view(body).substr(eq + 1)));
    } catch (const InputError& e) {
      throw InputError(source + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), path.string());
}

/// Canonical rendering (stable key order) used for manifests and run ids.
inline std::string render_config(const PipelineConfig& cfg) {
  auto list = [](const std::vector<std::string>& v) { return fmt::format("{}", fmt::join(v, ",")); };
  std::string out;
  out += fmt::format("alpha = {}\n", cfg.alpha);
  out += fmt::format("pearson_cutoff = {}\n", cfg.pearson_cutoff);
  out += fmt::format("rank_cutoff = {}\n", cfg.rank_cutoff);
  out += fmt::format("min_abs_delta = {}\n", cfg.min_abs_delta);
  out += fmt::format("min_precision = {}\n", cfg.min_precision);
  out += fmt::format("intervals = {}\n", cfg.intervals);
  out += fmt::format("preference_order = {}\n", list(cfg.preference_order));
  out += fmt::format("include = {}\n", list(cfg.include));
  out += fmt::format("exclude = {}\n", list(cfg.exclude));
  out += fmt::format("qa_include = {}\n", list(cfg.qa_include));
  out += fmt::format("exact_limit_mwu = {}\n", cfg.exact_limits.mann_whitney);
  out += fmt::format("exact_limit_signed_rank = {}\n", cfg.exact_limits.signed_rank);
  out += fmt::format("histogram_bins = {}\n", cfg.histogram_bins);
  return out;
}

}  // namespace threshkit
