#pragma once

#include <charconv>
#include <chrono>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "threshkit/error.hpp"

namespace threshkit {

using Date = std::chrono::sys_days;

/// Parses an ISO-8601 calendar date (YYYY-MM-DD). A trailing time part
/// ("T...") is accepted and ignored.
inline Date parse_date(std::string_view text) {
  if (auto t = text.find('T'); t != std::string_view::npos) text = text.substr(0, t);
  auto fail = [&] { return InputError("invalid ISO-8601 date '" + std::string(text) + "'"); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw fail();
  int y = 0;
  unsigned m = 0, d = 0;
  auto num = [&](std::string_view s, auto& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || p != s.data() + s.size()) throw fail();
  };
  num(text.substr(0, 4), y);
  num(text.substr(5, 2), m);
  num(text.substr(8, 2), d);
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw fail();
  return Date{ymd};
}

inline std::string format_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

}  // namespace threshkit
