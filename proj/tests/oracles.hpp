#pragma once

// Brute-force reference implementations used only by the tests. They share
// no code with the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "threshkit/stats.hpp"

namespace oracle {

using threshkit::stats::Alternative;

struct Counts {
  std::uint64_t wins = 0, losses = 0, ties = 0;
};

inline Counts pair_counts(const std::vector<double>& a, const std::vector<double>& b) {
  Counts c;
  for (double x : a) {
    for (double y : b) {
      if (x > y) ++c.wins;
      else if (x < y) ++c.losses;
      else ++c.ties;
    }
  }
  return c;
}

inline double cliffs_delta(const std::vector<double>& a, const std::vector<double>& b) {
  const auto c = pair_counts(a, b);
  return (static_cast<double>(c.wins) - static_cast<double>(c.losses)) /
         (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

inline double tail_p(const std::vector<double>& null_stats, double observed, Alternative alt) {
  double upper = 0, lower = 0;
  for (double s : null_stats) {
    if (s >= observed - 1e-9) ++upper;
    if (s <= observed + 1e-9) ++lower;
  }
  upper /= static_cast<double>(null_stats.size());
  lower /= static_cast<double>(null_stats.size());
  if (alt == Alternative::greater) return upper;
  if (alt == Alternative::less) return lower;
  return std::min(1.0, 2.0 * std::min(upper, lower));
}

/// Every way of labelling m of the pooled observations as the first sample.
inline double mwu_p(const std::vector<double>& a, const std::vector<double>& b, Alternative alt) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t total = pooled.size();
  std::vector<bool> pick(total, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(a.size()), true);
  std::vector<double> stats;
  do {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < total; ++i) (pick[i] ? x : y).push_back(pooled[i]);
    const auto c = pair_counts(x, y);
    stats.push_back(static_cast<double>(c.wins) + 0.5 * static_cast<double>(c.ties));
  } while (std::prev_permutation(pick.begin(), pick.end()));
  const auto c = pair_counts(a, b);
  return tail_p(stats, static_cast<double>(c.wins) + 0.5 * static_cast<double>(c.ties), alt);
}

/// All 2^n sign assignments of the ranked absolute differences (no ties in |d|).
inline double signed_rank_p(const std::vector<double>& x, double mu, Alternative alt) {
  std::vector<double> d;
  for (double v : x) {
    if (v != mu) d.push_back(v - mu);
  }
  if (d.empty()) return 1.0;
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
  std::vector<double> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = static_cast<double>(r + 1);
  double observed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0) observed += rank[i];
  }
  std::vector<double> stats;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) w += rank[i];
    }
    stats.push_back(w);
  }
  return tail_p(stats, observed, alt);
}

inline double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  double conc = 0, disc = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) ++tx;
      else if (dy == 0) ++ty;
      else if ((dx > 0) == (dy > 0)) ++conc;
      else ++disc;
    }
  }
  return (conc - disc) / std::sqrt((conc + disc + tx) * (conc + disc + ty));
}

inline std::vector<double> walsh(const std::vector<double>& x) {
  std::vector<double> w;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i; j < x.size(); ++j) w.push_back((x[i] + x[j]) / 2.0);
  }
  std::sort(w.begin(), w.end());
  return w;
}

inline double median_sorted(const std::vector<double>& s) {
  const std::size_t n = s.size();
  return n % 2 ? s[n / 2] : (s[n / 2 - 1] + s[n / 2]) / 2.0;
}

/// Pearson correlation, two-pass.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Average ranks by counting: rank = #less + (#equal + 1) / 2.
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<double> r;
  for (double v : x) {
    double less = 0, equal = 0;
    for (double u : x) {
      if (u < v) ++less;
      else if (u == v) ++equal;
    }
    r.push_back(less + (equal + 1.0) / 2.0);
  }
  return r;
}

}  // namespace oracle
