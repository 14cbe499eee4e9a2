#pragma once

// Nonparametric statistics kernel: ranks, correlation coefficients, the
// Wilcoxon-Mann-Whitney and signed-rank tests (exact null distributions for
// small samples, tie- and continuity-corrected normal approximation
// otherwise), Cliff's delta, Hodges-Lehmann estimation and quantiles.
//
// Everything here is a pure function of its arguments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "threshkit/error.hpp"

namespace threshkit::stats {

enum class Alternative { two_sided, greater, less };
enum class Method { exact, normal_approx };

inline const char* to_string(Alternative a) {
  switch (a) {
    case Alternative::two_sided: return "two_sided";
    case Alternative::greater: return "greater";
    case Alternative::less: return "less";
  }
  return "?";
}

inline const char* to_string(Method m) { return m == Method::exact ? "exact" : "normal_approx"; }

struct TestResult {
  double statistic = 0.0;  // U (two-sample) or W+ (one-sample)
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;  // 0 for one-sample tests
  Method method = Method::exact;
  Alternative alternative = Alternative::two_sided;

  bool rejects(double alpha) const noexcept { return p_value < alpha; }
};

struct EffectSize {
  double cliffs_delta = 0.0;
  // Pair counts behind delta: wins = #{a_i > b_j}, losses = #{a_i < b_j}.
  std::uint64_t wins = 0;
  std::uint64_t losses = 0;
  std::uint64_t ties = 0;
};

struct ExactLimits {
  std::size_t mann_whitney = 20;  // per sample
  std::size_t signed_rank = 25;   // effective n
};

// ---------------------------------------------------------------------------
// Basics
// ---------------------------------------------------------------------------

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Upper tail 1 - Phi(z) without cancellation for large z.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

inline double clamp01(double p) { return std::clamp(p, 0.0, 1.0); }

template <typename T>
std::vector<double> to_doubles(std::span<const T> values) {
  return std::vector<double>(values.begin(), values.end());
}

inline double mean(std::span<const double> x) {
  if (x.empty()) throw InputError("mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Linear interpolation at index p*(n-1) over the sorted values.
inline double quantile_type7(std::span<const double> values, double p) {
  if (values.empty()) throw InputError("quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("quantile probability outside [0,1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

inline double median(std::span<const double> values) { return quantile_type7(values, 0.5); }

struct FiveNumber {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

inline FiveNumber five_number(std::span<const double> values) {
  return {quantile_type7(values, 0.0), quantile_type7(values, 0.25), quantile_type7(values, 0.5),
          quantile_type7(values, 0.75), quantile_type7(values, 1.0)};
}

/// Tied values share the mean of the ranks they span (1-based).
inline std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

/// Sum of t^3 - t over tie groups of `sorted`.
inline double tie_term(std::span<const double> sorted) {
  double acc = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    acc += t * t * t - t;
    i = j;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("pearson: length mismatch");
  if (x.size() < 2) throw InputError("pearson: need at least two observations");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateError("undefined correlation: constant column");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("spearman: length mismatch");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  return pearson(rx, ry);
}

namespace detail {

// Merge sort counting inversions (strictly decreasing pairs).
inline std::uint64_t count_swaps(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = count_swaps(v, buf, lo, mid) + count_swaps(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

inline std::uint64_t tied_pairs(std::span<const double> sorted) {
  std::uint64_t acc = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const std::uint64_t t = j - i;
    acc += t * (t - 1) / 2;
    i = j;
  }
  return acc;
}

}  // namespace detail

/// Kendall's tau-b in O(n log n) (Knight's algorithm).
inline double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("kendall: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw InputError("kendall: need at least two observations");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  // Ties in x and joint ties in (x, y).
  std::uint64_t tx = 0, txy = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const std::uint64_t t = j - i;
    tx += t * (t - 1) / 2;
    for (std::size_t a = i; a < j;) {
      std::size_t b = a + 1;
      while (b < j && y[order[b]] == y[order[a]]) ++b;
      const std::uint64_t u = b - a;
      txy += u * (u - 1) / 2;
      a = b;
    }
    i = j;
  }

  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  const std::uint64_t swaps = detail::count_swaps(ys, buf, 0, n);
  const std::uint64_t ty = detail::tied_pairs(ys);

  const double n0 = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const double denom_x = n0 - static_cast<double>(tx);
  const double denom_y = n0 - static_cast<double>(ty);
  if (denom_x == 0.0 || denom_y == 0.0) throw DegenerateError("undefined correlation: all-tied column");
  // concordant - discordant = n0 - tx - ty + txy - 2 * discordant
  const double c_minus_d = n0 - static_cast<double>(tx) - static_cast<double>(ty) + static_cast<double>(txy) -
                           2.0 * static_cast<double>(swaps);
  return std::clamp(c_minus_d / std::sqrt(denom_x * denom_y), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Effect size
// ---------------------------------------------------------------------------

/// Cliff's delta via binary search against the sorted second sample.
inline EffectSize cliffs_delta(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("cliffs_delta: empty sample");
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sb.begin(), sb.end());
  EffectSize e;
  for (double v : a) {
    const auto lo = static_cast<std::uint64_t>(std::lower_bound(sb.begin(), sb.end(), v) - sb.begin());
    const auto hi = static_cast<std::uint64_t>(std::upper_bound(sb.begin(), sb.end(), v) - sb.begin());
    e.wins += lo;
    e.ties += hi - lo;
    e.losses += sb.size() - hi;
  }
  const double pairs = static_cast<double>(a.size()) * static_cast<double>(b.size());
  e.cliffs_delta = (static_cast<double>(e.wins) - static_cast<double>(e.losses)) / pairs;
  return e;
}

// ---------------------------------------------------------------------------
// Null distributions
// ---------------------------------------------------------------------------

/// Counts of U = 0..m*n over all C(m+n, m) label assignments (no ties).
inline std::vector<double> mann_whitney_null_counts(std::size_t m, std::size_t n) {
  // f[i][j] = count vector for i a's and j b's; build row by row over i.
  // f(i, j, u) = f(i-1, j, u-j) + f(i, j-1, u)
  std::vector<std::vector<double>> prev(n + 1), cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = {1.0};  // i = 0: only U = 0
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = {1.0};
    for (std::size_t j = 1; j <= n; ++j) {
      std::vector<double> v(i * j + 1, 0.0);
      const auto& up = prev[j];
      for (std::size_t u = 0; u < up.size(); ++u) v[u + j] += up[u];
      const auto& left = cur[j - 1];
      for (std::size_t u = 0; u < left.size(); ++u) v[u] += left[u];
      cur[j] = std::move(v);
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

/// Counts of W+ = 0..n(n+1)/2 over all 2^n sign assignments of ranks 1..n.
inline std::vector<double> signed_rank_null_counts(std::size_t n) {
  std::vector<double> c(n * (n + 1) / 2 + 1, 0.0);
  c[0] = 1.0;
  std::size_t top = 0;
  for (std::size_t r = 1; r <= n; ++r) {
    top += r;
    for (std::size_t w = top; w >= r; --w) c[w] += c[w - r];
  }
  return c;
}

namespace detail {

// P-value from integer null counts for an integer statistic s.
inline double exact_p(const std::vector<double>& counts, double s, Alternative alt) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  const auto k = static_cast<std::size_t>(std::llround(s));
  double upper = 0.0, lower = 0.0;
  for (std::size_t u = 0; u < counts.size(); ++u) {
    if (u >= k) upper += counts[u];
    if (u <= k) lower += counts[u];
  }
  upper /= total;
  lower /= total;
  switch (alt) {
    case Alternative::greater: return clamp01(upper);
    case Alternative::less: return clamp01(lower);
    case Alternative::two_sided: return clamp01(2.0 * std::min(upper, lower));
  }
  return 1.0;
}

inline double normal_p(double s, double mu, double sd, Alternative alt) {
  if (!(sd > 0.0)) return 1.0;
  switch (alt) {
    case Alternative::greater: return clamp01(normal_sf((s - mu - 0.5) / sd));
    case Alternative::less: return clamp01(normal_cdf((s - mu + 0.5) / sd));
    case Alternative::two_sided: {
      const double z = (std::abs(s - mu) - 0.5) / sd;
      return clamp01(2.0 * normal_sf(z));
    }
  }
  return 1.0;
}

inline bool has_ties(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return std::adjacent_find(v.begin(), v.end()) != v.end();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Two-sample test
// ---------------------------------------------------------------------------

/// Wilcoxon-Mann-Whitney test of a against b. U counts pairs with a_i > b_j
/// plus one half per tied pair; "greater" means a tends to be larger.
inline TestResult mwu_test(std::span<const double> a, std::span<const double> b,
                           Alternative alt = Alternative::two_sided, std::size_t exact_limit = 20) {
  if (a.empty() || b.empty()) throw InputError("mwu_test: empty sample");
  const auto e = cliffs_delta(a, b);
  TestResult r;
  r.statistic = static_cast<double>(e.wins) + 0.5 * static_cast<double>(e.ties);
  r.n1 = a.size();
  r.n2 = b.size();
  r.alternative = alt;

  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const bool ties = detail::has_ties(pooled);
  const double m = static_cast<double>(a.size());
  const double n = static_cast<double>(b.size());

  if (a.size() <= exact_limit && b.size() <= exact_limit && !ties) {
    r.method = Method::exact;
    r.p_value = detail::exact_p(mann_whitney_null_counts(a.size(), b.size()), r.statistic, alt);
    return r;
  }
  r.method = Method::normal_approx;
  std::sort(pooled.begin(), pooled.end());
  const double big_n = m + n;
  const double mu = m * n / 2.0;
  const double var = m * n / 12.0 * ((big_n + 1.0) - tie_term(pooled) / (big_n * (big_n - 1.0)));
  r.p_value = detail::normal_p(r.statistic, mu, std::sqrt(std::max(var, 0.0)), alt);
  return r;
}

// ---------------------------------------------------------------------------
// One-sample test
// ---------------------------------------------------------------------------

/// Wilcoxon signed-rank test of location mu. Zero differences are dropped;
/// with nothing left the test does not reject (p = 1).
inline TestResult signed_rank_test(std::span<const double> x, double mu, Alternative alt = Alternative::greater,
                                   std::size_t exact_limit = 25) {
  if (x.empty()) throw InputError("signed_rank_test: empty sample");
  std::vector<double> absd;
  std::vector<bool> positive;
  absd.reserve(x.size());
  positive.reserve(x.size());
  for (double v : x) {
    const double d = v - mu;
    if (d == 0.0) continue;
    absd.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  TestResult r;
  r.n1 = absd.size();
  r.alternative = alt;
  if (absd.empty()) {
    r.method = Method::exact;
    r.p_value = 1.0;
    return r;
  }
  const auto ranks = midranks(absd);
  double w = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (positive[i]) w += ranks[i];
  }
  r.statistic = w;

  std::sort(absd.begin(), absd.end());
  const bool ties = std::adjacent_find(absd.begin(), absd.end()) != absd.end();
  const std::size_t n = absd.size();
  if (n <= exact_limit && !ties) {
    r.method = Method::exact;
    r.p_value = detail::exact_p(signed_rank_null_counts(n), w, alt);
    return r;
  }
  r.method = Method::normal_approx;
  const double dn = static_cast<double>(n);
  const double mean_w = dn * (dn + 1.0) / 4.0;
  const double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_term(absd) / 48.0;
  r.p_value = detail::normal_p(w, mean_w, std::sqrt(std::max(var, 0.0)), alt);
  return r;
}

// ---------------------------------------------------------------------------
// Hodges-Lehmann
// ---------------------------------------------------------------------------

inline std::vector<double> walsh_averages(std::span<const double> x) {
  std::vector<double> out;
  out.reserve(x.size() * (x.size() + 1) / 2);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i; j < x.size(); ++j) out.push_back((x[i] + x[j]) / 2.0);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {

inline std::vector<double> unsorted_walsh(std::span<const double> x) {
  std::vector<double> out;
  out.reserve(x.size() * (x.size() + 1) / 2);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i; j < x.size(); ++j) out.push_back((x[i] + x[j]) / 2.0);
  }
  return out;
}

// k-th smallest (0-based), reordering v.
inline double select(std::vector<double>& v, std::size_t k) {
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

}  // namespace detail

/// Median of the Walsh averages (midpoint of the two middle values for an
/// even count).
inline double hodges_lehmann(std::span<const double> x) {
  if (x.empty()) throw InputError("hodges_lehmann: empty sample");
  auto w = detail::unsorted_walsh(x);
  const std::size_t m = w.size();
  const double upper = detail::select(w, m / 2);
  if (m % 2 == 1) return upper;
  const double lower = *std::max_element(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(m / 2));
  return (lower + upper) / 2.0;
}

/// Null CDF of W+ for sample size n: exact up to exact_limit, normal with
/// continuity correction beyond.
inline double signed_rank_null_cdf(std::size_t n, double w, std::size_t exact_limit = 25) {
  if (w < 0.0) return 0.0;
  if (n <= exact_limit) {
    const auto counts = signed_rank_null_counts(n);
    const double total = std::ldexp(1.0, static_cast<int>(n));
    const auto k = std::min(static_cast<std::size_t>(std::floor(w)), counts.size() - 1);
    double acc = 0.0;
    for (std::size_t u = 0; u <= k; ++u) acc += counts[u];
    return acc / total;
  }
  const double dn = static_cast<double>(n);
  const double mu = dn * (dn + 1.0) / 4.0;
  const double sd = std::sqrt(dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0);
  return normal_cdf((std::floor(w) + 0.5 - mu) / sd);
}

/// Order index (1-based) of the Walsh average that forms the one-sided
/// (1 - alpha) lower confidence bound: the largest k with P(W+ <= k-1) <= alpha.
/// Returns 0 when no k qualifies.
inline std::size_t hl_bound_rank(std::size_t n, double alpha, std::size_t exact_limit = 25) {
  const std::size_t total = n * (n + 1) / 2;
  if (n <= exact_limit) {
    const auto counts = signed_rank_null_counts(n);
    const double denom = std::ldexp(1.0, static_cast<int>(n));
    double acc = 0.0;
    std::size_t k = 0;
    for (std::size_t w = 0; w < counts.size(); ++w) {
      acc += counts[w];
      if (acc / denom <= alpha) k = w + 1;
      else break;
    }
    return std::min(k, total);
  }
  // CDF is monotone in w: binary search the largest w with cdf(w) <= alpha.
  if (signed_rank_null_cdf(n, 0.0, exact_limit) > alpha) return 0;
  std::size_t lo = 0, hi = total;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    if (signed_rank_null_cdf(n, static_cast<double>(mid), exact_limit) <= alpha) lo = mid;
    else hi = mid - 1;
  }
  return std::min(lo + 1, total);
}

inline double hl_lower_bound(std::span<const double> x, double alpha, std::size_t exact_limit = 25) {
  if (x.size() < 2) throw InputError("hl_lower_bound: need at least two observations");
  if (!(alpha > 0.0 && alpha < 0.5)) throw InputError("hl_lower_bound: alpha must lie in (0, 0.5)");
  const std::size_t k = hl_bound_rank(x.size(), alpha, exact_limit);
  if (k == 0) throw DegenerateError("alpha unattainable for n = " + std::to_string(x.size()));
  auto w = detail::unsorted_walsh(x);
  return detail::select(w, k - 1);
}

}  // namespace threshkit::stats
