#pragma once

// Synthetic multi-project datasets with known faulty/non-faulty separation,
// plus exact ground truth (pseudo-medians of the faulty populations) computed
// by enumerating the discrete support.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "threshkit/dataset.hpp"
#include "threshkit/error.hpp"
#include "threshkit/io.hpp"

namespace threshkit::synth {

struct NegativeBinomial {
  int successes = 2;   // r
  double p = 0.3;      // success probability
};

struct DiscretizedLogNormal {
  double mu = 2.0;     // of log-values
  double sigma = 0.8;
};

struct Discrete {
  std::vector<std::int64_t> values;
  std::vector<double> weights;
};

using Family = std::variant<NegativeBinomial, DiscretizedLogNormal, Discrete>;

struct CorrelationParent {
  std::string metric;
  double noise = 0.0;  // child = parent + round(noise * own draw)
};

struct PopulationSpec {
  std::string metric;
  Family nonfaulty;
  std::int64_t faulty_shift = 0;
  bool is_signal = false;
  std::optional<CorrelationParent> parent;
};

struct ProjectSpec {
  std::string project_tag;
  std::size_t record_count = 0;
  double faulty_fraction = 0.15;
};

struct GenerationPlan {
  std::uint64_t seed = 1;
  std::string tool_tag = "synthetic";
  std::vector<ProjectSpec> projects;
  std::vector<PopulationSpec> populations;  // in generation order
};

inline Date synthetic_snapshot_date() { return parse_date("2024-01-01"); }

inline void validate(const GenerationPlan& plan) {
  if (plan.projects.empty()) throw InputError("plan: no projects");
  if (plan.populations.empty()) throw InputError("plan: no populations");
  for (const auto& p : plan.projects) {
    if (p.project_tag.empty()) throw InputError("plan: empty project tag");
    if (p.record_count < 2) throw InputError("plan: project " + p.project_tag + " needs at least 2 records");
    if (!(p.faulty_fraction > 0.0 && p.faulty_fraction < 1.0)) {
      throw InputError("plan: faulty_fraction of " + p.project_tag + " must lie in (0, 1)");
    }
  }
  std::map<std::string, const PopulationSpec*> seen;
  for (const auto& pop : plan.populations) {
    if (pop.metric.empty()) throw InputError("plan: empty metric name");
    if (seen.count(pop.metric)) throw InputError("plan: duplicate metric " + pop.metric);
    if (pop.faulty_shift < 0) throw InputError("plan: negative shift for " + pop.metric);
    if ((pop.faulty_shift > 0) != pop.is_signal) {
      throw InputError("plan: " + pop.metric + " must have shift > 0 exactly when it is a signal");
    }
    if (pop.parent) {
      auto it = seen.find(pop.parent->metric);
      if (it == seen.end()) throw InputError("plan: parent of " + pop.metric + " must precede it");
      if (it->second->is_signal && !pop.is_signal) {
        throw InputError("plan: " + pop.metric + " inherits a signal from " + pop.parent->metric +
                         " and must be marked as signal");
      }
      if (pop.parent->noise < 0.0) throw InputError("plan: negative noise for " + pop.metric);
    }
    std::visit(
        [&](const auto& f) {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, NegativeBinomial>) {
            if (f.successes < 1 || !(f.p > 0.0 && f.p <= 1.0)) throw InputError("plan: bad negative binomial for " + pop.metric);
          } else if constexpr (std::is_same_v<F, DiscretizedLogNormal>) {
            if (!(f.sigma > 0.0)) throw InputError("plan: bad log-normal for " + pop.metric);
          } else {
            if (f.values.empty() || f.values.size() != f.weights.size()) throw InputError("plan: bad discrete family for " + pop.metric);
            for (auto v : f.values) if (v < 0) throw InputError("plan: negative support for " + pop.metric);
          }
        },
        pop.nonfaulty);
    seen.emplace(pop.metric, &pop);
  }
}

namespace detail {

inline std::int64_t draw(const Family& family, std::mt19937_64& rng) {
  return std::visit(
      [&](const auto& f) -> std::int64_t {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, NegativeBinomial>) {
          return std::negative_binomial_distribution<std::int64_t>(f.successes, f.p)(rng);
        } else if constexpr (std::is_same_v<F, DiscretizedLogNormal>) {
          return static_cast<std::int64_t>(std::floor(std::lognormal_distribution<double>(f.mu, f.sigma)(rng)));
        } else {
          std::discrete_distribution<std::size_t> pick(f.weights.begin(), f.weights.end());
          return f.values[pick(rng)];
        }
      },
      family);
}

}  // namespace detail

/// One dataset per project; every record sits in a single snapshot. Faulty
/// records get 1 failure (2 with probability 0.1).
inline std::vector<Dataset> generate(const GenerationPlan& plan) {
  validate(plan);
  std::vector<std::string> names;
  for (const auto& pop : plan.populations) names.push_back(pop.metric);
  std::sort(names.begin(), names.end());

  std::vector<Dataset> out;
  for (std::size_t p = 0; p < plan.projects.size(); ++p) {
    const auto& proj = plan.projects[p];
    std::seed_seq seq{static_cast<std::uint32_t>(plan.seed), static_cast<std::uint32_t>(plan.seed >> 32),
                      static_cast<std::uint32_t>(p)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto faulty_n = static_cast<std::size_t>(std::llround(static_cast<double>(proj.record_count) * proj.faulty_fraction));
    faulty_n = std::clamp<std::size_t>(faulty_n, 1, proj.record_count - 1);
    std::vector<bool> is_faulty(proj.record_count, false);
    std::fill(is_faulty.begin(), is_faulty.begin() + static_cast<std::ptrdiff_t>(faulty_n), true);
    std::shuffle(is_faulty.begin(), is_faulty.end(), rng);

    Dataset ds;
    ds.tool_tag = plan.tool_tag;
    ds.project_tag = proj.project_tag;
    ds.metric_names = names;
    const Snapshot snap{proj.project_tag + "-c0", synthetic_snapshot_date(), 0};
    const int width = static_cast<int>(std::to_string(proj.record_count).size());
    for (std::size_t i = 0; i < proj.record_count; ++i) {
      FunctionRecord rec;
      rec.key = FunctionKey{proj.project_tag, fmt::format("src/module_{:02d}.c", i % 50),
                            fmt::format("fn_{:0{}d}", i, width)};
      rec.snapshot = snap;
      for (const auto& pop : plan.populations) {
        std::int64_t v = 0;
        if (pop.parent) {
          const auto own = static_cast<double>(detail::draw(pop.nonfaulty, rng));
          v = rec.metrics.at(pop.parent->metric) + std::llround(pop.parent->noise * own);
        } else {
          v = detail::draw(pop.nonfaulty, rng);
        }
        if (is_faulty[i]) v += pop.faulty_shift;
        rec.metrics.emplace(pop.metric, std::max<std::int64_t>(v, 0));
      }
      if (is_faulty[i]) rec.number_of_failures = unit(rng) < 0.1 ? 2 : 1;
      ds.records.push_back(std::move(rec));
    }
    std::sort(ds.records.begin(), ds.records.end(),
              [](const FunctionRecord& a, const FunctionRecord& b) { return a.key < b.key; });
    out.push_back(std::move(ds));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

// Probability mass on 0..K-1.
using Pmf = std::vector<double>;

namespace detail {

inline constexpr double kTailMass = 1e-10;
inline constexpr std::size_t kMaxSupport = 20000;

inline Pmf family_pmf(const Family& family) {
  return std::visit(
      [](const auto& f) -> Pmf {
        using F = std::decay_t<decltype(f)>;
        Pmf pmf;
        if constexpr (std::is_same_v<F, Discrete>) {
          const auto top = *std::max_element(f.values.begin(), f.values.end());
          pmf.assign(static_cast<std::size_t>(top) + 1, 0.0);
          double total = 0.0;
          for (double w : f.weights) total += w;
          for (std::size_t i = 0; i < f.values.size(); ++i) pmf[static_cast<std::size_t>(f.values[i])] += f.weights[i] / total;
          return pmf;
        } else {
          double cum = 0.0;
          for (std::size_t k = 0; k < kMaxSupport && cum < 1.0 - kTailMass; ++k) {
            double pk = 0.0;
            if constexpr (std::is_same_v<F, NegativeBinomial>) {
              const double r = f.successes;
              const double kk = static_cast<double>(k);
              pk = std::exp(std::lgamma(kk + r) - std::lgamma(kk + 1.0) - std::lgamma(r) + r * std::log(f.p) +
                            kk * std::log1p(-f.p));
            } else {
              auto cdf = [&](double v) {
                if (v <= 0.0) return 0.0;
                return 0.5 * std::erfc(-(std::log(v) - f.mu) / (f.sigma * std::sqrt(2.0)));
              };
              pk = cdf(static_cast<double>(k) + 1.0) - cdf(static_cast<double>(k));
            }
            pmf.push_back(pk);
            cum += pk;
          }
          for (auto& p : pmf) p /= cum;
          return pmf;
        }
      },
      family);
}

inline Pmf convolve(const Pmf& a, const Pmf& b) {
  Pmf out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

inline Pmf scale_round(const Pmf& base, double factor) {
  Pmf out;
  for (std::size_t k = 0; k < base.size(); ++k) {
    const auto v = static_cast<std::size_t>(std::llround(factor * static_cast<double>(k)));
    if (out.size() <= v) out.resize(v + 1, 0.0);
    out[v] += base[k];
  }
  return out;
}

inline Pmf shift(const Pmf& base, std::int64_t by) {
  Pmf out(static_cast<std::size_t>(by), 0.0);
  out.insert(out.end(), base.begin(), base.end());
  return out;
}

}  // namespace detail

/// Pseudo-median of the distribution: median of (X1 + X2) / 2 for two
/// independent draws, enumerating all pairs of support points.
inline double pseudo_median(const Pmf& pmf) {
  const Pmf sum = detail::convolve(pmf, pmf);
  double cum = 0.0;
  for (std::size_t s = 0; s < sum.size(); ++s) {
    cum += sum[s];
    if (cum > 0.5 + 1e-12) return static_cast<double>(s) / 2.0;
    if (std::abs(cum - 0.5) <= 1e-12) {
      std::size_t next = s + 1;
      while (next < sum.size() && sum[next] == 0.0) ++next;
      return (static_cast<double>(s) + static_cast<double>(next)) / 4.0;
    }
  }
  return static_cast<double>(sum.size() - 1) / 2.0;
}

/// Faulty-class pmf of every population, honoring correlation parents.
inline std::map<std::string, Pmf> faulty_pmfs(const GenerationPlan& plan) {
  std::map<std::string, Pmf> faulty;
  for (const auto& pop : plan.populations) {
    Pmf own = detail::family_pmf(pop.nonfaulty);
    Pmf pre;
    if (pop.parent) {
      pre = detail::convolve(faulty.at(pop.parent->metric), detail::scale_round(own, pop.parent->noise));
    } else {
      pre = std::move(own);
    }
    faulty[pop.metric] = detail::shift(pre, pop.faulty_shift);
  }
  return faulty;
}

struct GroundTruth {
  std::string metric;
  bool is_signal = false;
  std::optional<double> pseudo_median;         // faulty population, signals only
  std::optional<std::int64_t> expected_threshold;  // largest integer below the pseudo-median
};

inline std::vector<GroundTruth> ground_truth(const GenerationPlan& plan) {
  validate(plan);
  const auto pmfs = faulty_pmfs(plan);
  std::vector<GroundTruth> out;
  for (const auto& pop : plan.populations) {
    GroundTruth g;
    g.metric = pop.metric;
    g.is_signal = pop.is_signal;
    if (pop.is_signal) {
      g.pseudo_median = pseudo_median(pmfs.at(pop.metric));
      g.expected_threshold = static_cast<std::int64_t>(std::ceil(*g.pseudo_median)) - 1;
    }
    out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.metric < b.metric; });
  return out;
}

inline std::vector<std::string> signal_metrics(const GenerationPlan& plan) {
  std::vector<std::string> out;
  for (const auto& pop : plan.populations) {
    if (pop.is_signal) out.push_back(pop.metric);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Export files
// ---------------------------------------------------------------------------

struct ProjectFiles {
  std::filesystem::path commits;
  std::filesystem::path export_file;
  std::filesystem::path faults;
};

/// Writes commits, metric export and fault events for one generated dataset
/// so it can be rebuilt with the regular build step (start = snapshot date,
/// FDC = start + 240 days).
inline ProjectFiles write_project_files(const Dataset& ds, const std::filesystem::path& dir) {
  ProjectFiles files{dir / (ds.project_tag + "_commits.csv"), dir / (ds.project_tag + "_export.csv"),
                     dir / (ds.project_tag + "_faults.csv")};
  const auto& snap = ds.records.front().snapshot;
  write_file_atomic(files.commits, "commit_id,date\n" + snap.snapshot_id + "," + format_date(snap.commit_date) + "\n");
  write_file_atomic(files.export_file, write_metric_export(ds.records, ds.metric_names));
  std::vector<FaultEvent> events;
  for (const auto& rec : ds.records) {
    for (std::uint64_t f = 0; f < rec.number_of_failures; ++f) {
      events.push_back(FaultEvent{fmt::format("{}-ISSUE-{}", ds.project_tag, events.size() + 1), rec.key,
                                  rec.snapshot.snapshot_id, rec.snapshot.commit_date + std::chrono::days{1}});
    }
  }
  write_file_atomic(files.faults, write_fault_events(events));
  return files;
}

/// The plan used by the end-to-end checks: two training projects and one
/// hold-out, `signals` shifted metrics and `noise` unshifted ones.
inline GenerationPlan standard_plan(std::uint64_t seed, std::size_t signals = 5, std::size_t noise = 5,
                                    std::size_t records_per_project = 3000, double faulty_fraction = 0.15) {
  GenerationPlan plan;
  plan.seed = seed;
  plan.projects = {{"P1", records_per_project, faulty_fraction},
                   {"P2", records_per_project, faulty_fraction},
                   {"P3", records_per_project, faulty_fraction}};
  for (std::size_t i = 0; i < signals; ++i) {
    PopulationSpec pop;
    pop.metric = fmt::format("Signal{}", i + 1);
    if (i % 2 == 0) pop.nonfaulty = NegativeBinomial{4, 0.4 - 0.02 * static_cast<double>(i)};
    else pop.nonfaulty = DiscretizedLogNormal{1.5 + 0.1 * static_cast<double>(i), 0.5};
    pop.faulty_shift = 14 + 2 * static_cast<std::int64_t>(i);
    pop.is_signal = true;
    plan.populations.push_back(std::move(pop));
  }
  for (std::size_t i = 0; i < noise; ++i) {
    PopulationSpec pop;
    pop.metric = fmt::format("Noise{}", i + 1);
    if (i % 2 == 0) pop.nonfaulty = NegativeBinomial{2, 0.25};
    else pop.nonfaulty = DiscretizedLogNormal{2.0, 0.7};
    plan.populations.push_back(std::move(pop));
  }
  return plan;
}

}  // namespace threshkit::synth
