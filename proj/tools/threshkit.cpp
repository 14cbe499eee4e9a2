#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "threshkit/threshkit.hpp"

namespace fs = std::filesystem;
using namespace threshkit;

namespace {

struct ConfigFlags {
  std::optional<fs::path> file;
  std::vector<std::string> overrides;  // key=value
  std::optional<double> alpha;
  std::optional<double> min_precision;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "key = value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "override a configuration key (key=value), repeatable");
    cmd->add_option("--alpha", alpha, "significance level");
    cmd->add_option("--min-precision", min_precision, "minimum precision for QA selection");
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg = file ? load_config(*file) : PipelineConfig{};
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + kv + "'");
      set_config_value(cfg, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
    }
    if (alpha) cfg.alpha = *alpha;
    if (min_precision) cfg.min_precision = *min_precision;
    cfg.validate();
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Derive and validate fault-proneness thresholds for function-level code metrics"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  // build
  auto* build = app.add_subcommand("build", "Assemble a deduplicated dataset from snapshot exports and fault events");
  BuildOptions bopt;
  std::string start, fdc;
  std::optional<std::size_t> intervals;
  std::optional<fs::path> build_config;
  build->add_option("--commits", bopt.commits, "commit list (commit_id,date)")->required()->check(CLI::ExistingFile);
  build->add_option("--export", bopt.exports, "metric export of one snapshot, repeatable")
      ->required()
      ->check(CLI::ExistingFile);
  build->add_option("--faults", bopt.faults, "fault events file")->check(CLI::ExistingFile);
  build->add_option("--start", start, "start date (YYYY-MM-DD)")->required();
  build->add_option("--fdc", fdc, "fault data collection date (YYYY-MM-DD)")->required();
  build->add_option("--intervals", intervals, "number of sampling intervals");
  build->add_option("--config", build_config, "configuration file (intervals key)")->check(CLI::ExistingFile);
  build->add_option("--tool", bopt.tool_tag, "tool tag")->required();
  build->add_option("--project", bopt.project_tag, "project tag")->required();
  build->add_option("--out", bopt.out, "dataset file to write")->required();

  // derive
  auto* derive = app.add_subcommand("derive", "Screen, prune and test metrics, then derive thresholds");
  DeriveOptions dopt;
  ConfigFlags dflags;
  derive->add_option("--train", dopt.training, "training dataset, repeatable")->required()->check(CLI::ExistingFile);
  derive->add_option("--out-dir", dopt.out_dir, "output directory")->required();
  derive->add_flag("--confidential", dopt.confidential, "omit raw metric values from outputs");
  dflags.attach(derive);

  // validate
  auto* validate = app.add_subcommand("validate", "Evaluate thresholds on a hold-out dataset");
  ValidateOptions vopt;
  ConfigFlags vflags;
  validate->add_option("--thresholds", vopt.thresholds, "thresholds.csv from derive")->required()->check(CLI::ExistingFile);
  validate->add_option("--holdout", vopt.holdout, "hold-out dataset")->required()->check(CLI::ExistingFile);
  validate->add_option("--out-dir", vopt.out_dir, "output directory")->required();
  validate->add_option("--tool", vopt.tool_tag, "tool tag for the macro summary (default: dataset tag)");
  vflags.attach(validate);

  // report
  auto* report = app.add_subcommand("report", "Assemble stage outputs into one document");
  ReportOptions ropt;
  report->add_option("--derive-dir", ropt.derive_dir, "derive output directory")->required();
  report->add_option("--validate-dir", ropt.validate_dir, "validate output directory")->required();
  report->add_option("--out", ropt.out, "report file to write")->required();

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic projects with known thresholds");
  std::uint64_t seed = 1;
  std::size_t records = 3000;
  double fraction = 0.15;
  fs::path synth_dir;
  bool raw_files = false;
  synth_cmd->add_option("--seed", seed, "random seed");
  synth_cmd->add_option("--records", records, "functions per project");
  synth_cmd->add_option("--faulty-fraction", fraction, "fraction of faulty functions");
  synth_cmd->add_option("--out-dir", synth_dir, "output directory")->required();
  synth_cmd->add_flag("--raw", raw_files, "also write commits, export and fault files per project");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*build) {
      PipelineConfig cfg = build_config ? load_config(*build_config) : PipelineConfig{};
      bopt.plan = SamplingPlan{parse_date(start), parse_date(fdc), intervals.value_or(cfg.intervals)};
      cmd_build(bopt, std::cout, std::cerr);
    } else if (*derive) {
      dopt.cfg = dflags.resolve();
      cmd_derive(dopt, std::cout);
    } else if (*validate) {
      vopt.cfg = vflags.resolve();
      fs::create_directories(vopt.out_dir);
      cmd_validate(vopt, std::cout);
    } else if (*report) {
      cmd_report(ropt);
      std::cout << "wrote " << ropt.out.string() << '\n';
    } else if (*synth_cmd) {
      const auto plan = synth::standard_plan(seed, 5, 5, records, fraction);
      fs::create_directories(synth_dir);
      std::string truth = "metric,is_signal,pseudo_median,expected_threshold\n";
      for (const auto& g : synth::ground_truth(plan)) {
        truth += g.metric + "," + (g.is_signal ? "1" : "0") + "," +
                 (g.pseudo_median ? fmt::format("{}", *g.pseudo_median) : "NA") + "," +
                 (g.expected_threshold ? std::to_string(*g.expected_threshold) : "none") + "\n";
      }
      write_file_atomic(synth_dir / "ground_truth.csv", truth);
      const auto datasets = synth::generate(plan);
      for (const auto& ds : datasets) {
        write_file_atomic(synth_dir / (ds.project_tag + ".csv"), write_dataset(ds));
        if (raw_files) synth::write_project_files(ds, synth_dir);
      }
      std::cout << dataset_counts_table(datasets);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
