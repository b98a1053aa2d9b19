// dlczsim: command-line front end over the libdlcz C interface.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "dlcz/dlcz.h"

namespace {

// exit codes: 0 ok, 2 config, 3 simulation budget, 1 anything else
int exit_code(dlcz_status s) {
  switch (s) {
    case DLCZ_OK: return 0;
    case DLCZ_ERR_CONFIG:
    case DLCZ_ERR_PARSE: return 2;
    case DLCZ_ERR_BUDGET_EXCEEDED: return 3;
    default: return 1;
  }
}

int report(dlcz_status s) {
  if (s == DLCZ_OK) return 0;
  std::cerr << "dlczsim: " << dlcz_status_name(s) << " error: " << dlcz_last_error() << "\n";
  const std::string field = dlcz_last_error_field();
  if (!field.empty()) std::cerr << "  field: " << field << "\n";
  if (dlcz_last_error_line() > 0) std::cerr << "  line: " << dlcz_last_error_line() << "\n";
  return exit_code(s);
}

struct ConfigDeleter {
  void operator()(dlcz_config* c) const { dlcz_config_free(c); }
};
struct ResultDeleter {
  void operator()(dlcz_result* r) const { dlcz_result_free(r); }
};
using ConfigPtr = std::unique_ptr<dlcz_config, ConfigDeleter>;
using ResultPtr = std::unique_ptr<dlcz_result, ResultDeleter>;

struct Common {
  std::string config_path;
  std::string out;
  std::string format = "csv";
  long long seed = -1;
  int threads = 0;
};

std::string take(char* text) {
  std::string s = text ? text : "";
  dlcz_string_free(text);
  return s;
}

// Loads the config, then applies environment and flag overrides in that order.
dlcz_status load(const Common& c, ConfigPtr& cfg) {
  dlcz_config* raw = nullptr;
  dlcz_status s = dlcz_config_load(c.config_path.c_str(), &raw);
  cfg.reset(raw);
  if (s != DLCZ_OK) return s;
  if ((s = dlcz_config_apply_environment(cfg.get())) != DLCZ_OK) return s;
  if (c.seed >= 0 && (s = dlcz_config_set(cfg.get(), "run.seed", std::to_string(c.seed).c_str())) != DLCZ_OK) return s;
  if (c.threads > 0 &&
      (s = dlcz_config_set(cfg.get(), "run.threads", std::to_string(c.threads).c_str())) != DLCZ_OK) {
    return s;
  }
  return dlcz_config_validate(cfg.get());
}

std::string out_dir(const Common& c, const dlcz_config* cfg) {
  if (!c.out.empty()) return c.out;
  char* text = nullptr;
  if (dlcz_config_get(cfg, "run.output_dir", &text) != DLCZ_OK) return "out";
  return take(text);
}

void print_metrics(const dlcz_result* r) {
  for (size_t i = 0; i < dlcz_result_metric_count(r); ++i) {
    const char* name = nullptr;
    double value = 0.0, error = 0.0;
    dlcz_result_metric(r, i, &name, &value, &error);
    std::printf("%s = ", name);
    if (std::isnan(value)) {
      std::printf("undefined\n");
    } else if (std::isnan(error)) {
      std::printf("%.10g\n", value);
    } else {
      std::printf("%.10g +- %.3g\n", value, error);
    }
  }
}

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
  cmd->add_option("config", c.config_path, "Config file (a run manifest works too)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override run.seed")->check(CLI::NonNegativeNumber);
  cmd->add_option("--threads", c.threads, "Override run.threads")->check(CLI::PositiveNumber);
  if (with_out) cmd->add_option("--out", c.out, "Output directory (default: run.output_dir)");
  cmd->add_option("--format", c.format, "Output table format")->check(CLI::IsMember({"csv"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DLCZ quantum memory Monte Carlo simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dlcz_version()));
  const std::string fields = take(dlcz_schema_help());
  // the schema help already documents the environment prefix
  app.footer(fields + "\nExit codes: 0 ok, 2 config error, 3 simulation budget exceeded, 1 other failure.");

  Common run_opts;
  CLI::App* run = app.add_subcommand("run", "Run the configured scenario");
  add_common(run, run_opts);

  Common sweep_opts;
  std::string axis;
  std::vector<std::string> values;
  CLI::App* sweep = app.add_subcommand("sweep", "Run once per value of one numeric field");
  add_common(sweep, sweep_opts);
  sweep->add_option("--axis", axis, "Field path, e.g. source.p_w")->required();
  sweep->add_option("--values", values, "Values in config syntax, e.g. \"0.17 %\" \"0.5 %\"")->required();

  Common cal_opts;
  std::string targets, calibrated_path;
  CLI::App* cal = app.add_subcommand("calibrate", "Fit model parameters to target observables");
  add_common(cal, cal_opts, false);
  cal->add_option("--targets", targets, "Targets file ([targets] section)")->required()->check(CLI::ExistingFile);
  cal->add_option("--out", calibrated_path, "Write the calibrated config here");

  std::string tags, tag_format = "csv", analyze_out = "analysis";
  double window = 200e-9, delay = 0.0, bin_width = 0.0, range_begin = 0.0, range_end = 0.0;
  unsigned long long trials = 0;
  CLI::App* analyze = app.add_subcommand("analyze", "Coincidence counting on a timetag file (times in seconds)");
  analyze->add_option("timetags", tags, "Timetag file")->required()->check(CLI::ExistingFile);
  analyze->add_option("--timetag-format", tag_format, "csv or binary")->check(CLI::IsMember({"csv", "binary", "bin"}));
  analyze->add_option("--window", window, "Coincidence window [s]")->check(CLI::PositiveNumber);
  analyze->add_option("--delay", delay, "Start of the window after each write click [s]");
  analyze->add_option("--trials", trials, "Trials behind the file (0: per start; alpha only)");
  analyze->add_option("--bin-width", bin_width, "Start-stop histogram bin width [s] (0: none)");
  analyze->add_option("--range-begin", range_begin, "Histogram range begin [s]");
  analyze->add_option("--range-end", range_end, "Histogram range end [s]");
  analyze->add_option("--out", analyze_out, "Output directory");
  analyze->add_option("--format", run_opts.format, "Output table format")->check(CLI::IsMember({"csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (run->parsed()) {
    ConfigPtr cfg;
    if (dlcz_status s = load(run_opts, cfg); s != DLCZ_OK) return report(s);
    const std::string dir = out_dir(run_opts, cfg.get());
    dlcz_result* raw = nullptr;
    const dlcz_status s = dlcz_run(cfg.get(), dir.c_str(), &raw);
    ResultPtr result(raw);
    if (s != DLCZ_OK) return report(s);
    print_metrics(result.get());
    std::printf("artifacts in %s:\n", dir.c_str());
    for (size_t i = 0; i < dlcz_result_file_count(result.get()); ++i) std::printf("  %s\n", dlcz_result_file(result.get(), i));
    return 0;
  }

  if (sweep->parsed()) {
    ConfigPtr cfg;
    if (dlcz_status s = load(sweep_opts, cfg); s != DLCZ_OK) return report(s);
    const std::string dir = out_dir(sweep_opts, cfg.get());
    std::vector<const char*> list;
    for (const std::string& v : values) list.push_back(v.c_str());
    if (dlcz_status s = dlcz_sweep(cfg.get(), axis.c_str(), list.data(), list.size(), dir.c_str()); s != DLCZ_OK) {
      return report(s);
    }
    std::ifstream summary(dir + "/summary.csv");
    std::cout << summary.rdbuf();
    return 0;
  }

  if (cal->parsed()) {
    ConfigPtr cfg;
    if (dlcz_status s = load(cal_opts, cfg); s != DLCZ_OK) return report(s);
    dlcz_config* raw = nullptr;
    char* text = nullptr;
    const dlcz_status s = dlcz_calibrate(cfg.get(), targets.c_str(), &raw, &text);
    ConfigPtr calibrated(raw);
    const std::string report_text = take(text);
    if (s == DLCZ_ERR_NOT_CONVERGED) {
      std::cerr << "dlczsim: calibration refused, best-so-far:\n" << report_text;
      return 1;
    }
    if (s != DLCZ_OK) return report(s);
    std::cout << report_text;
    if (!calibrated_path.empty()) {
      char* cfg_text = nullptr;
      if (dlcz_status e = dlcz_config_to_string(calibrated.get(), &cfg_text); e != DLCZ_OK) return report(e);
      std::ofstream out(calibrated_path, std::ios::binary);
      out << take(cfg_text);
      if (!out) {
        std::cerr << "dlczsim: cannot write " << calibrated_path << "\n";
        return 1;
      }
      std::cout << "calibrated config written to " << calibrated_path << "\n";
    }
    return 0;
  }

  if (analyze->parsed()) {
    dlcz_counts counts{};
    const dlcz_status s = dlcz_analyze_timetags(tags.c_str(), tag_format.c_str(), window, delay, trials, bin_width,
                                                range_begin, range_end, analyze_out.c_str(), &counts);
    if (s != DLCZ_OK) return report(s);
    std::printf("trials = %llu\nn_w = %llu\nn_wr = %llu\nn_wr1 = %llu\nn_wr2 = %llu\nn_wr1r2 = %llu\n",
                static_cast<unsigned long long>(counts.trials), static_cast<unsigned long long>(counts.n_w),
                static_cast<unsigned long long>(counts.n_wr), static_cast<unsigned long long>(counts.n_wr1),
                static_cast<unsigned long long>(counts.n_wr2), static_cast<unsigned long long>(counts.n_wr1r2));
    double alpha = 0.0, error = 0.0;
    if (dlcz_antibunching_alpha(&counts, &alpha, &error) == DLCZ_OK) {
      std::printf("alpha = %.6g +- %.3g\n", alpha, error);
    } else {
      std::printf("alpha = undefined (%s)\n", dlcz_last_error());
    }
    std::printf("results in %s\n", analyze_out.c_str());
    return 0;
  }
  return 1;
}
