#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dlcz/config.hpp"

namespace dlcz::scenario {

inline constexpr const char* kVersion = "0.1.0";

struct Metric {
  std::string name;
  double value = 0.0;
  double standard_error = 0.0;  // NaN when the metric has no error estimate
};

struct ScenarioResult {
  std::vector<Metric> metrics;
  std::vector<std::filesystem::path> files;  // relative to the output directory

  std::optional<Metric> find(const std::string& name) const;
};

/// 64-bit FNV-1a of the canonical config text.
std::uint64_t config_hash(const config::RunConfig& config);

/// Comment header (version, hash, seed) followed by the canonical config;
/// the result is itself a loadable config file.
std::string manifest_text(const config::RunConfig& config);

/// Runs the configured scenario and writes its artifacts into `out_dir`
/// (created if missing). `config.output_dir` is only recorded, not used.
ScenarioResult run_scenario(const config::RunConfig& config, const std::filesystem::path& out_dir);

struct SweepResult {
  std::vector<std::string> values;  // canonical text of the swept field
  std::vector<ScenarioResult> runs;
};

/// One run per value in out_dir/sweep_NNN plus out_dir/summary.csv.
/// `axis` must be a numeric field path such as "source.p_w".
SweepResult run_sweep(const config::RunConfig& base, const std::string& axis,
                      const std::vector<std::string>& values, const std::filesystem::path& out_dir);

}  // namespace dlcz::scenario
