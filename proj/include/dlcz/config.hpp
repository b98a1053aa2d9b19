#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dlcz/analysis_io.hpp"
#include "dlcz/photon_stats.hpp"
#include "dlcz/sequencer.hpp"

namespace dlcz::config {

enum class Scenario { kStandard, kRephase, kMultiplex, kAlphaScan };

const char* scenario_name(Scenario scenario);

/// Everything one `run` needs. Built from a config file by `parse_config`.
struct RunConfig {
  // [run]
  Scenario scenario = Scenario::kRephase;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::uint64_t target_heralds = 10000;
  std::uint64_t max_ensembles = 100'000'000;
  unsigned threads = 1;
  bool export_timetags = false;
  analysis::TimetagFormat timetag_format = analysis::TimetagFormat::kCsv;

  // [ensemble] [geometry] [gradient] [memory] [classes]
  sequencer::PhysicsSetup physics;
  std::uint64_t atom_seed = 0;  // 0: derived from `seed`
  std::vector<double> class_weights{1.0};
  std::vector<double> class_zeeman_scales{1.0};
  std::vector<double> class_beat_frequencies{0.0};  // rad/s

  // [source] [detection] [noise]
  sequencer::StatsSetup stats;

  // [sequence]
  sequencer::SequenceConfig sequence;

  // [scan]
  std::vector<double> readout_times;
  photon::TimeWindow snr_background{5e-6, 15e-6};
  photon::TimeWindow snr_peak{20.5e-6, 21.2e-6};
  photon::PeakModel snr_model = photon::PeakModel::kGaussianFit;

  // [multiplex]
  sequencer::MultiplexPlan multiplex;
  /// Multiplies noise.kappa in multiplex runs (1 = same noise law).
  double multiplex_noise_scale = 1.0;

  // [alpha_scan]
  std::vector<double> alpha_p_w{0.0017, 0.003, 0.005, 0.01, 0.02};
  std::uint64_t alpha_heralds = 100000;

  /// Physics with the atom seed resolved and the class mixture assembled.
  sequencer::PhysicsSetup resolved_physics() const;
  sequencer::RunControl control() const;
  /// Throws LocatedError(kConfig) naming the offending field.
  void validate() const;
};

/// Physical dimension of a config field; selects the accepted unit suffixes.
enum class Dimension {
  kNone,        // plain number, '%' allowed for fractions
  kCount,       // non-negative integer
  kTime,        // s
  kLength,      // m
  kTemperature, // K
  kRate,        // Hz
  kAngularRate, // rad/s ('Hz' is converted with 2 pi)
  kAngle,       // rad
  kGradient,    // T/m
  kZeeman,      // rad/s/T
  kText,
  kChoice,
};

struct FieldInfo {
  std::string path;  // section.key
  Dimension dimension = Dimension::kNone;
  std::string unit;  // canonical unit written in canonical text
  bool list = false;
  std::string description;
  std::vector<std::string> choices;
};

/// Every accepted field, in canonical order.
const std::vector<FieldInfo>& schema();

/// Help text: one line per field with its unit and default.
std::string schema_help();

/// Parses INI-style text. Each `key = value` must carry a unit for
/// dimensional fields (`reversal_latency = 3 us`); lists are comma
/// separated, and `a:step:b` expands to an inclusive range. `source_name`
/// prefixes diagnostics.
RunConfig parse_config(const std::string& text, const std::string& source_name = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Applies DLCZ_<SECTION>__<KEY> environment variables (upper case).
void apply_environment(RunConfig& config);
/// Sets one field from text, e.g. ("source.p_w", "0.5 %").
void set_field(RunConfig& config, const std::string& path, const std::string& value);
/// Canonical value text of a field (SI units, shortest round-trip numbers).
std::string get_field(const RunConfig& config, const std::string& path);
bool is_numeric_field(const std::string& path);

/// Canonical serialisation; parse_config(to_text(c)) reproduces c exactly.
std::string to_text(const RunConfig& config);

/// Splits a file of `[section]` blocks into raw key/value entries without
/// interpreting them (used for calibration target files).
struct RawEntry {
  std::string section;
  std::string key;
  std::string value;
  std::size_t line = 0;
};
std::vector<RawEntry> read_entries(const std::string& text, const std::string& source_name);

/// Converts "<number> <unit>" to SI for the given dimension.
double parse_quantity(const std::string& text, Dimension dimension);

inline constexpr const char* kEnvironmentPrefix = "DLCZ_";

}  // namespace dlcz::config
