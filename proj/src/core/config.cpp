#include "dlcz/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fmt/core.h>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "dlcz/error.hpp"
#include "dlcz/rng.hpp"

namespace dlcz::config {

namespace {

using constants::kPi;
using constants::kTwoPi;

enum class Constraint { kAny, kPositive, kNonNegative, kProbability, kOpenProbability, kUnitInterval, kAtLeastOne };

// A unit converts a number to SI as value * mul / div; powers of ten stay in
// the divisor so "3 us" gives the correctly rounded 3e-06.
struct Unit {
  const char* name;
  double mul;
  double div;
};

const std::vector<Unit>& units_for(Dimension d) {
  static const std::vector<Unit> none{{"", 1, 1}, {"%", 1, 100}};
  static const std::vector<Unit> time{{"s", 1, 1}, {"ms", 1, 1e3}, {"us", 1, 1e6}, {"µs", 1, 1e6},
                                      {"ns", 1, 1e9}, {"ps", 1, 1e12}};
  static const std::vector<Unit> length{{"m", 1, 1}, {"cm", 1, 1e2}, {"mm", 1, 1e3}, {"um", 1, 1e6},
                                        {"µm", 1, 1e6}, {"nm", 1, 1e9}};
  static const std::vector<Unit> temperature{{"K", 1, 1}, {"mK", 1, 1e3}, {"uK", 1, 1e6}, {"µK", 1, 1e6},
                                             {"nK", 1, 1e9}};
  static const std::vector<Unit> rate{{"Hz", 1, 1}, {"kHz", 1e3, 1}, {"MHz", 1e6, 1}, {"1/s", 1, 1}};
  static const std::vector<Unit> angular{{"rad/s", 1, 1}, {"krad/s", 1e3, 1}, {"Mrad/s", 1e6, 1},
                                         {"Hz", kTwoPi, 1}, {"kHz", kTwoPi * 1e3, 1},
                                         {"MHz", kTwoPi * 1e6, 1}};
  static const std::vector<Unit> angle{{"rad", 1, 1}, {"mrad", 1, 1e3}, {"deg", kPi, 180}};
  static const std::vector<Unit> gradient{{"T/m", 1, 1}, {"mT/m", 1, 1e3}, {"G/cm", 1, 100}};
  static const std::vector<Unit> zeeman{{"rad/s/T", 1, 1}, {"Hz/T", kTwoPi, 1}, {"MHz/T", kTwoPi * 1e6, 1},
                                        {"GHz/T", kTwoPi * 1e9, 1}};
  static const std::vector<Unit> empty{};
  switch (d) {
    case Dimension::kNone: return none;
    case Dimension::kCount: return empty;
    case Dimension::kTime: return time;
    case Dimension::kLength: return length;
    case Dimension::kTemperature: return temperature;
    case Dimension::kRate: return rate;
    case Dimension::kAngularRate: return angular;
    case Dimension::kAngle: return angle;
    case Dimension::kGradient: return gradient;
    case Dimension::kZeeman: return zeeman;
    case Dimension::kText:
    case Dimension::kChoice: return empty;
  }
  return empty;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_number(double v) { return fmt::format("{}", v); }

// Raised inside field parsing; turned into a LocatedError by the caller.
struct FieldProblem {
  std::string message;
};

bool parse_leading_number(const std::string& text, double& value, std::string& rest) {
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr == first) return false;
  rest = trim(std::string(ptr, last));
  return true;
}

double apply_unit(double value, const std::string& unit, Dimension d) {
  for (const Unit& u : units_for(d)) {
    if (unit == u.name) return value * u.mul / u.div;
  }
  std::string accepted;
  for (const Unit& u : units_for(d)) {
    if (*u.name == '\0') continue;
    if (!accepted.empty()) accepted += ", ";
    accepted += u.name;
  }
  if (unit.empty()) throw FieldProblem{fmt::format("missing unit (accepted: {})", accepted)};
  throw FieldProblem{fmt::format("unknown unit '{}' (accepted: {})", unit, accepted)};
}

// Parses "a, b:step:c, d unit". Items without a unit take the unit of the last
// item that has one.
std::vector<double> parse_number_list(const std::string& text, Dimension d, bool list) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) items.push_back(trim(item));
  if (items.empty() || (items.size() == 1 && items[0].empty())) {
    if (list) return {};
    throw FieldProblem{"missing value"};
  }
  if (!list && items.size() != 1) throw FieldProblem{"expected a single value"};

  struct Parsed {
    std::vector<double> numbers;
    std::string unit;
  };
  std::vector<Parsed> parsed;
  for (const std::string& raw : items) {
    if (raw.empty()) throw FieldProblem{"empty list item"};
    Parsed p;
    std::string body = raw;
    // split a trailing unit token off the numeric part
    const auto space = raw.find_last_of(' ');
    double probe = 0.0;
    std::string rest;
    if (!parse_leading_number(raw, probe, rest)) throw FieldProblem{fmt::format("'{}' is not a number", raw)};
    if (raw.find(':') == std::string::npos) {
      p.numbers.push_back(probe);
      p.unit = rest;
    } else {
      if (!list) throw FieldProblem{"ranges are only allowed in list fields"};
      if (space != std::string::npos) {
        body = trim(raw.substr(0, space));
        p.unit = trim(raw.substr(space + 1));
      }
      std::vector<double> parts;
      std::istringstream range(body);
      std::string part;
      while (std::getline(range, part, ':')) {
        double v = 0.0;
        std::string tail;
        if (!parse_leading_number(trim(part), v, tail) || !tail.empty()) {
          throw FieldProblem{fmt::format("bad range '{}' (expected start:step:stop)", raw)};
        }
        parts.push_back(v);
      }
      if (parts.size() != 3 || !(parts[1] > 0.0) || parts[2] < parts[0]) {
        throw FieldProblem{fmt::format("bad range '{}' (expected start:step:stop with step > 0)", raw)};
      }
      const auto n = static_cast<long>(std::floor((parts[2] - parts[0]) / parts[1] + 1e-9));
      if (n > 1000000) throw FieldProblem{"range expands to more than 10^6 values"};
      for (long i = 0; i <= n; ++i) p.numbers.push_back(parts[0] + static_cast<double>(i) * parts[1]);
    }
    parsed.push_back(std::move(p));
  }
  std::string unit;
  for (auto it = parsed.rbegin(); it != parsed.rend(); ++it) {
    if (it->unit.empty()) it->unit = unit;
    else unit = it->unit;
  }
  std::vector<double> values;
  for (const Parsed& p : parsed) {
    for (double v : p.numbers) values.push_back(apply_unit(v, p.unit, d));
  }
  return values;
}

std::uint64_t parse_count(const std::string& text) {
  double v = 0.0;
  std::string rest;
  if (!parse_leading_number(text, v, rest) || !rest.empty()) {
    throw FieldProblem{fmt::format("'{}' is not a count", text)};
  }
  if (!(v >= 0.0) || v != std::floor(v) || v > 1.8e19) {
    throw FieldProblem{fmt::format("'{}' is not a non-negative integer", text)};
  }
  return static_cast<std::uint64_t>(v);
}

void check(double v, Constraint c) {
  auto fail = [&](const char* what) { throw FieldProblem{fmt::format("must be {} (got {})", what, format_number(v))}; };
  if (std::isnan(v)) fail("a number");
  switch (c) {
    case Constraint::kAny:
      if (!std::isfinite(v)) fail("finite");
      break;
    case Constraint::kPositive:
      if (!(v > 0.0)) fail("> 0");
      break;
    case Constraint::kNonNegative:
      if (!(v >= 0.0) || !std::isfinite(v)) fail(">= 0");
      break;
    case Constraint::kProbability:
      if (!(v >= 0.0 && v <= 1.0)) fail("in [0, 1]");
      break;
    case Constraint::kOpenProbability:
      if (!(v > 0.0 && v < 1.0)) fail("in (0, 1)");
      break;
    case Constraint::kUnitInterval:
      if (!(v > 0.0 && v <= 1.0)) fail("in (0, 1]");
      break;
    case Constraint::kAtLeastOne:
      if (!(v >= 1.0) || !std::isfinite(v)) fail(">= 1");
      break;
  }
}

struct Field {
  FieldInfo info;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Access>
Field number(std::string path, Dimension d, std::string unit, Constraint c, std::string description,
             Access access) {
  Field f;
  f.info = {std::move(path), d, unit, false, std::move(description), {}};
  f.set = [d, c, access](RunConfig& cfg, const std::string& text) {
    const double v = parse_number_list(text, d, false).front();
    check(v, c);
    access(cfg) = v;
  };
  f.get = [unit, access](const RunConfig& cfg) {
    const std::string n = format_number(access(const_cast<RunConfig&>(cfg)));
    return unit.empty() ? n : n + " " + unit;
  };
  return f;
}

template <typename Access>
Field number_list(std::string path, Dimension d, std::string unit, Constraint c, std::string description,
                  Access access) {
  Field f;
  f.info = {std::move(path), d, unit, true, std::move(description), {}};
  f.set = [d, c, access](RunConfig& cfg, const std::string& text) {
    std::vector<double> values = parse_number_list(text, d, true);
    for (double v : values) check(v, c);
    access(cfg) = std::move(values);
  };
  f.get = [unit, access](const RunConfig& cfg) {
    const std::vector<double>& values = access(const_cast<RunConfig&>(cfg));
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out += ", ";
      out += format_number(values[i]);
    }
    if (!unit.empty() && !values.empty()) out += " " + unit;
    return out;
  };
  return f;
}

template <typename T, typename Access>
Field count(std::string path, std::uint64_t minimum, std::string description, Access access) {
  Field f;
  f.info = {std::move(path), Dimension::kCount, "", false, std::move(description), {}};
  f.set = [minimum, access](RunConfig& cfg, const std::string& text) {
    const std::uint64_t v = parse_count(trim(text));
    if (v < minimum) throw FieldProblem{fmt::format("must be >= {} (got {})", minimum, v)};
    if (v > static_cast<std::uint64_t>(std::numeric_limits<T>::max())) throw FieldProblem{"value too large"};
    access(cfg) = static_cast<T>(v);
  };
  f.get = [access](const RunConfig& cfg) { return fmt::format("{}", access(const_cast<RunConfig&>(cfg))); };
  return f;
}

template <typename E, typename Access>
Field choice(std::string path, std::vector<std::pair<std::string, E>> options, std::string description,
             Access access) {
  Field f;
  f.info = {std::move(path), Dimension::kChoice, "", false, std::move(description), {}};
  for (const auto& o : options) f.info.choices.push_back(o.first);
  f.set = [options, access](RunConfig& cfg, const std::string& text) {
    const std::string t = trim(text);
    for (const auto& [name, value] : options) {
      if (t == name) {
        access(cfg) = value;
        return;
      }
    }
    std::string names;
    for (const auto& o : options) names += (names.empty() ? "" : ", ") + o.first;
    throw FieldProblem{fmt::format("unknown choice '{}' (expected one of: {})", t, names)};
  };
  f.get = [options, access](const RunConfig& cfg) {
    const E current = access(const_cast<RunConfig&>(cfg));
    for (const auto& [name, value] : options) {
      if (value == current) return name;
    }
    return std::string("?");
  };
  return f;
}

template <typename Access>
Field text(std::string path, std::string description, Access access) {
  Field f;
  f.info = {std::move(path), Dimension::kText, "", false, std::move(description), {}};
  f.set = [access](RunConfig& cfg, const std::string& value) {
    const std::string t = trim(value);
    if (t.empty()) throw FieldProblem{"must not be empty"};
    if (t.find_first_of("#\n") != std::string::npos) throw FieldProblem{"must not contain '#' or newlines"};
    access(cfg) = t;
  };
  f.get = [access](const RunConfig& cfg) { return access(const_cast<RunConfig&>(cfg)); };
  return f;
}

using D = Dimension;
using C = Constraint;

#define ACCESS(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    // [run]
    f.push_back(choice<Scenario>("run.scenario",
                                 {{"standard", Scenario::kStandard},
                                  {"rephase", Scenario::kRephase},
                                  {"multiplex", Scenario::kMultiplex},
                                  {"alpha-scan", Scenario::kAlphaScan}},
                                 "scenario to simulate", ACCESS(scenario)));
    f.push_back(count<std::uint64_t>("run.seed", 0, "global random seed", ACCESS(seed)));
    f.push_back(text("run.output_dir", "artifact directory", ACCESS(output_dir)));
    f.push_back(count<std::uint64_t>("run.target_heralds", 1, "write clicks per readout time", ACCESS(target_heralds)));
    f.push_back(count<std::uint64_t>("run.max_ensembles", 1, "ensemble budget per readout time", ACCESS(max_ensembles)));
    f.push_back(count<unsigned>("run.threads", 1, "worker threads", ACCESS(threads)));
    f.push_back(choice<bool>("run.export_timetags", {{"false", false}, {"true", true}},
                             "also write the detection records", ACCESS(export_timetags)));
    f.push_back(choice<analysis::TimetagFormat>("run.timetag_format",
                                                {{"csv", analysis::TimetagFormat::kCsv},
                                                 {"binary", analysis::TimetagFormat::kBinary}},
                                                "timetag file format", ACCESS(timetag_format)));
    // [ensemble]
    f.push_back(count<std::size_t>("ensemble.atom_count", 1, "atoms per ensemble sample", ACCESS(physics.ensemble.atom_count)));
    f.push_back(number("ensemble.sigma_x", D::kLength, "m", C::kPositive, "cloud rms radius along x",
                       ACCESS(physics.ensemble.cloud_sigma[0])));
    f.push_back(number("ensemble.sigma_y", D::kLength, "m", C::kPositive, "cloud rms radius along y",
                       ACCESS(physics.ensemble.cloud_sigma[1])));
    f.push_back(number("ensemble.sigma_z", D::kLength, "m", C::kPositive, "cloud rms radius along the gradient axis",
                       ACCESS(physics.ensemble.cloud_sigma[2])));
    f.push_back(number("ensemble.temperature", D::kTemperature, "K", C::kPositive, "cloud temperature",
                       ACCESS(physics.ensemble.temperature)));
    f.push_back(count<std::uint64_t>("ensemble.seed", 0, "atom sample seed (0: derived from run.seed)", ACCESS(atom_seed)));
    f.push_back(choice<physics::MotionModel>("ensemble.motion",
                                             {{"frozen", physics::MotionModel::kFrozenPosition},
                                              {"moving", physics::MotionModel::kMovingAtoms},
                                              {"static", physics::MotionModel::kStatic}},
                                             "atomic motion model", ACCESS(physics.motion)));
    // [geometry]
    f.push_back(number("geometry.wavelength", D::kLength, "m", C::kPositive, "write/read photon wavelength",
                       ACCESS(physics.wavelength)));
    f.push_back(number("geometry.crossing_angle", D::kAngle, "rad", C::kNonNegative, "write pulse / photon mode angle",
                       ACCESS(physics.crossing_angle)));
    f.push_back(number("geometry.misalignment", D::kAngle, "rad", C::kAny, "tilt of delta_k from the gradient axis",
                       ACCESS(physics.misalignment)));
    // [gradient]
    f.push_back(number("gradient.amplitude", D::kGradient, "T/m", C::kAny, "gradient before the reversal",
                       ACCESS(physics.gradient_amplitude)));
    f.push_back(number("gradient.coil_tau", D::kTime, "s", C::kNonNegative, "coil response time constant",
                       ACCESS(physics.coil_tau)));
    f.push_back(number("gradient.zeeman_coefficient", D::kZeeman, "rad/s/T", C::kAny,
                       "Zeeman shift per unit field of the stored coherence", ACCESS(physics.zeeman_coefficient)));
    f.push_back(number("gradient.reversed_ratio", D::kNone, "", C::kAny, "reversed / initial gradient",
                       ACCESS(physics.reversed_ratio)));
    f.push_back(number("gradient.peak_jitter", D::kTime, "s", C::kNonNegative,
                       "per-ensemble rms shift of the rephasing time", ACCESS(physics.peak_jitter)));
    // [classes]
    f.push_back(number_list("classes.weights", D::kNone, "", C::kProbability, "coherence class weights (sum 1)",
                            ACCESS(class_weights)));
    f.push_back(number_list("classes.zeeman_scales", D::kNone, "", C::kAny, "relative Zeeman sensitivity per class",
                            ACCESS(class_zeeman_scales)));
    f.push_back(number_list("classes.beat_frequencies", D::kAngularRate, "rad/s", C::kAny,
                            "beat frequency per class", ACCESS(class_beat_frequencies)));
    // [memory]
    f.push_back(number("memory.eta0", D::kNone, "", C::kUnitInterval, "retrieval efficiency of a perfectly phased spin-wave",
                       ACCESS(physics.eta0)));
    f.push_back(number("memory.motional_lifetime", D::kTime, "s", C::kPositive,
                       "extra exponential decay (inf: none)", ACCESS(physics.motional_lifetime)));
    // [source]
    f.push_back(number("source.p_w", D::kNone, "", C::kOpenProbability, "write click probability per write pulse",
                       ACCESS(stats.p_w)));
    f.push_back(count<int>("source.fock_cutoff", 2, "photon-number cutoff", ACCESS(stats.fock_cutoff)));
    // [detection]
    f.push_back(number("detection.filter_transmission", D::kNone, "", C::kProbability, "filter chain transmission",
                       ACCESS(stats.chain.filter_transmission)));
    f.push_back(number("detection.spd_efficiency", D::kNone, "", C::kProbability, "detector efficiency",
                       ACCESS(stats.chain.spd_efficiency)));
    f.push_back(number("detection.read_splitter_ratio", D::kNone, "", C::kProbability, "fraction sent to read detector 1",
                       ACCESS(stats.chain.read_splitter_ratio)));
    f.push_back(number("detection.dark_rate", D::kRate, "Hz", C::kNonNegative, "dark counts per detector",
                       ACCESS(stats.chain.dark_rate)));
    f.push_back(number("detection.coincidence_window", D::kTime, "s", C::kPositive, "detector gate / coincidence window",
                       ACCESS(stats.chain.coincidence_window)));
    // [noise]
    f.push_back(number("noise.kappa", D::kNone, "", C::kNonNegative, "read noise photons per unit write click probability",
                       ACCESS(stats.noise.kappa)));
    f.push_back(number("noise.floor", D::kNone, "", C::kNonNegative, "read noise photons independent of p_w",
                       ACCESS(stats.noise.floor)));
    f.push_back(number("noise.cavity_suppression", D::kNone, "", C::kAtLeastOne, "noise suppression factor",
                       ACCESS(stats.noise.cavity_suppression)));
    // [sequence]
    f.push_back(number("sequence.mot_load", D::kTime, "s", C::kPositive, "MOT loading", ACCESS(sequence.mot_load)));
    f.push_back(number("sequence.molasses", D::kTime, "s", C::kPositive, "molasses cooling", ACCESS(sequence.molasses)));
    f.push_back(number("sequence.pumping", D::kTime, "s", C::kPositive, "optical pumping", ACCESS(sequence.pumping)));
    f.push_back(number("sequence.interrogation_max", D::kTime, "s", C::kPositive, "longest interrogation period",
                       ACCESS(sequence.interrogation_max)));
    f.push_back(count<int>("sequence.max_trials", 1, "write trials per ensemble", ACCESS(sequence.max_trials)));
    f.push_back(number("sequence.trial_period", D::kTime, "s", C::kPositive, "write trial spacing",
                       ACCESS(sequence.trial_period)));
    f.push_back(number("sequence.reversal_latency", D::kTime, "s", C::kPositive, "write pulse to reversal instruction",
                       ACCESS(sequence.reversal_latency)));
    f.push_back(number("sequence.readout_delay", D::kTime, "s", C::kPositive, "read delay for alpha-scan",
                       ACCESS(sequence.readout_delay)));
    f.push_back(number("sequence.repetition_rate", D::kRate, "Hz", C::kPositive, "ensemble load rate",
                       ACCESS(sequence.repetition_rate)));
    f.push_back(number("sequence.residual_excitation", D::kNone, "", C::kProbability,
                       "probability an excitation survives cleaning", ACCESS(sequence.residual_excitation)));
    // [scan]
    f.push_back(number_list("scan.readout_times", D::kTime, "s", C::kNonNegative, "readout times after the write pulse",
                            ACCESS(readout_times)));
    f.push_back(number("scan.background_begin", D::kTime, "s", C::kNonNegative, "SNR background window start",
                       ACCESS(snr_background.begin)));
    f.push_back(number("scan.background_end", D::kTime, "s", C::kNonNegative, "SNR background window end",
                       ACCESS(snr_background.end)));
    f.push_back(number("scan.peak_begin", D::kTime, "s", C::kNonNegative, "SNR peak window start", ACCESS(snr_peak.begin)));
    f.push_back(number("scan.peak_end", D::kTime, "s", C::kNonNegative, "SNR peak window end", ACCESS(snr_peak.end)));
    f.push_back(choice<photon::PeakModel>("scan.snr_model",
                                          {{"gaussian", photon::PeakModel::kGaussianFit},
                                           {"maximum", photon::PeakModel::kMaximumSample}},
                                          "peak estimate used for the SNR", ACCESS(snr_model)));
    // [multiplex]
    f.push_back(number_list("multiplex.write_offsets", D::kTime, "s", C::kNonNegative, "write pulses within a trial",
                            ACCESS(multiplex.write_offsets)));
    f.push_back(number("multiplex.background_begin", D::kTime, "s", C::kNonNegative, "flat region start",
                       ACCESS(multiplex.background.begin)));
    f.push_back(number("multiplex.background_end", D::kTime, "s", C::kNonNegative, "flat region end",
                       ACCESS(multiplex.background.end)));
    f.push_back(number("multiplex.noise_scale", D::kNone, "", C::kNonNegative, "kappa multiplier for multiplex runs",
                       ACCESS(multiplex_noise_scale)));
    // [alpha_scan]
    f.push_back(number_list("alpha_scan.p_w_values", D::kNone, "", C::kOpenProbability, "write click probabilities",
                            ACCESS(alpha_p_w)));
    f.push_back(count<std::uint64_t>("alpha_scan.target_heralds", 1, "write clicks per point", ACCESS(alpha_heralds)));
    return f;
  }();
  return all;
}

#undef ACCESS

const Field* find_field(const std::string& path) {
  for (const Field& f : fields()) {
    if (f.info.path == path) return &f;
  }
  return nullptr;
}

[[noreturn]] void config_error(const std::string& source, std::size_t line, const std::string& field,
                               const std::string& message) {
  const std::string where = line > 0 ? fmt::format("{}:{}: ", source, line) : fmt::format("{}: ", source);
  throw LocatedError(ErrorCode::kConfig, fmt::format("{}{}: {}", where, field, message), line, field);
}

void set_located(RunConfig& cfg, const std::string& path, const std::string& value,
                 const std::string& source, std::size_t line) {
  const Field* f = find_field(path);
  if (!f) config_error(source, line, path, "unknown field");
  try {
    f->set(cfg, value);
  } catch (const FieldProblem& p) {
    config_error(source, line, path, p.message);
  }
}

std::string section_of(const std::string& path) { return path.substr(0, path.find('.')); }

}  // namespace

const char* scenario_name(Scenario scenario) {
  switch (scenario) {
    case Scenario::kStandard: return "standard";
    case Scenario::kRephase: return "rephase";
    case Scenario::kMultiplex: return "multiplex";
    case Scenario::kAlphaScan: return "alpha-scan";
  }
  return "?";
}

double parse_quantity(const std::string& text, Dimension dimension) {
  try {
    return parse_number_list(text, dimension, false).front();
  } catch (const FieldProblem& p) {
    throw Error(ErrorCode::kParse, fmt::format("'{}': {}", text, p.message));
  }
}

const std::vector<FieldInfo>& schema() {
  static const std::vector<FieldInfo> infos = [] {
    std::vector<FieldInfo> out;
    for (const Field& f : fields()) out.push_back(f.info);
    return out;
  }();
  return infos;
}

std::string schema_help() {
  const RunConfig defaults;
  std::string out = "Config fields (section.key [unit] default: description):\n";
  for (const Field& f : fields()) {
    std::string unit;
    switch (f.info.dimension) {
      case Dimension::kNone: unit = "[1]"; break;
      case Dimension::kCount: unit = "[count]"; break;
      case Dimension::kText: unit = "[text]"; break;
      case Dimension::kChoice: {
        unit = "[";
        for (std::size_t i = 0; i < f.info.choices.size(); ++i) unit += (i ? "|" : "") + f.info.choices[i];
        unit += "]";
        break;
      }
      default: {
        unit = "[";
        bool first = true;
        for (const Unit& u : units_for(f.info.dimension)) {
          unit += (first ? "" : ",") + std::string(u.name);
          first = false;
        }
        unit += "]";
      }
    }
    if (f.info.list) unit += " list";
    std::string def = f.get(defaults);
    if (def.empty()) def = "(empty)";
    out += fmt::format("  {:<32} {:<30} {}: {}\n", f.info.path, unit, def, f.info.description);
  }
  out += fmt::format(
      "Lists are comma separated; start:step:stop expands to a range.\n"
      "Environment overrides: {}<SECTION>__<KEY>, e.g. DLCZ_SOURCE__P_W='0.5 %'.\n",
      kEnvironmentPrefix);
  return out;
}

std::vector<RawEntry> read_entries(const std::string& text, const std::string& source) {
  std::vector<RawEntry> entries;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string content = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (content.empty()) continue;
    if (content.front() == '[') {
      if (content.back() != ']' || content.size() < 3) config_error(source, line, content, "malformed section header");
      section = trim(content.substr(1, content.size() - 2));
      continue;
    }
    const auto eq = content.find('=');
    if (eq == std::string::npos) config_error(source, line, content, "expected 'key = value'");
    const std::string key = trim(content.substr(0, eq));
    if (key.empty()) config_error(source, line, content, "missing key");
    if (section.empty()) config_error(source, line, key, "key outside of a [section]");
    entries.push_back({section, key, trim(content.substr(eq + 1)), line});
  }
  return entries;
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  RunConfig cfg;
  std::vector<std::string> seen;
  for (const RawEntry& e : read_entries(text, source)) {
    const std::string path = e.section + "." + e.key;
    if (std::find(seen.begin(), seen.end(), path) != seen.end()) {
      config_error(source, e.line, path, "duplicate field");
    }
    seen.push_back(path);
    set_located(cfg, path, e.value, source, e.line);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LocatedError(ErrorCode::kConfig, fmt::format("cannot read config file {}", path.string()), 0, "");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.string());
}

void apply_environment(RunConfig& cfg) {
  for (const Field& f : fields()) {
    std::string name = std::string(kEnvironmentPrefix) + f.info.path;
    const auto dot = name.find('.');
    name.replace(dot, 1, "__");
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return c == '-' ? '_' : static_cast<char>(std::toupper(c)); });
    if (const char* value = std::getenv(name.c_str())) set_located(cfg, f.info.path, value, name, 0);
  }
}

void set_field(RunConfig& cfg, const std::string& path, const std::string& value) {
  set_located(cfg, path, value, "override", 0);
}

std::string get_field(const RunConfig& cfg, const std::string& path) {
  const Field* f = find_field(path);
  if (!f) throw LocatedError(ErrorCode::kConfig, fmt::format("{}: unknown field", path), 0, path);
  return f->get(cfg);
}

bool is_numeric_field(const std::string& path) {
  const Field* f = find_field(path);
  return f && !f->info.list &&
         f->info.dimension != Dimension::kText && f->info.dimension != Dimension::kChoice;
}

std::string to_text(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const Field& f : fields()) {
    const std::string s = section_of(f.info.path);
    if (s != section) {
      out += fmt::format("{}[{}]\n", section.empty() ? "" : "\n", s);
      section = s;
    }
    out += fmt::format("{} = {}\n", f.info.path.substr(s.size() + 1), f.get(cfg));
  }
  return out;
}

// ----------------------------------------------------------------- RunConfig

sequencer::PhysicsSetup RunConfig::resolved_physics() const {
  sequencer::PhysicsSetup p = physics;
  p.ensemble.rng_seed = atom_seed != 0 ? atom_seed : derive_key(seed, {0xA7035EED});
  std::vector<physics::CoherenceClass> classes;
  for (std::size_t i = 0; i < class_weights.size(); ++i) {
    classes.push_back({class_weights[i], class_zeeman_scales[i], class_beat_frequencies[i]});
  }
  p.mixture = physics::ClassMixture(std::move(classes));
  return p;
}

sequencer::RunControl RunConfig::control() const {
  sequencer::RunControl c;
  c.seed = seed;
  c.target_heralds = target_heralds;
  c.max_ensembles = max_ensembles;
  c.threads = threads;
  c.record_clicks = export_timetags;
  return c;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& message) {
    throw LocatedError(ErrorCode::kConfig, fmt::format("{}: {}", field, message), 0, field);
  };
  if (class_weights.empty()) fail("classes.weights", "needs at least one class");
  if (class_zeeman_scales.size() != class_weights.size()) {
    fail("classes.zeeman_scales", "must have one entry per class weight");
  }
  if (class_beat_frequencies.size() != class_weights.size()) {
    fail("classes.beat_frequencies", "must have one entry per class weight");
  }
  double sum = 0.0;
  for (double w : class_weights) sum += w;
  if (std::abs(sum - 1.0) > 1e-12) fail("classes.weights", fmt::format("must sum to 1 (got {})", sum));
  if (snr_background.end <= snr_background.begin) fail("scan.background_end", "must exceed scan.background_begin");
  if (snr_peak.end <= snr_peak.begin) fail("scan.peak_end", "must exceed scan.peak_begin");
  if (multiplex.background.end <= multiplex.background.begin) {
    fail("multiplex.background_end", "must exceed multiplex.background_begin");
  }
  const bool needs_scan = scenario != Scenario::kAlphaScan;
  if (needs_scan && readout_times.empty()) fail("scan.readout_times", "must not be empty for this scenario");
  for (std::size_t i = 1; i < readout_times.size(); ++i) {
    if (readout_times[i] < readout_times[i - 1]) fail("scan.readout_times", "must be non-decreasing");
  }
  for (double t : readout_times) {
    if (t > sequence.interrogation_max) fail("scan.readout_times", "readout beyond sequence.interrogation_max");
  }
  if (multiplex.write_offsets.empty() || multiplex.write_offsets.front() != 0.0) {
    fail("multiplex.write_offsets", "must start at 0");
  }
  for (std::size_t i = 1; i < multiplex.write_offsets.size(); ++i) {
    if (multiplex.write_offsets[i] <= multiplex.write_offsets[i - 1]) {
      fail("multiplex.write_offsets", "must be strictly increasing");
    }
  }
  const double last_write = scenario == Scenario::kMultiplex ? multiplex.write_offsets.back() : 0.0;
  for (double t : readout_times) {
    if (t <= last_write) fail("scan.readout_times", "must follow the last write pulse");
  }
  if (alpha_p_w.empty()) fail("alpha_scan.p_w_values", "must not be empty");
  // the remaining checks live with the modules; report them as config errors
  try {
    sequence.validate();
  } catch (const Error& e) {
    fail("sequence", e.what());
  }
  try {
    resolved_physics().validate();
  } catch (const Error& e) {
    fail("physics", e.what());
  }
  try {
    stats.validate();
  } catch (const Error& e) {
    fail("source", e.what());
  }
  // emission feasibility is a cutoff problem: the pair distribution must fit
  try {
    stats.emission();
    for (double p : scenario == Scenario::kAlphaScan ? alpha_p_w : std::vector<double>{}) {
      sequencer::StatsSetup s = stats;
      s.p_w = p;
      s.emission();
    }
  } catch (const Error& e) {
    fail("source.fock_cutoff", e.what());
  }
}

}  // namespace dlcz::config
