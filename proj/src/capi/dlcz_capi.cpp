#include "dlcz/dlcz.h"

#include <cmath>
#include <cstring>
#include <fmt/core.h>
#include <fstream>
#include <new>
#include <string>

#include "dlcz/analysis_io.hpp"
#include "dlcz/calibrate.hpp"
#include "dlcz/config.hpp"
#include "dlcz/error.hpp"
#include "dlcz/scenario.hpp"

struct dlcz_config {
  dlcz::config::RunConfig value;
};

struct dlcz_result {
  dlcz::scenario::ScenarioResult value;
  std::vector<std::string> files;
};

namespace {

struct LastError {
  std::string message;
  std::string field;
  std::size_t line = 0;
};

thread_local LastError last_error;

dlcz_status to_status(dlcz::ErrorCode code) {
  using dlcz::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidParameter: return DLCZ_ERR_INVALID_PARAMETER;
    case ErrorCode::kTimeOrder: return DLCZ_ERR_TIME_ORDER;
    case ErrorCode::kEmptyEnsemble: return DLCZ_ERR_EMPTY_ENSEMBLE;
    case ErrorCode::kNoRoot: return DLCZ_ERR_NO_ROOT;
    case ErrorCode::kInsufficientStatistics: return DLCZ_ERR_INSUFFICIENT_STATISTICS;
    case ErrorCode::kBudgetExceeded: return DLCZ_ERR_BUDGET_EXCEEDED;
    case ErrorCode::kConfig: return DLCZ_ERR_CONFIG;
    case ErrorCode::kParse: return DLCZ_ERR_PARSE;
    case ErrorCode::kIo: return DLCZ_ERR_IO;
    case ErrorCode::kNotConverged: return DLCZ_ERR_NOT_CONVERGED;
  }
  return DLCZ_ERR_INTERNAL;
}

dlcz_status fail(dlcz_status status, std::string message, std::size_t line = 0, std::string field = {}) {
  last_error = {std::move(message), std::move(field), line};
  return status;
}

template <typename F>
dlcz_status guard(F&& body) {
  last_error = {};
  try {
    body();
    return DLCZ_OK;
  } catch (const dlcz::LocatedError& e) {
    return fail(to_status(e.code()), e.what(), e.line(), e.field());
  } catch (const dlcz::Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(DLCZ_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DLCZ_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DLCZ_ERR_INTERNAL, "unknown error");
  }
}

char* duplicate(const std::string& text) {
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

void require_arg(const void* p, const char* name) {
  if (!p) throw dlcz::Error(dlcz::ErrorCode::kInvalidParameter, fmt::format("{} must not be null", name));
}

}  // namespace

extern "C" {

const char* dlcz_version(void) { return dlcz::scenario::kVersion; }

const char* dlcz_status_name(dlcz_status status) {
  switch (status) {
    case DLCZ_OK: return "ok";
    case DLCZ_ERR_INVALID_PARAMETER: return "invalid-parameter";
    case DLCZ_ERR_TIME_ORDER: return "time-order";
    case DLCZ_ERR_EMPTY_ENSEMBLE: return "empty-ensemble";
    case DLCZ_ERR_NO_ROOT: return "no-root";
    case DLCZ_ERR_INSUFFICIENT_STATISTICS: return "insufficient-statistics";
    case DLCZ_ERR_BUDGET_EXCEEDED: return "budget-exceeded";
    case DLCZ_ERR_CONFIG: return "config";
    case DLCZ_ERR_PARSE: return "parse";
    case DLCZ_ERR_IO: return "io";
    case DLCZ_ERR_NOT_CONVERGED: return "not-converged";
    case DLCZ_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* dlcz_last_error(void) { return last_error.message.c_str(); }
size_t dlcz_last_error_line(void) { return last_error.line; }
const char* dlcz_last_error_field(void) { return last_error.field.c_str(); }

void dlcz_string_free(char* text) { std::free(text); }

char* dlcz_schema_help(void) {
  char* out = nullptr;
  guard([&] { out = duplicate(dlcz::config::schema_help()); });
  return out;
}

const char* dlcz_environment_prefix(void) { return dlcz::config::kEnvironmentPrefix; }

dlcz_status dlcz_config_default(dlcz_config** out) {
  return guard([&] {
    require_arg(out, "out");
    *out = new dlcz_config{};
  });
}

dlcz_status dlcz_config_load(const char* path, dlcz_config** out) {
  return guard([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = nullptr;
    *out = new dlcz_config{dlcz::config::load_config(path)};
  });
}

dlcz_status dlcz_config_parse(const char* text, const char* source_name, dlcz_config** out) {
  return guard([&] {
    require_arg(text, "text");
    require_arg(out, "out");
    *out = nullptr;
    *out = new dlcz_config{dlcz::config::parse_config(text, source_name ? source_name : "<config>")};
  });
}

dlcz_status dlcz_config_clone(const dlcz_config* config, dlcz_config** out) {
  return guard([&] {
    require_arg(config, "config");
    require_arg(out, "out");
    *out = new dlcz_config{config->value};
  });
}

void dlcz_config_free(dlcz_config* config) { delete config; }

dlcz_status dlcz_config_set(dlcz_config* config, const char* field, const char* value) {
  return guard([&] {
    require_arg(config, "config");
    require_arg(field, "field");
    require_arg(value, "value");
    dlcz::config::set_field(config->value, field, value);
  });
}

dlcz_status dlcz_config_get(const dlcz_config* config, const char* field, char** value) {
  return guard([&] {
    require_arg(config, "config");
    require_arg(field, "field");
    require_arg(value, "value");
    *value = duplicate(dlcz::config::get_field(config->value, field));
  });
}

dlcz_status dlcz_config_apply_environment(dlcz_config* config) {
  return guard([&] {
    require_arg(config, "config");
    dlcz::config::apply_environment(config->value);
  });
}

dlcz_status dlcz_config_validate(const dlcz_config* config) {
  return guard([&] {
    require_arg(config, "config");
    config->value.validate();
  });
}

dlcz_status dlcz_config_to_string(const dlcz_config* config, char** text) {
  return guard([&] {
    require_arg(config, "config");
    require_arg(text, "text");
    *text = duplicate(dlcz::config::to_text(config->value));
  });
}

dlcz_status dlcz_run(const dlcz_config* config, const char* out_dir, dlcz_result** out) {
  return guard([&] {
    require_arg(config, "config");
    require_arg(out_dir, "out_dir");
    auto result = std::make_unique<dlcz_result>();
    result->value = dlcz::scenario::run_scenario(config->value, out_dir);
    for (const auto& f : result->value.files) result->files.push_back(f.generic_string());
    if (out) *out = result.release();
  });
}

size_t dlcz_result_metric_count(const dlcz_result* result) { return result ? result->value.metrics.size() : 0; }

dlcz_status dlcz_result_metric(const dlcz_result* result, size_t index, const char** name, double* value,
                               double* error) {
  return guard([&] {
    require_arg(result, "result");
    if (index >= result->value.metrics.size()) {
      throw dlcz::Error(dlcz::ErrorCode::kInvalidParameter, fmt::format("metric index {} out of range", index));
    }
    const dlcz::scenario::Metric& m = result->value.metrics[index];
    if (name) *name = m.name.c_str();
    if (value) *value = m.value;
    if (error) *error = m.standard_error;
  });
}

size_t dlcz_result_file_count(const dlcz_result* result) { return result ? result->files.size() : 0; }

const char* dlcz_result_file(const dlcz_result* result, size_t index) {
  if (!result || index >= result->files.size()) return nullptr;
  return result->files[index].c_str();
}

void dlcz_result_free(dlcz_result* result) { delete result; }

dlcz_status dlcz_sweep(const dlcz_config* config, const char* field, const char* const* values, size_t value_count,
                       const char* out_dir) {
  return guard([&] {
    require_arg(config, "config");
    require_arg(field, "field");
    require_arg(out_dir, "out_dir");
    if (value_count > 0) require_arg(values, "values");
    std::vector<std::string> list(values, values + value_count);
    dlcz::scenario::run_sweep(config->value, field, list, out_dir);
  });
}

dlcz_status dlcz_calibrate(const dlcz_config* config, const char* targets_path, dlcz_config** calibrated,
                           char** report) {
  if (calibrated) *calibrated = nullptr;
  if (report) *report = nullptr;
  return guard([&] {
    require_arg(config, "config");
    require_arg(targets_path, "targets_path");
    const dlcz::calibrate::Targets targets = dlcz::calibrate::load_targets(targets_path);
    try {
      const dlcz::calibrate::CalibrationReport r = dlcz::calibrate::calibrate(config->value, targets);
      if (report) *report = duplicate(r.to_text());
      if (calibrated) *calibrated = new dlcz_config{r.calibrated};
    } catch (const dlcz::calibrate::NotConverged& e) {
      if (report) *report = duplicate(e.report().to_text());
      if (calibrated) *calibrated = new dlcz_config{e.report().calibrated};
      throw;
    }
  });
}

dlcz_status dlcz_analyze_timetags(const char* path, const char* format, double window, double delay, uint64_t trials,
                                  double bin_width, double range_begin, double range_end, const char* out_dir,
                                  dlcz_counts* counts) {
  return guard([&] {
    require_arg(path, "path");
    require_arg(out_dir, "out_dir");
    namespace analysis = dlcz::analysis;
    const analysis::TimetagFormat fmt_id = analysis::parse_timetag_format(format ? format : "csv");
    const analysis::ImportResult loaded = analysis::load_timetags(path, fmt_id, analysis::kDefaultResolution);
    const auto& records = loaded.stream.records;
    const std::uint64_t n = trials ? trials : static_cast<std::uint64_t>(records.size());
    const dlcz::photon::CoincidenceStats stats =
        analysis::windowed_coincidences(records, window, n, delay, loaded.stream.resolution);

    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    {
      std::ofstream out(dir / "stats.txt", std::ios::binary);
      if (!out) throw dlcz::Error(dlcz::ErrorCode::kIo, fmt::format("cannot write {}", (dir / "stats.txt").string()));
      out << fmt::format("source = {}\nwindow_s = {}\ndelay_s = {}\ntrials_given = {}\n", path, window, delay,
                         trials ? "true" : "false");
      for (const std::string& w : loaded.warnings) out << "warning = " << w << "\n";
      out << stats.to_key_value();
    }
    if (bin_width > 0.0) {
      const analysis::Channel stops[] = {analysis::Channel::kRead1, analysis::Channel::kRead2};
      const analysis::Histogram h = analysis::start_stop_histogram(records, analysis::Channel::kWrite, stops,
                                                                   bin_width, range_begin, range_end,
                                                                   analysis::Normalization::kRaw,
                                                                   loaded.stream.resolution);
      std::ofstream out(dir / "histogram.csv", std::ios::binary);
      if (!out) throw dlcz::Error(dlcz::ErrorCode::kIo, "cannot write histogram.csv");
      analysis::export_csv(h, out);
    }
    if (counts) {
      *counts = {stats.trials, stats.n_w,  stats.n_r,   stats.n_r1,   stats.n_r2,
                 stats.n_wr,   stats.n_wr1, stats.n_wr2, stats.n_wr1r2};
    }
  });
}

dlcz_status dlcz_antibunching_alpha(const dlcz_counts* counts, double* alpha, double* error) {
  return guard([&] {
    require_arg(counts, "counts");
    dlcz::photon::CoincidenceStats s;
    s.trials = counts->trials;
    s.n_w = counts->n_w;
    s.n_r = counts->n_r;
    s.n_r1 = counts->n_r1;
    s.n_r2 = counts->n_r2;
    s.n_wr = counts->n_wr;
    s.n_wr1 = counts->n_wr1;
    s.n_wr2 = counts->n_wr2;
    s.n_wr1r2 = counts->n_wr1r2;
    s.validate();
    const dlcz::Estimate a = dlcz::photon::antibunching_alpha(s);
    if (alpha) *alpha = a.value;
    if (error) *error = a.standard_error;
  });
}

dlcz_status dlcz_alpha_model_curve(double p, double c, double* alpha) {
  return guard([&] {
    require_arg(alpha, "alpha");
    *alpha = dlcz::photon::alpha_model_curve(p, c);
  });
}

dlcz_status dlcz_selectivity(const double* probabilities, size_t count, double* selectivity) {
  return guard([&] {
    require_arg(probabilities, "probabilities");
    require_arg(selectivity, "selectivity");
    const std::vector<double> s = dlcz::sequencer::selectivity({probabilities, count});
    std::copy(s.begin(), s.end(), selectivity);
  });
}

dlcz_status dlcz_rephasing_time(const dlcz_config* config, double creation_time, double* time) {
  return guard([&] {
    require_arg(config, "config");
    require_arg(time, "time");
    *time = dlcz::sequencer::rephasing_time(config->value.sequence, config->value.resolved_physics(), creation_time);
  });
}

}  // extern "C"
