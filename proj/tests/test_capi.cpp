#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "dlcz/dlcz.h"

namespace fs = std::filesystem;

namespace {

struct Config {
  dlcz_config* p = nullptr;
  ~Config() { dlcz_config_free(p); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  dlcz_string_free(s);
  return out;
}

fs::path base() { return fs::temp_directory_path() / "dlcz_test_capi"; }

fs::path scratch(const char* name) {
  const fs::path p = base() / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

const char* kSmall = R"(
[run]
scenario = standard
target_heralds = 200
seed = 3
[ensemble]
atom_count = 300
[source]
p_w = 2 %
fock_cutoff = 12
[scan]
readout_times = 1 us, 10 us, 30 us
)";

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strlen(dlcz_version()) > 0);
  CHECK(std::string(dlcz_status_name(DLCZ_OK)) == "ok");
  CHECK(std::string(dlcz_environment_prefix()) == "DLCZ_");
  const std::string help = take(dlcz_schema_help());
  CHECK(help.find("sequence.reversal_latency") != std::string::npos);
}

TEST_CASE("config handles") {
  Config c;
  REQUIRE(dlcz_config_parse(kSmall, "small.cfg", &c.p) == DLCZ_OK);
  char* v = nullptr;
  REQUIRE(dlcz_config_get(c.p, "source.p_w", &v) == DLCZ_OK);
  CHECK(take(v) == "0.02");
  CHECK(dlcz_config_set(c.p, "sequence.reversal_latency", "2 us") == DLCZ_OK);
  CHECK(dlcz_config_set(c.p, "sequence.reversal_latency", "2") == DLCZ_ERR_CONFIG);
  CHECK(std::string(dlcz_last_error_field()) == "sequence.reversal_latency");
  CHECK(dlcz_config_validate(c.p) == DLCZ_OK);

  Config d;
  REQUIRE(dlcz_config_clone(c.p, &d.p) == DLCZ_OK);
  char* a = nullptr;
  char* b = nullptr;
  dlcz_config_to_string(c.p, &a);
  dlcz_config_to_string(d.p, &b);
  CHECK(take(a) == take(b));

  Config bad;
  CHECK(dlcz_config_parse("[ensemble]\n\ntemperature = -1 uK\n", "bad.cfg", &bad.p) == DLCZ_ERR_CONFIG);
  CHECK(bad.p == nullptr);
  CHECK(dlcz_last_error_line() == 3);
  CHECK(std::string(dlcz_last_error_field()) == "ensemble.temperature");
  CHECK(dlcz_config_get(nullptr, "source.p_w", &v) == DLCZ_ERR_INVALID_PARAMETER);
}

TEST_CASE("run and results") {
  Config c;
  REQUIRE(dlcz_config_parse(kSmall, "small.cfg", &c.p) == DLCZ_OK);
  const fs::path out = scratch("run");
  dlcz_result* r = nullptr;
  REQUIRE(dlcz_run(c.p, out.c_str(), &r) == DLCZ_OK);
  bool saw_pw = false;
  for (size_t i = 0; i < dlcz_result_metric_count(r); ++i) {
    const char* name = nullptr;
    double value = 0, err = 0;
    REQUIRE(dlcz_result_metric(r, i, &name, &value, &err) == DLCZ_OK);
    if (std::string(name) == "p_w") {
      saw_pw = true;
      CHECK(std::abs(value - 0.02) < 5 * err);
    }
  }
  CHECK(saw_pw);
  for (size_t i = 0; i < dlcz_result_file_count(r); ++i) CHECK(fs::exists(out / dlcz_result_file(r, i)));
  CHECK(dlcz_result_metric(r, 1000, nullptr, nullptr, nullptr) == DLCZ_ERR_INVALID_PARAMETER);
  dlcz_result_free(r);

  const char* values[] = {"1 %", "2 %"};
  REQUIRE(dlcz_sweep(c.p, "source.p_w", values, 2, scratch("sweep").c_str()) == DLCZ_OK);
  CHECK(fs::exists(base() / "sweep" / "summary.csv"));
}

TEST_CASE("budget error code") {
  Config c;
  REQUIRE(dlcz_config_parse(kSmall, "small.cfg", &c.p) == DLCZ_OK);
  dlcz_config_set(c.p, "run.max_ensembles", "1");
  dlcz_result* r = nullptr;
  CHECK(dlcz_run(c.p, scratch("budget").c_str(), &r) == DLCZ_ERR_BUDGET_EXCEEDED);
  CHECK(r == nullptr);
}

TEST_CASE("calibration") {
  Config c;
  REQUIRE(dlcz_config_parse(kSmall, "small.cfg", &c.p) == DLCZ_OK);
  const fs::path targets = scratch("targets.cfg");
  std::ofstream(targets) << "[targets]\npeak_time = 20.84 us\n";
  Config calibrated;
  char* report = nullptr;
  REQUIRE(dlcz_calibrate(c.p, targets.c_str(), &calibrated.p, &report) == DLCZ_OK);
  CHECK(take(report).find("status: converged") != std::string::npos);
  double t = 0;
  REQUIRE(dlcz_rephasing_time(calibrated.p, 0.0, &t) == DLCZ_OK);
  CHECK(std::abs(t - 20.84e-6) < 1e-9);

  std::ofstream(targets) << "[targets]\nwhatever = 1\n";
  CHECK(dlcz_calibrate(c.p, targets.c_str(), nullptr, nullptr) == DLCZ_ERR_CONFIG);
}

TEST_CASE("timetag analysis") {
  const fs::path file = scratch("tags.csv");
  {
    std::ofstream out(file);
    out << "# resolution_s=1e-09\ntick,channel,ensemble_id,trial_index\n";
    out << "1000,write,0,0\n1100,read1,0,0\n";
    out << "5000,write,0,1\n5050,read1,0,1\n5060,read2,0,1\n";
  }
  dlcz_counts counts{};
  REQUIRE(dlcz_analyze_timetags(file.c_str(), "csv", 200e-9, 0.0, 2, 10e-9, 0.0, 200e-9,
                                scratch("analysis").c_str(), &counts) == DLCZ_OK);
  CHECK(counts.n_w == 2);
  CHECK(counts.n_wr1 == 2);
  CHECK(counts.n_wr1r2 == 1);
  CHECK(fs::exists(base() / "analysis" / "histogram.csv"));
  CHECK(dlcz_analyze_timetags(file.c_str(), "xml", 200e-9, 0.0, 2, 0, 0, 0, scratch("xml").c_str(), &counts) ==
        DLCZ_ERR_INVALID_PARAMETER);
}

TEST_CASE("scalar helpers") {
  double a = 0, e = 0;
  CHECK(dlcz_alpha_model_curve(0.01, 1.0, &a) == DLCZ_OK);
  CHECK(a == doctest::Approx(0.0394082).epsilon(1e-5));
  dlcz_counts c{};
  c.trials = 1000;
  c.n_w = 1000;
  c.n_r = c.n_wr = 190;
  c.n_r1 = c.n_wr1 = 100;
  c.n_r2 = c.n_wr2 = 100;
  c.n_wr1r2 = 10;
  CHECK_MESSAGE(dlcz_antibunching_alpha(&c, &a, &e) == DLCZ_OK, dlcz_last_error());
  // P(1,2|w) / (P(1|w) P(2|w)) = 0.01 / 0.01
  CHECK(a == doctest::Approx(1.0));
  const double p[] = {0.03, 0.01};
  double s[2];
  CHECK(dlcz_selectivity(p, 2, s) == DLCZ_OK);
  CHECK(s[0] == doctest::Approx(0.75));
  CHECK(dlcz_selectivity(p, 0, s) == DLCZ_ERR_INVALID_PARAMETER);
}
