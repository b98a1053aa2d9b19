#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dlcz/analysis_io.hpp"
#include "dlcz/error.hpp"
#include "dlcz/rng.hpp"

using namespace dlcz;
using namespace dlcz::analysis;

namespace {

const Channel kStops[] = {Channel::kRead1, Channel::kRead2};

DetectionRecord rec(std::int64_t tick, Channel ch, std::uint64_t ensemble = 0, std::uint32_t trial = 0) {
  return {tick, ch, ensemble, trial};
}

}  // namespace

TEST_CASE("start-stop histogram") {
  SUBCASE("single pair") {
    const std::vector<DetectionRecord> r{rec(0, Channel::kWrite), rec(5000, Channel::kRead1)};
    const Histogram h = start_stop_histogram(r, Channel::kWrite, kStops, 1e-6, 0.0, 10e-6);
    REQUIRE(h.counts.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(h.counts[i] == (i == 5 ? 1.0 : 0.0));
    CHECK(h.starts == 1);
  }
  SUBCASE("uniform stops give a flat histogram") {
    CounterRng rng(1, 0);
    std::vector<DetectionRecord> r;
    const int starts = 20000;
    for (int i = 0; i < starts; ++i) {
      const std::int64_t t0 = i * 100000LL;
      r.push_back(rec(t0, Channel::kWrite));
      r.push_back(rec(t0 + static_cast<std::int64_t>(rng.uniform() * 10000), Channel::kRead2));
    }
    const Histogram h = start_stop_histogram(r, Channel::kWrite, kStops, 1e-6, 0.0, 10e-6);
    double chi2 = 0.0;
    const double expected = starts / 10.0;
    for (double c : h.counts) chi2 += (c - expected) * (c - expected) / expected;
    // 9 degrees of freedom, 0.999 quantile 27.88
    CHECK(chi2 < 27.88);
    double total = 0;
    for (double c : h.counts) total += c;
    CHECK(total <= starts);
  }
  SUBCASE("per-start normalisation") {
    const std::vector<DetectionRecord> r{rec(0, Channel::kWrite), rec(100000, Channel::kWrite),
                                         rec(2500, Channel::kRead1)};
    const Histogram h = start_stop_histogram(r, Channel::kWrite, kStops, 1e-6, 0.0, 10e-6, Normalization::kPerStart);
    CHECK(h.counts[2] == doctest::Approx(0.5));
  }
  SUBCASE("no starts") {
    const std::vector<DetectionRecord> r{rec(10, Channel::kRead1)};
    try {
      start_stop_histogram(r, Channel::kWrite, kStops, 1e-6, 0.0, 10e-6);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInsufficientStatistics);
    }
  }
}

TEST_CASE("windowed coincidences") {
  const double window = 200e-9;
  SUBCASE("pair") {
    const std::vector<DetectionRecord> r{rec(1000, Channel::kWrite), rec(1100, Channel::kRead1)};
    const photon::CoincidenceStats s = windowed_coincidences(r, window, 1);
    CHECK(s.n_wr == 1);
    CHECK(s.n_wr1 == 1);
    CHECK(s.n_wr1r2 == 0);
  }
  SUBCASE("triple") {
    const std::vector<DetectionRecord> r{rec(1000, Channel::kWrite), rec(1050, Channel::kRead1),
                                         rec(1150, Channel::kRead2)};
    const photon::CoincidenceStats s = windowed_coincidences(r, window, 1);
    CHECK(s.n_wr1r2 == 1);
  }
  SUBCASE("outside the window") {
    const std::vector<DetectionRecord> r{rec(1000, Channel::kWrite), rec(1300, Channel::kRead1)};
    CHECK(windowed_coincidences(r, window, 1).n_wr == 0);
    CHECK(windowed_coincidences(r, window, 1, 250e-9).n_wr == 1);
  }
  SUBCASE("each stop used once") {
    const std::vector<DetectionRecord> r{rec(1000, Channel::kWrite), rec(1010, Channel::kWrite),
                                         rec(1100, Channel::kRead1)};
    CHECK(windowed_coincidences(r, window, 2).n_wr == 1);
  }
  SUBCASE("too few trials") {
    const std::vector<DetectionRecord> r{rec(1000, Channel::kWrite), rec(5000, Channel::kWrite)};
    CHECK_THROWS_AS(windowed_coincidences(r, window, 1), Error);
  }

  // single photons split by a beam splitter, then the stops moved to random trials
  CounterRng rng(2, 0);
  const int trials = 200000;
  std::vector<DetectionRecord> r;
  std::vector<DetectionRecord> reads;
  for (int i = 0; i < trials; ++i) {
    const std::int64_t t0 = i * 10000LL;
    r.push_back(rec(t0, Channel::kWrite));
    if (rng.uniform() < 0.3) reads.push_back(rec(t0 + 100, rng.uniform() < 0.5 ? Channel::kRead1 : Channel::kRead2));
  }
  SUBCASE("antibunched stream has no triples") {
    std::vector<DetectionRecord> all = r;
    all.insert(all.end(), reads.begin(), reads.end());
    CHECK(windowed_coincidences(all, window, trials).n_wr1r2 == 0);
  }
  SUBCASE("shuffled stops give accidental triples") {
    std::vector<DetectionRecord> all = r;
    for (DetectionRecord d : reads) {
      d.tick = static_cast<std::int64_t>(rng.uniform() * trials) * 10000LL + 100;
      all.push_back(d);
    }
    const photon::CoincidenceStats s = windowed_coincidences(all, window, trials);
    const Estimate a = photon::antibunching_alpha(s);
    CHECK(std::abs(a.value - 1.0) < 3.0 * a.standard_error);
  }
  SUBCASE("independent of record order") {
    std::vector<DetectionRecord> all = r;
    all.insert(all.end(), reads.begin(), reads.end());
    const photon::CoincidenceStats s1 = windowed_coincidences(all, window, trials);
    std::reverse(all.begin(), all.end());
    CHECK(windowed_coincidences(all, window, trials) == s1);
  }
}

TEST_CASE("csv round trips") {
  SUBCASE("histogram") {
    Histogram h;
    h.bin_edges = {0.0, 1e-7, 2.5e-7, 1e-6};
    h.counts = {3, 0, 7};
    h.starts = 12;
    std::stringstream s;
    export_csv(h, s);
    CHECK(import_histogram_csv(s) == h);
  }
  SUBCASE("curve") {
    const std::vector<CurvePoint> c{{1e-6, 0.1, 0.01}, {2.084e-5, 0.123456789012345, 1e-3}};
    std::stringstream s;
    export_csv(c, s, "eta_ret");
    CHECK(s.str().rfind("time_s,eta_ret,eta_ret_err\n", 0) == 0);
    const auto back = import_curve_csv(s);
    REQUIRE(back.size() == 2);
    CHECK(back[1].time == c[1].time);
    CHECK(back[1].value == c[1].value);
    CHECK(back[1].standard_error == c[1].standard_error);
  }
  SUBCASE("timetags") {
    TimetagStream t;
    t.records = {rec(5, Channel::kWrite, 1, 2), rec(17, Channel::kRead2, 1, 2), rec(1LL << 40, Channel::kRead1, 9, 0)};
    std::stringstream s;
    export_csv(t, s);
    CHECK(import_timetags_csv(s).stream == t);
  }
  SUBCASE("malformed row names its line") {
    std::stringstream s("time_s,eta,eta_err\na,b\n");
    try {
      import_curve_csv(s);
      FAIL("expected an error");
    } catch (const LocatedError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
}

TEST_CASE("binary timetags") {
  TimetagStream t;
  t.records = {rec(5, Channel::kWrite), rec(-3, Channel::kRead1), rec(123456789012LL, Channel::kRead2)};
  std::stringstream bin(std::ios::in | std::ios::out | std::ios::binary);
  write_timetags_binary(t, bin);
  const std::string bytes = bin.str();
  REQUIRE(bytes.size() == 16 + 3 * 16);
  CHECK(bytes.substr(0, 8) == "DLCZTAG1");
  // record 2: tick -3 little-endian, channel byte 1, zero padding
  const unsigned char* r1 = reinterpret_cast<const unsigned char*>(bytes.data()) + 32;
  CHECK(r1[0] == 0xfd);
  for (int i = 1; i < 8; ++i) CHECK(r1[i] == 0xff);
  CHECK(r1[8] == 1);
  for (int i = 9; i < 16; ++i) CHECK(r1[i] == 0);

  const ImportResult back = read_timetags_binary(bin);
  CHECK(back.stream == t);

  // the text dump and the binary file describe the same clicks
  std::stringstream text;
  export_csv(t, text);
  CHECK(import_timetags_csv(text).stream.records == back.stream.records);

  SUBCASE("resolution mismatch warns") {
    std::stringstream again(bytes);
    const ImportResult w = read_timetags_binary(again, 1e-12);
    CHECK(w.warnings.size() == 1);
  }
}
