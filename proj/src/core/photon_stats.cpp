#include "dlcz/photon_stats.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <fmt/core.h>
#include <sstream>

#include "dlcz/error.hpp"
#include "dlcz/fit.hpp"

namespace dlcz::photon {

namespace {

bool is_probability(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

void require_probability(double x, const char* name) {
  if (!is_probability(x)) {
    throw Error(ErrorCode::kInvalidParameter, fmt::format("{} = {} is not in [0, 1]", name, x));
  }
}

Estimate binomial(std::uint64_t k, std::uint64_t n) {
  const double p = static_cast<double>(k) / static_cast<double>(n);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

// relative variance contribution (1 - p) / k of a binomial count k out of n
double relative_variance(std::uint64_t k, std::uint64_t n) {
  const double p = static_cast<double>(k) / static_cast<double>(n);
  return (1.0 - p) / static_cast<double>(k);
}

std::string format_optional(const std::optional<Estimate>& e, bool error) {
  if (!e) return "";
  return fmt::format("{}", error ? e->standard_error : e->value);
}

}  // namespace

// ---------------------------------------------------------------- emission

void EmissionModel::validate() const {
  require(std::isfinite(p) && p >= 0.0 && p < 1.0, fmt::format("emission p = {} not in [0, 1)", p));
  require(fock_cutoff >= 2, "emission.fock_cutoff must be >= 2");
  require(norm_deficit() < 1e-6,
          fmt::format("fock cutoff {} too small for p = {}: norm deficit {:.3g} >= 1e-6",
                      fock_cutoff, p, norm_deficit()));
}

double EmissionModel::norm_deficit() const { return std::pow(p, fock_cutoff + 1); }

double EmissionModel::probability(int n) const {
  if (n < 0 || n > fock_cutoff) return 0.0;
  if (p == 0.0) return n == 0 ? 1.0 : 0.0;
  return (1.0 - p) * std::pow(p, n) / (1.0 - norm_deficit());
}

PairNumbers sample_pair_numbers(const EmissionModel& model, CounterRng& rng) {
  const double u = rng.uniform_positive();
  if (model.p == 0.0) return {};
  // inverse CDF of the geometric law restricted to [0, cutoff]
  const double tail = model.norm_deficit();
  const double v = tail + u * (1.0 - tail);
  if (v > model.p) return {};
  int n = static_cast<int>(std::floor(std::log(v) / std::log(model.p)));
  n = std::clamp(n, 0, model.fock_cutoff);
  return {n, n};
}

// ---------------------------------------------------------------- detection

void DetectionChain::validate() const {
  require_probability(filter_transmission, "detection.filter_transmission");
  require_probability(spd_efficiency, "detection.spd_efficiency");
  require_probability(read_splitter_ratio, "detection.read_splitter_ratio");
  require(std::isfinite(dark_rate) && dark_rate >= 0.0, "detection.dark_rate must be >= 0");
  require(std::isfinite(coincidence_window) && coincidence_window > 0.0,
          "detection.coincidence_window must be > 0");
}

double DetectionChain::dark_probability() const {
  return -std::expm1(-dark_rate * coincidence_window);
}

double DetectionChain::write_click_probability(const EmissionModel& emission) const {
  const double eta = arm_efficiency();
  double no_click = 0.0;
  for (int n = 0; n <= emission.fock_cutoff; ++n) {
    no_click += emission.probability(n) * std::pow(1.0 - eta, n);
  }
  return 1.0 - no_click * (1.0 - dark_probability());
}

EmissionModel emission_for_write_probability(double p_w, const DetectionChain& chain,
                                             int fock_cutoff) {
  chain.validate();
  const double floor = chain.write_click_probability(EmissionModel{0.0, fock_cutoff});
  require(p_w > floor && p_w < 1.0,
          fmt::format("write click probability {} not reachable (dark floor {})", p_w, floor));
  auto residual = [&](double p) {
    return chain.write_click_probability(EmissionModel{p, fock_cutoff}) - p_w;
  };
  double hi = 0.999;
  if (residual(hi) < 0.0) {
    throw_invalid(fmt::format("write click probability {} needs p >= 1", p_w));
  }
  std::uintmax_t iterations = 200;
  auto tolerance = [](double a, double b) { return std::abs(b - a) <= 1e-16; };
  const auto root =
      boost::math::tools::toms748_solve(residual, 0.0, hi, tolerance, iterations);
  EmissionModel model{0.5 * (root.first + root.second), fock_cutoff};
  model.validate();
  return model;
}

void NoiseModel::validate() const {
  require(std::isfinite(kappa) && kappa >= 0.0, "noise.kappa must be >= 0");
  require(std::isfinite(floor) && floor >= 0.0, "noise.floor must be >= 0");
  require(std::isfinite(cavity_suppression) && cavity_suppression >= 1.0,
          "noise.cavity_suppression must be >= 1");
}

double NoiseModel::read_noise_mean(double write_click_probability) const {
  return kappa / cavity_suppression * write_click_probability + floor;
}

int thin(int n, double efficiency, CounterRng& rng) {
  int survivors = 0;
  for (int i = 0; i < n; ++i) survivors += rng.uniform() < efficiency ? 1 : 0;
  return survivors;
}

bool detect_write(int photons, const DetectionChain& chain, CounterRng& rng) {
  bool click = thin(photons, chain.arm_efficiency(), rng) > 0;
  const double dark = chain.dark_probability();
  if (dark > 0.0 && rng.uniform() < dark) click = true;
  return click;
}

ReadClicks detect_read(std::span<const SpinWaveReadout> spinwaves, const DetectionChain& chain,
                       double noise_mean, CounterRng& rng) {
  ReadClicks clicks;
  const double split = chain.read_splitter_ratio;
  for (const SpinWaveReadout& sw : spinwaves) {
    if (!is_probability(sw.eta)) {
      throw Error(ErrorCode::kInvalidParameter,
                  fmt::format("retrieval efficiency {} is not in [0, 1]", sw.eta));
    }
    const double survive = sw.eta * chain.arm_efficiency();
    for (int i = 0; i < sw.excitations; ++i) {
      const double u = rng.uniform();
      if (u < survive * split) {
        clicks.read1 = true;
      } else if (u < survive) {
        clicks.read2 = true;
      }
    }
  }
  if (noise_mean > 0.0) {
    if (rng.uniform() < -std::expm1(-noise_mean * split)) clicks.read1 = true;
    if (rng.uniform() < -std::expm1(-noise_mean * (1.0 - split))) clicks.read2 = true;
  }
  const double dark = chain.dark_probability();
  if (dark > 0.0) {
    if (rng.uniform() < dark) clicks.read1 = true;
    if (rng.uniform() < dark) clicks.read2 = true;
  }
  return clicks;
}

TrialOutcome detect_trial(PairNumbers numbers, const DetectionChain& chain,
                          double eta_ret_at_readout, double noise_mean, CounterRng& rng) {
  require_probability(eta_ret_at_readout, "eta_ret_at_readout");
  require(noise_mean >= 0.0, "noise mean must be >= 0");
  TrialOutcome outcome;
  outcome.write = detect_write(numbers.write, chain, rng);
  const SpinWaveReadout readout{numbers.spinwave, eta_ret_at_readout};
  const ReadClicks clicks = detect_read({&readout, 1}, chain, noise_mean, rng);
  outcome.read1 = clicks.read1;
  outcome.read2 = clicks.read2;
  return outcome;
}

// ---------------------------------------------------------------- statistics

void CoincidenceStats::add(const TrialOutcome& o) {
  ++trials;
  const bool r = o.read();
  n_w += o.write;
  n_r += r;
  n_r1 += o.read1;
  n_r2 += o.read2;
  if (o.write) {
    n_wr += r;
    n_wr1 += o.read1;
    n_wr2 += o.read2;
    n_wr1r2 += o.read1 && o.read2;
  }
}

CoincidenceStats& CoincidenceStats::merge(const CoincidenceStats& o) {
  trials += o.trials;
  n_w += o.n_w;
  n_r += o.n_r;
  n_r1 += o.n_r1;
  n_r2 += o.n_r2;
  n_wr += o.n_wr;
  n_wr1 += o.n_wr1;
  n_wr2 += o.n_wr2;
  n_wr1r2 += o.n_wr1r2;
  return *this;
}

void CoincidenceStats::validate() const {
  require(n_w <= trials && n_r <= trials, "click counts exceed trial count");
  require(n_wr <= std::min(n_w, n_r), "n_wr exceeds min(n_w, n_r)");
  require(n_wr1 <= n_wr && n_wr2 <= n_wr && n_wr1r2 <= std::min(n_wr1, n_wr2),
          "inconsistent coincidence counts");
  require(n_r1 <= n_r && n_r2 <= n_r, "inconsistent read counts");
}

Estimate CoincidenceStats::p_w() const {
  if (trials == 0) throw Error(ErrorCode::kInsufficientStatistics, "no trials");
  return binomial(n_w, trials);
}

Estimate CoincidenceStats::p_r() const {
  if (trials == 0) throw Error(ErrorCode::kInsufficientStatistics, "no trials");
  return binomial(n_r, trials);
}

Estimate CoincidenceStats::p_wr() const {
  if (trials == 0) throw Error(ErrorCode::kInsufficientStatistics, "no trials");
  return binomial(n_wr, trials);
}

std::optional<Estimate> CoincidenceStats::eta_ret() const {
  if (n_w == 0) return std::nullopt;
  return binomial(n_wr, n_w);
}

std::optional<Estimate> CoincidenceStats::alpha() const {
  if (n_wr1 == 0 || n_wr2 == 0) return std::nullopt;
  return antibunching_alpha(*this);
}

std::optional<Estimate> CoincidenceStats::g2_wr() const {
  if (n_w == 0 || n_r == 0) return std::nullopt;
  return g2_cross(*this);
}

std::string CoincidenceStats::to_key_value() const {
  std::string out;
  auto line = [&out](const char* key, const std::string& value) {
    out += fmt::format("{} = {}\n", key, value);
  };
  auto optional_line = [&](const char* key, const std::optional<Estimate>& e) {
    line(key, e ? fmt::format("{}", e->value) : "undefined");
    line(fmt::format("{}_err", key).c_str(), e ? fmt::format("{}", e->standard_error) : "undefined");
  };
  line("trials", fmt::format("{}", trials));
  line("n_w", fmt::format("{}", n_w));
  line("n_r", fmt::format("{}", n_r));
  line("n_r1", fmt::format("{}", n_r1));
  line("n_r2", fmt::format("{}", n_r2));
  line("n_wr", fmt::format("{}", n_wr));
  line("n_wr1", fmt::format("{}", n_wr1));
  line("n_wr2", fmt::format("{}", n_wr2));
  line("n_wr1r2", fmt::format("{}", n_wr1r2));
  optional_line("p_w", trials ? std::optional<Estimate>(p_w()) : std::nullopt);
  optional_line("eta_ret", eta_ret());
  optional_line("alpha", alpha());
  optional_line("g2_wr", g2_wr());
  return out;
}

std::string CoincidenceStats::csv_header() {
  return "trials,n_w,n_r,n_r1,n_r2,n_wr,n_wr1,n_wr2,n_wr1r2,p_w,p_w_err,eta_ret,eta_ret_err,"
         "alpha,alpha_err,g2_wr,g2_wr_err";
}

std::string CoincidenceStats::to_csv_row() const {
  const std::optional<Estimate> pw = trials ? std::optional<Estimate>(p_w()) : std::nullopt;
  const auto eta = eta_ret();
  const auto a = alpha();
  const auto g2 = g2_wr();
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", trials, n_w, n_r,
                     n_r1, n_r2, n_wr, n_wr1, n_wr2, n_wr1r2, format_optional(pw, false),
                     format_optional(pw, true), format_optional(eta, false),
                     format_optional(eta, true), format_optional(a, false),
                     format_optional(a, true), format_optional(g2, false),
                     format_optional(g2, true));
}

CoincidenceStats CoincidenceStats::from_csv_row(const std::string& row) {
  std::istringstream in(row);
  std::string cell;
  std::uint64_t values[9];
  for (auto& v : values) {
    if (!std::getline(in, cell, ',')) throw Error(ErrorCode::kParse, "truncated stats row");
    try {
      std::size_t used = 0;
      v = std::stoull(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParse, fmt::format("bad count '{}' in stats row", cell));
    }
  }
  CoincidenceStats s{values[0], values[1], values[2], values[3], values[4],
                     values[5], values[6], values[7], values[8]};
  s.validate();
  return s;
}

CoincidenceStats accumulate(std::span<const TrialOutcome> outcomes) {
  if (outcomes.empty()) throw Error(ErrorCode::kInsufficientStatistics, "accumulate: empty outcome stream");
  CoincidenceStats stats;
  for (const TrialOutcome& o : outcomes) stats.add(o);
  return stats;
}

Estimate antibunching_alpha(const CoincidenceStats& s) {
  if (s.n_wr1 == 0 || s.n_wr2 == 0) {
    throw Error(ErrorCode::kInsufficientStatistics,
                "antibunching parameter needs write-read1 and write-read2 coincidences");
  }
  const double n_w = static_cast<double>(s.n_w);
  const double denominator = static_cast<double>(s.n_wr1) * static_cast<double>(s.n_wr2);
  const double alpha = static_cast<double>(s.n_wr1r2) * n_w / denominator;
  const std::uint64_t triples = std::max<std::uint64_t>(s.n_wr1r2, 1);
  const double rel_var = relative_variance(triples, s.trials) + relative_variance(s.n_w, s.trials) +
                         relative_variance(s.n_wr1, s.trials) +
                         relative_variance(s.n_wr2, s.trials);
  const double scale = static_cast<double>(triples) * n_w / denominator;
  return {alpha, scale * std::sqrt(rel_var)};
}

double alpha_model_curve(double p, double c) {
  if (!(p > 0.0 && p < 1.0) || !(c > 0.0 && c <= 1.0)) {
    throw Error(ErrorCode::kInvalidParameter,
                fmt::format("alpha model needs p in (0,1) and c in (0,1], got p={} c={}", p, c));
  }
  const double denominator = c * (1.0 + p);
  return 2.0 * p * (2.0 * c * (1.0 + p) - p) / (denominator * denominator);
}

AlphaFit fit_alpha_c(std::span<const AlphaPoint> points) {
  if (points.empty()) throw Error(ErrorCode::kInsufficientStatistics, "no alpha points to fit");
  for (const AlphaPoint& point : points) {
    require(point.alpha.standard_error > 0.0, "alpha points need positive errors");
  }
  auto chi2 = [&](double c) {
    double sum = 0.0;
    for (const AlphaPoint& point : points) {
      const double r = (point.alpha.value - alpha_model_curve(point.p, c)) / point.alpha.standard_error;
      sum += r * r;
    }
    return sum;
  };
  constexpr double kLower = 1e-3;
  const auto best = boost::math::tools::brent_find_minima(chi2, kLower, 1.0, 50);
  const double c = best.first;
  const double h = 1e-4 * c;
  const double lo = std::max(c - h, kLower);
  const double hi = std::min(c + h, 1.0);
  const double mid = 0.5 * (lo + hi);
  const double step = 0.5 * (hi - lo);
  const double curvature = (chi2(hi) - 2.0 * chi2(mid) + chi2(lo)) / (step * step);
  AlphaFit fit;
  fit.c = {c, curvature > 0.0 ? std::sqrt(2.0 / curvature) : 0.0};
  fit.chi2 = best.second;
  return fit;
}

Estimate g2_cross(const CoincidenceStats& s) {
  if (s.n_w == 0 || s.n_r == 0 || s.trials == 0) {
    throw Error(ErrorCode::kInsufficientStatistics, "g2 needs write and read clicks");
  }
  const double g2 = static_cast<double>(s.n_wr) * static_cast<double>(s.trials) /
                    (static_cast<double>(s.n_w) * static_cast<double>(s.n_r));
  if (s.n_wr == 0) return {0.0, 0.0};
  const double rel_var = relative_variance(s.n_wr, s.trials) + relative_variance(s.n_w, s.trials) +
                         relative_variance(s.n_r, s.trials);
  return {g2, g2 * std::sqrt(rel_var)};
}

double snr_at_rephasing(std::span<const CurvePoint> curve, TimeWindow background,
                        TimeWindow peak, PeakModel model) {
  double background_sum = 0.0;
  std::size_t background_count = 0;
  std::vector<CurvePoint> peak_points;
  for (const CurvePoint& point : curve) {
    if (background.contains(point.time)) {
      background_sum += point.value;
      ++background_count;
    }
    if (peak.contains(point.time)) peak_points.push_back(point);
  }
  if (background_count == 0) throw Error(ErrorCode::kInvalidParameter, "SNR: background region is empty");
  if (peak_points.empty()) throw Error(ErrorCode::kInvalidParameter, "SNR: peak region is empty");
  const double background_mean = background_sum / static_cast<double>(background_count);
  if (!(background_mean > 0.0)) {
    throw Error(ErrorCode::kInsufficientStatistics, "SNR: background mean is zero");
  }
  double maximum = peak_points.front().value;
  for (const CurvePoint& p : peak_points) maximum = std::max(maximum, p.value);
  if (model == PeakModel::kGaussianFit && peak_points.size() >= 4) {
    const fit::GaussianPeak fitted = fit::fit_gaussian_peak(peak_points, background_mean);
    maximum = fitted.maximum();
  }
  return maximum / background_mean;
}

ReadoutExpectation expected_readout(const EmissionModel& emission, const DetectionChain& chain,
                                    double eta_ret, double noise_mean) {
  emission.validate();
  chain.validate();
  require_probability(eta_ret, "eta_ret");
  const double dark = chain.dark_probability();
  const double eta_w = chain.arm_efficiency();
  const double a1 = eta_ret * chain.arm_efficiency() * chain.read_splitter_ratio;
  const double a2 = eta_ret * chain.arm_efficiency() * (1.0 - chain.read_splitter_ratio);
  const double quiet1 = std::exp(-noise_mean * chain.read_splitter_ratio) * (1.0 - dark);
  const double quiet2 = std::exp(-noise_mean * (1.0 - chain.read_splitter_ratio)) * (1.0 - dark);

  ReadoutExpectation e;
  for (int n = 0; n <= emission.fock_cutoff; ++n) {
    const double pn = emission.probability(n);
    const double write = 1.0 - std::pow(1.0 - eta_w, n) * (1.0 - dark);
    const double none1 = std::pow(1.0 - a1, n) * quiet1;
    const double none2 = std::pow(1.0 - a2, n) * quiet2;
    const double none12 = std::pow(1.0 - a1 - a2, n) * quiet1 * quiet2;
    e.p_w += pn * write;
    e.p_r += pn * (1.0 - none12);
    e.p_wr += pn * write * (1.0 - none12);
    e.p_wr1 += pn * write * (1.0 - none1);
    e.p_wr2 += pn * write * (1.0 - none2);
    e.p_wr1r2 += pn * write * (1.0 - none1 - none2 + none12);
  }
  return e;
}

}  // namespace dlcz::photon
