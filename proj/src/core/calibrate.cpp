#include "dlcz/calibrate.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <fmt/core.h>
#include <fstream>
#include <sstream>

#include "dlcz/error.hpp"
#include "dlcz/fit.hpp"

namespace dlcz::calibrate {

namespace {

using sequencer::GradientMode;
using sequencer::PhysicsSetup;
using sequencer::SequenceConfig;
using sequencer::StatsSetup;

constexpr int kQuadratureOrder = 40;

const Quadrature& hermite() {
  static const Quadrature q = gauss_hermite(kQuadratureOrder);
  return q;
}

// Root of f on [lo, hi] after expanding `hi` geometrically until the sign changes.
template <typename F>
double bracket_root(F f, double lo, double hi, double grow, int max_grow, const std::string& what) {
  double flo = f(lo), fhi = f(hi);
  for (int i = 0; i < max_grow && flo * fhi > 0.0; ++i) {
    lo = hi;
    flo = fhi;
    hi *= grow;
    fhi = f(hi);
  }
  if (flo * fhi > 0.0) throw Error(ErrorCode::kNotConverged, fmt::format("{}: no sign change found", what));
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  boost::uintmax_t iterations = 200;
  const auto r = boost::math::tools::toms748_solve(
      f, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(50), iterations);
  return 0.5 * (r.first + r.second);
}

// Per quadrature node: retrieval efficiency of each slot's spin-wave.
struct SlotEfficiencies {
  std::vector<std::vector<double>> eta;
  std::vector<double> weight;
};

double jitter_slope(const SequenceConfig& seq, const PhysicsSetup& phys, GradientMode mode) {
  if (mode != GradientMode::kReversal || phys.peak_jitter <= 0.0) return 0.0;
  const physics::GradientWaveform wf = phys.waveform(mode, seq.reversal_latency);
  return -wf.amplitude(sequencer::rephasing_time(seq, phys, 0.0));
}

SlotEfficiencies slot_efficiencies(const SequenceConfig& seq, const PhysicsSetup& phys, GradientMode mode,
                                   const std::vector<double>& offsets, double t_read, bool dephased = false) {
  const physics::GradientWaveform wf = phys.waveform(mode, seq.reversal_latency);
  const double slope = jitter_slope(seq, phys, mode);
  SlotEfficiencies out;
  auto fill = [&](double area_offset, double weight) {
    std::vector<double> etas;
    for (double offset : offsets) {
      double overlap = 0.0;
      if (!dephased) {
        overlap = physics::gaussian_ensemble_overlap(phys.ensemble, phys.mode(offset), wf, phys.mixture, t_read,
                                                     area_offset, phys.motion);
      }
      double eta = phys.eta0 * overlap;
      if (std::isfinite(phys.motional_lifetime)) eta *= std::exp(-(t_read - offset) / phys.motional_lifetime);
      etas.push_back(std::clamp(eta, 0.0, 1.0));
    }
    out.eta.push_back(std::move(etas));
    out.weight.push_back(weight);
  };
  if (slope == 0.0) {
    fill(0.0, 1.0);
  } else {
    const Quadrature& q = hermite();
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
      fill(slope * std::sqrt(2.0) * phys.peak_jitter * q.nodes[i], q.weights[i] / std::sqrt(constants::kPi));
    }
  }
  return out;
}

// P(write k clicks and any read click) per trial, for every slot k.
std::vector<double> coincidence_probabilities(const StatsSetup& stats, const SlotEfficiencies& eff) {
  const photon::EmissionModel emission = stats.emission();
  const photon::DetectionChain& chain = stats.chain;
  const double a = chain.arm_efficiency();
  const double dark = chain.dark_probability();
  const std::size_t slots = eff.eta.front().size();
  const double p_click = chain.write_click_probability(emission);
  const double any_click = 1.0 - std::pow(1.0 - p_click, static_cast<double>(slots));
  const double no_noise = std::exp(-stats.noise.read_noise_mean(any_click)) * (1.0 - dark) * (1.0 - dark);

  std::vector<double> result(slots, 0.0);
  for (std::size_t node = 0; node < eff.eta.size(); ++node) {
    std::vector<double> clicked_dark(slots, 0.0), dark_only(slots, 0.0);
    for (std::size_t s = 0; s < slots; ++s) {
      const double q = eff.eta[node][s] * a;
      for (int n = 0; n <= emission.fock_cutoff; ++n) {
        const double pn = emission.probability(n);
        const double miss = std::pow(1.0 - q, n);
        const double click = 1.0 - std::pow(1.0 - a, n) * (1.0 - dark);
        clicked_dark[s] += pn * click * miss;
        dark_only[s] += pn * miss;
      }
    }
    for (std::size_t k = 0; k < slots; ++k) {
      double no_read = clicked_dark[k] * no_noise;
      for (std::size_t s = 0; s < slots; ++s) {
        if (s != k) no_read *= dark_only[s];
      }
      result[k] += eff.weight[node] * (p_click - no_read);
    }
  }
  return result;
}

std::string describe(const config::RunConfig& cfg, const std::string& field) {
  return config::get_field(cfg, field);
}

}  // namespace

// ------------------------------------------------------------------ models

Quadrature gauss_hermite(int order) {
  require(order >= 1, "quadrature order must be >= 1");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(k / 2.0);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  Quadrature q;
  for (int i = 0; i < order; ++i) {
    q.nodes.push_back(solver.eigenvalues()[i]);
    const double v = solver.eigenvectors()(0, i);
    q.weights.push_back(std::sqrt(constants::kPi) * v * v);
  }
  return q;
}

double expected_overlap(const SequenceConfig& seq, const PhysicsSetup& phys, GradientMode mode,
                        double creation, double t_read) {
  const physics::GradientWaveform wf = phys.waveform(mode, seq.reversal_latency);
  const double slope = jitter_slope(seq, phys, mode);
  if (slope == 0.0) {
    return physics::gaussian_ensemble_overlap(phys.ensemble, phys.mode(creation), wf, phys.mixture, t_read, 0.0,
                                              phys.motion);
  }
  const Quadrature& q = hermite();
  double sum = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    const double offset = slope * std::sqrt(2.0) * phys.peak_jitter * q.nodes[i];
    sum += q.weights[i] * physics::gaussian_ensemble_overlap(phys.ensemble, phys.mode(creation), wf, phys.mixture,
                                                             t_read, offset, phys.motion);
  }
  return sum / std::sqrt(constants::kPi);
}

PeakShape rephasing_peak(const SequenceConfig& seq, const PhysicsSetup& phys) {
  const double t_r = sequencer::rephasing_time(seq, phys, 0.0);
  const physics::GradientWaveform wf = phys.waveform(GradientMode::kReversal, seq.reversal_latency);
  const double b = std::abs(phys.zeeman_coefficient * phys.ensemble.cloud_sigma.z() * wf.amplitude(t_r));
  require(b > 0.0, "rephasing peak needs a non-zero gradient");
  const double spread = std::sqrt(1.0 + 2.0 * b * b * phys.peak_jitter * phys.peak_jitter);
  const double width_guess = 2.0 * std::sqrt(std::log(2.0)) * spread / b;

  auto f = [&](double t) { return expected_overlap(seq, phys, GradientMode::kReversal, 0.0, t); };
  const auto best = boost::math::tools::brent_find_minima([&](double t) { return -f(t); }, t_r - 2.0 * width_guess,
                                                          t_r + 2.0 * width_guess, 40);
  PeakShape shape;
  shape.center = best.first;
  shape.maximum = -best.second;
  const double half = 0.5 * shape.maximum;
  auto g = [&](double t) { return f(t) - half; };
  auto side = [&](double direction) {
    double step = 0.25 * width_guess;
    double inner = shape.center, outer = shape.center + direction * step;
    for (int i = 0; i < 200 && g(outer) > 0.0; ++i) {
      inner = outer;
      outer += direction * step;
    }
    boost::uintmax_t iterations = 200;
    const double lo = std::min(inner, outer), hi = std::max(inner, outer);
    const auto r = boost::math::tools::toms748_solve(g, lo, hi, boost::math::tools::eps_tolerance<double>(50),
                                                     iterations);
    return 0.5 * (r.first + r.second);
  };
  shape.fwhm = side(1.0) - side(-1.0);
  const double standard = expected_overlap(seq, phys, GradientMode::kOff, 0.0, shape.center);
  shape.relative_efficiency = shape.maximum / standard;
  return shape;
}

double motional_decay_time(const PhysicsSetup& phys) {
  const physics::GradientWaveform off = physics::GradientWaveform::off(phys.zeeman_coefficient);
  const physics::ClassMixture single = physics::ClassMixture::single();
  auto f = [&](double t) {
    return physics::gaussian_ensemble_overlap(phys.ensemble, phys.mode(0.0), off, single, t, 0.0, phys.motion) -
           std::exp(-1.0);
  };
  return bracket_root(f, 1e-9, 1e-6, 4.0, 40, "motional decay time");
}

double expected_eta_ret(const SequenceConfig& seq, const PhysicsSetup& phys, const StatsSetup& stats,
                        GradientMode mode, double t_read) {
  const std::vector<double> offsets{0.0};
  const double p_wr = coincidence_probabilities(stats, slot_efficiencies(seq, phys, mode, offsets, t_read)).front();
  return p_wr / stats.chain.write_click_probability(stats.emission());
}

double expected_snr(const SequenceConfig& seq, const PhysicsSetup& phys, const StatsSetup& stats) {
  const PeakShape peak = rephasing_peak(seq, phys);
  const std::vector<double> offsets{0.0};
  const double signal =
      coincidence_probabilities(stats, slot_efficiencies(seq, phys, GradientMode::kReversal, offsets, peak.center))
          .front();
  const double background =
      coincidence_probabilities(stats,
                                slot_efficiencies(seq, phys, GradientMode::kReversal, offsets, peak.center, true))
          .front();
  if (!(background > 0.0)) return std::numeric_limits<double>::infinity();
  return signal / background;
}

std::vector<double> expected_selectivity(const SequenceConfig& seq, const PhysicsSetup& phys,
                                         const StatsSetup& stats, const std::vector<double>& offsets) {
  std::vector<double> s;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const double t_read = sequencer::rephasing_time(seq, phys, offsets[i]);
    const std::vector<double> p =
        coincidence_probabilities(stats, slot_efficiencies(seq, phys, GradientMode::kReversal, offsets, t_read));
    s.push_back(sequencer::selectivity(p)[i]);
  }
  return s;
}

// ----------------------------------------------------------------- targets

Targets parse_targets(const std::string& text, const std::string& source) {
  Targets t;
  struct Pending {
    std::string value;
    std::size_t line;
  };
  std::map<std::string, Pending> entries;
  for (const config::RawEntry& e : config::read_entries(text, source)) {
    if (e.section != "targets") {
      throw LocatedError(ErrorCode::kConfig, fmt::format("{}:{}: unknown section [{}]", source, e.line, e.section),
                         e.line, e.section);
    }
    if (entries.count(e.key)) {
      throw LocatedError(ErrorCode::kConfig, fmt::format("{}:{}: duplicate target {}", source, e.line, e.key),
                         e.line, e.key);
    }
    entries[e.key] = {e.value, e.line};
  }
  auto fail = [&](const std::string& key, const std::string& message) {
    const std::size_t line = entries.count(key) ? entries[key].line : 0;
    throw LocatedError(ErrorCode::kConfig, fmt::format("{}:{}: {}: {}", source, line, key, message), line, key);
  };
  std::vector<std::string> used;
  auto quantity = [&](const std::string& key, config::Dimension d) -> std::optional<double> {
    auto it = entries.find(key);
    if (it == entries.end()) return std::nullopt;
    used.push_back(key);
    try {
      return config::parse_quantity(it->second.value, d);
    } catch (const Error& e) {
      fail(key, e.what());
    }
    return std::nullopt;
  };
  auto target = [&](const std::string& key, config::Dimension d, double default_relative) -> std::optional<Target> {
    const auto value = quantity(key, d);
    if (!value) return std::nullopt;
    Target result{*value, std::abs(*value) * default_relative};
    const std::string tkey = key + "_tolerance";
    auto it = entries.find(tkey);
    if (it != entries.end()) {
      used.push_back(tkey);
      std::string v = it->second.value;
      try {
        if (!v.empty() && v.back() == '%') {
          result.tolerance = std::abs(*value) * config::parse_quantity(v, config::Dimension::kNone);
        } else {
          result.tolerance = config::parse_quantity(v, d);
        }
      } catch (const Error& e) {
        fail(tkey, e.what());
      }
      if (!(result.tolerance > 0.0)) fail(tkey, "must be > 0");
    }
    return result;
  };
  using D = config::Dimension;
  t.decay_time = target("decay_time", D::kTime, 0.01);
  t.beat_period = target("beat_period", D::kTime, 0.01);
  t.peak_time = target("peak_time", D::kTime, 0.0);
  if (t.peak_time && t.peak_time->tolerance == 0.0) t.peak_time->tolerance = 1e-9;
  t.peak_fwhm = target("peak_fwhm", D::kTime, 0.01);
  t.relative_efficiency = target("relative_efficiency", D::kNone, 0.01);
  t.snr = target("snr", D::kNone, 0.01);
  if (auto p = quantity("snr_p_w", D::kNone)) t.snr_p_w = *p;
  auto list = [&](const std::string& key) {
    std::vector<double> values;
    auto it = entries.find(key);
    if (it == entries.end()) return values;
    used.push_back(key);
    std::istringstream in(it->second.value);
    std::string item;
    std::string unit;
    const auto pct = it->second.value.find('%');
    if (pct != std::string::npos) unit = " %";
    while (std::getline(in, item, ',')) {
      if (auto p = item.find('%'); p != std::string::npos) item.erase(p);
      try {
        values.push_back(config::parse_quantity(item + unit, D::kNone));
      } catch (const Error& e) {
        fail(key, e.what());
      }
    }
    return values;
  };
  t.selectivity_p_w = list("selectivity_p_w");
  t.selectivity = list("selectivity");
  if (auto tol = quantity("selectivity_tolerance", D::kNone)) t.selectivity_tolerance = *tol;
  if (t.selectivity.size() != t.selectivity_p_w.size()) fail("selectivity", "needs one value per selectivity_p_w");
  if (!t.selectivity.empty() && !(t.selectivity_tolerance > 0.0)) fail("selectivity_tolerance", "must be > 0");
  if (entries.count("fit_multiplex_noise")) {
    used.push_back("fit_multiplex_noise");
    const std::string v = entries["fit_multiplex_noise"].value;
    if (v == "true") t.fit_multiplex_noise = true;
    else if (v == "false") t.fit_multiplex_noise = false;
    else fail("fit_multiplex_noise", "expected true or false");
  }
  for (const auto& [key, entry] : entries) {
    if (std::find(used.begin(), used.end(), key) == used.end()) fail(key, "unknown target");
  }
  return t;
}

Targets load_targets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LocatedError(ErrorCode::kConfig, fmt::format("cannot read targets file {}", path.string()), 0, "");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_targets(buffer.str(), path.string());
}

// ------------------------------------------------------------- calibration

NotConverged::NotConverged(CalibrationReport report)
    : Error(ErrorCode::kNotConverged, "calibration did not meet its tolerances\n" + report.to_text()),
      report_(std::move(report)) {}

bool Residual::ok() const { return std::isfinite(achieved) && std::abs(achieved - target) <= tolerance; }

bool CalibrationReport::ok() const {
  for (const Stage& s : stages) {
    for (const Residual& r : s.residuals) {
      if (!r.ok()) return false;
    }
  }
  return true;
}

std::string CalibrationReport::to_text() const {
  std::string out;
  int index = 1;
  for (const Stage& s : stages) {
    out += fmt::format("stage {}: {}\n", index++, s.name);
    for (const FittedParameter& p : s.parameters) out += fmt::format("  {} = {}\n", p.field, p.value);
    for (const Residual& r : s.residuals) {
      out += fmt::format("  residual {}: target {} achieved {} tolerance {} -> {}\n", r.name, r.target, r.achieved,
                         r.tolerance, r.ok() ? "ok" : "FAIL");
    }
  }
  out += fmt::format("status: {}\n", ok() ? "converged" : "not converged");
  return out;
}

CalibrationReport calibrate(const config::RunConfig& base, const Targets& targets) {
  base.validate();
  CalibrationReport report;
  config::RunConfig cfg = base;
  auto physics = [&] { return cfg.resolved_physics(); };
  auto finish = [&] {
    report.calibrated = cfg;
    if (!report.ok()) {
      throw NotConverged(report);
    }
    return report;
  };
  auto guarded = [&](Stage& stage, auto&& body) {
    try {
      body();
    } catch (const Error& e) {
      stage.residuals.push_back({fmt::format("{} ({})", stage.name, e.what()), 0.0, std::nan(""), 0.0});
    }
  };

  // stage 1: temperature and beat from the standard-DLCZ curve
  if (targets.decay_time || targets.beat_period) {
    Stage& stage = report.stages.emplace_back();
    stage.name = "decay (ensemble temperature, class beat)";
    guarded(stage, [&] {
      if (targets.decay_time) {
        const double dk = physics().mode().delta_k.norm();
        const double tau = targets.decay_time->value;
        cfg.physics.ensemble.temperature =
            physics().ensemble.mass() / (constants::kBoltzmann * (dk * tau) * (dk * tau));
        stage.parameters.push_back({"ensemble.temperature", describe(cfg, "ensemble.temperature")});
        stage.residuals.push_back({"decay_time", tau, motional_decay_time(physics()), targets.decay_time->tolerance});
      }
      if (targets.beat_period) {
        if (cfg.class_beat_frequencies.size() < 2) {
          throw Error(ErrorCode::kConfig, "a beat period target needs at least two coherence classes");
        }
        cfg.class_beat_frequencies[1] = constants::kTwoPi / targets.beat_period->value;
        stage.parameters.push_back({"classes.beat_frequencies", describe(cfg, "classes.beat_frequencies")});
        stage.residuals.push_back({"beat_period", targets.beat_period->value,
                                   constants::kTwoPi / cfg.class_beat_frequencies[1],
                                   targets.beat_period->tolerance});
      }
    });
  }

  // stage 2: coil response from the rephasing time
  if (targets.peak_time) {
    Stage& stage = report.stages.emplace_back();
    stage.name = "coil response (gradient.coil_tau)";
    guarded(stage, [&] {
      const double goal = targets.peak_time->value;
      auto f = [&](double tau) {
        config::RunConfig probe = cfg;
        probe.physics.coil_tau = tau;
        return sequencer::rephasing_time(probe.sequence, probe.resolved_physics(), 0.0) - goal;
      };
      cfg.physics.coil_tau = bracket_root(f, 1e-9, 1e-6, 4.0, 30, "coil tau");
      stage.parameters.push_back({"gradient.coil_tau", describe(cfg, "gradient.coil_tau")});
      stage.residuals.push_back({"peak_time", goal, sequencer::rephasing_time(cfg.sequence, physics(), 0.0),
                                 targets.peak_time->tolerance});
    });
  }

  // stage 3: gradient amplitude (and jitter) from the peak width and height
  if (targets.peak_fwhm) {
    Stage& stage = report.stages.emplace_back();
    stage.name = "gradient (gradient.amplitude, gradient.peak_jitter)";
    guarded(stage, [&] {
      const PhysicsSetup p0 = physics();
      const double t_r = sequencer::rephasing_time(cfg.sequence, p0, 0.0);
      const double shape = std::abs(p0.waveform(GradientMode::kReversal, cfg.sequence.reversal_latency).amplitude(t_r) /
                                    p0.gradient_amplitude);
      const double per_b = p0.zeeman_coefficient * p0.ensemble.cloud_sigma.z() * shape;  // b per unit amplitude
      const double sign = p0.gradient_amplitude < 0.0 ? -1.0 : 1.0;
      const double fwhm = targets.peak_fwhm->value;
      const double c = 2.0 * std::sqrt(std::log(2.0));
      if (targets.relative_efficiency) {
        // single-class Gaussian estimates as the starting point
        const double rel = std::clamp(targets.relative_efficiency->value, 0.05, 0.999);
        const double spread2 = 1.0 / (rel * rel);
        const double b0 = c * std::sqrt(spread2) / fwhm;
        const double j0 = std::sqrt((spread2 - 1.0) / 2.0) / b0;
        fit::ResidualFunction residuals = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
          config::RunConfig probe = cfg;
          probe.physics.gradient_amplitude = sign * b0 * std::exp(x[0]) / per_b;
          probe.physics.peak_jitter = j0 * std::exp(x[1]);
          const PeakShape s = rephasing_peak(probe.sequence, probe.resolved_physics());
          out[0] = (s.fwhm - fwhm) / fwhm;
          out[1] = s.relative_efficiency - targets.relative_efficiency->value;
        };
        const fit::LeastSquaresResult r = fit::least_squares(residuals, Eigen::VectorXd::Zero(2), 2);
        cfg.physics.gradient_amplitude = sign * b0 * std::exp(r.parameters[0]) / per_b;
        cfg.physics.peak_jitter = j0 * std::exp(r.parameters[1]);
      } else {
        // jitter kept as configured; the bracket absorbs its widening
        const double b0 = c / fwhm;
        auto f = [&](double scale) {
          config::RunConfig probe = cfg;
          probe.physics.gradient_amplitude = sign * b0 * scale / per_b;
          return rephasing_peak(probe.sequence, probe.resolved_physics()).fwhm - fwhm;
        };
        const double scale = bracket_root(f, 0.05, 0.5, 2.0, 30, "gradient amplitude");
        cfg.physics.gradient_amplitude = sign * b0 * scale / per_b;
      }
      const PeakShape s = rephasing_peak(cfg.sequence, physics());
      stage.parameters.push_back({"gradient.amplitude", describe(cfg, "gradient.amplitude")});
      stage.parameters.push_back({"gradient.peak_jitter", describe(cfg, "gradient.peak_jitter")});
      stage.residuals.push_back({"peak_fwhm", fwhm, s.fwhm, targets.peak_fwhm->tolerance});
      if (targets.relative_efficiency) {
        stage.residuals.push_back({"relative_efficiency", targets.relative_efficiency->value, s.relative_efficiency,
                                   targets.relative_efficiency->tolerance});
      }
    });
  }

  // stage 4: read noise from the SNR
  if (targets.snr) {
    Stage& stage = report.stages.emplace_back();
    stage.name = "noise (noise.kappa)";
    guarded(stage, [&] {
      auto snr_for = [&](double kappa) {
        StatsSetup s = cfg.stats;
        s.p_w = targets.snr_p_w;
        s.noise.kappa = kappa;
        return expected_snr(cfg.sequence, physics(), s);
      };
      const double goal = targets.snr->value;
      auto f = [&](double log_kappa) { return std::log(snr_for(std::exp(log_kappa))) - std::log(goal); };
      if (f(std::log(1e-9)) < 0.0) {
        throw Error(ErrorCode::kNotConverged, "SNR target exceeds the noise-free SNR");
      }
      boost::uintmax_t iterations = 200;
      const auto r = boost::math::tools::toms748_solve(f, std::log(1e-9), std::log(1e9),
                                                       boost::math::tools::eps_tolerance<double>(50), iterations);
      cfg.stats.noise.kappa = std::exp(0.5 * (r.first + r.second));
      stage.parameters.push_back({"noise.kappa", describe(cfg, "noise.kappa")});
      stage.residuals.push_back({"snr", goal, snr_for(cfg.stats.noise.kappa), targets.snr->tolerance});
    });
  }

  // stage 5: selectivity, optionally with a separate multiplex noise scale
  if (!targets.selectivity.empty()) {
    Stage& stage = report.stages.emplace_back();
    stage.name = targets.fit_multiplex_noise ? "multiplex noise (multiplex.noise_scale)" : "selectivity check";
    guarded(stage, [&] {
      auto mean_selectivity = [&](double p_w, double scale) {
        StatsSetup s = cfg.stats;
        s.p_w = p_w;
        s.noise.kappa *= scale;
        const std::vector<double> sel = expected_selectivity(cfg.sequence, physics(), s, cfg.multiplex.write_offsets);
        double sum = 0.0;
        for (double v : sel) sum += v;
        return sum / static_cast<double>(sel.size());
      };
      if (targets.fit_multiplex_noise) {
        auto cost = [&](double log_scale) {
          double sum = 0.0;
          for (std::size_t i = 0; i < targets.selectivity.size(); ++i) {
            const double d = mean_selectivity(targets.selectivity_p_w[i], std::exp(log_scale)) - targets.selectivity[i];
            sum += d * d;
          }
          return sum;
        };
        const auto best = boost::math::tools::brent_find_minima(cost, std::log(1e-3), std::log(1e3), 50);
        cfg.multiplex_noise_scale = std::exp(best.first);
        stage.parameters.push_back({"multiplex.noise_scale", describe(cfg, "multiplex.noise_scale")});
      }
      for (std::size_t i = 0; i < targets.selectivity.size(); ++i) {
        stage.residuals.push_back({fmt::format("selectivity(p_w={})", targets.selectivity_p_w[i]),
                                   targets.selectivity[i],
                                   mean_selectivity(targets.selectivity_p_w[i], cfg.multiplex_noise_scale),
                                   targets.selectivity_tolerance});
      }
    });
  }
  return finish();
}

}  // namespace dlcz::calibrate
