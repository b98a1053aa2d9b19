#include "dlcz/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/core.h>
#include <fstream>
#include <limits>
#include <numeric>

#include "dlcz/error.hpp"
#include "dlcz/fit.hpp"

namespace dlcz::scenario {

namespace {

namespace fs = std::filesystem;
using config::RunConfig;
using config::Scenario;

const double kNaN = std::numeric_limits<double>::quiet_NaN();

class Writer {
 public:
  Writer(fs::path root, ScenarioResult& result) : root_(std::move(root)), result_(result) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw Error(ErrorCode::kIo, fmt::format("cannot create {}: {}", root_.string(), ec.message()));
  }

  template <typename F>
  void file(const fs::path& name, F&& body) {
    const fs::path path = root_ / name;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", path.string()));
    body(out);
    if (!out) throw Error(ErrorCode::kIo, fmt::format("write failed: {}", path.string()));
    result_.files.push_back(name);
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  ScenarioResult& result_;
};

void write_stats(Writer& w, const fs::path& name, const sequencer::CurveRun& run) {
  w.file(name, [&](std::ostream& out) {
    out << "readout_time_s," << photon::CoincidenceStats::csv_header() << "\n";
    for (const sequencer::ScanPoint& p : run.points) {
      out << fmt::format("{},", p.readout_time) << p.stats.to_csv_row() << "\n";
    }
  });
}

void write_curves(Writer& w, const std::string& suffix, const sequencer::CurveRun& run) {
  const std::vector<CurvePoint> eta = run.eta();
  const std::vector<CurvePoint> pwr = run.coincidence();
  w.file("eta_vs_time" + suffix + ".csv", [&](std::ostream& out) { analysis::export_csv(eta, out, "eta_ret"); });
  w.file("coincidence_vs_time" + suffix + ".csv",
         [&](std::ostream& out) { analysis::export_csv(pwr, out, "p_wr"); });
  write_stats(w, "stats" + suffix + ".csv", run);
}

void export_timetags(Writer& w, const RunConfig& cfg, const std::string& stem, const sequencer::ScanPoint& point) {
  analysis::TimetagStream stream;
  stream.records = point.records;
  const bool binary = cfg.timetag_format == analysis::TimetagFormat::kBinary;
  const fs::path name = fs::path("timetags") / (stem + (binary ? ".bin" : ".csv"));
  w.file(name, [&](std::ostream& out) {
    if (binary) {
      analysis::write_timetags_binary(stream, out);
    } else {
      analysis::export_csv(stream, out);
    }
  });
}

std::vector<CurvePoint> in_window(const std::vector<CurvePoint>& curve, photon::TimeWindow window) {
  std::vector<CurvePoint> out;
  for (const CurvePoint& p : curve) {
    if (window.contains(p.time)) out.push_back(p);
  }
  return out;
}

void standard(const RunConfig& cfg, Writer& w, ScenarioResult& result) {
  const sequencer::PhysicsSetup phys = cfg.resolved_physics();
  sequencer::RunControl control = cfg.control();
  control.record_clicks = cfg.export_timetags;
  const sequencer::CurveRun run =
      sequencer::run_standard_dlcz(cfg.sequence, phys, cfg.stats, cfg.readout_times, control);
  write_curves(w, "", run);
  if (cfg.export_timetags) {
    for (std::size_t i = 0; i < run.points.size(); ++i) export_timetags(w, cfg, fmt::format("point_{:03d}", i), run.points[i]);
  }

  const photon::CoincidenceStats total = run.total();
  result.metrics.push_back({"p_w", total.p_w().value, total.p_w().standard_error});
  // decay fit: guess from the velocity spread, beat from the strongest class beat,
  // and a free floor for read noise and dark counts
  const double dk = phys.mode().delta_k.norm();
  const double sigma_v = phys.ensemble.velocity_sigma();
  const double tau_guess = sigma_v > 0.0 ? 1.0 / (dk * sigma_v) : 1e-3;
  double beat_guess = 0.0;
  for (double b : cfg.class_beat_frequencies) beat_guess = std::max(beat_guess, std::abs(b));
  Metric decay{"decay_time", kNaN, kNaN}, beat{"beat_period", kNaN, kNaN};
  if (run.points.size() >= (beat_guess > 0.0 ? 7u : 4u)) {
    try {
      // an empty point still bounds the curve: one count out of n_w
      std::vector<CurvePoint> eta = run.eta();
      for (std::size_t i = 0; i < eta.size(); ++i) {
        const std::uint64_t n_w = run.points[i].stats.n_w;
        if (eta[i].standard_error == 0.0 && n_w > 0) eta[i].standard_error = 1.0 / static_cast<double>(n_w);
      }
      const fit::DecayFit f = fit::fit_decay(eta, tau_guess, beat_guess, true);
      decay = {"decay_time", f.tau.value, f.tau.standard_error};
      if (beat_guess > 0.0 && f.beat_frequency.value > 0.0) {
        const double period = constants::kTwoPi / f.beat_frequency.value;
        beat = {"beat_period", period, period * f.beat_frequency.standard_error / f.beat_frequency.value};
      }
    } catch (const Error&) {
      // leave the fit metrics undefined
    }
  }
  result.metrics.push_back(decay);
  if (beat_guess > 0.0) result.metrics.push_back(beat);
}

void rephase(const RunConfig& cfg, Writer& w, ScenarioResult& result) {
  const sequencer::PhysicsSetup phys = cfg.resolved_physics();
  sequencer::RunControl control = cfg.control();
  control.record_clicks = cfg.export_timetags;
  const sequencer::CurveRun run = sequencer::run_rephasing(cfg.sequence, phys, cfg.stats, cfg.readout_times, control);
  write_curves(w, "", run);
  if (cfg.export_timetags) {
    for (std::size_t i = 0; i < run.points.size(); ++i) export_timetags(w, cfg, fmt::format("point_{:03d}", i), run.points[i]);
  }

  const photon::CoincidenceStats total = run.total();
  result.metrics.push_back({"p_w", total.p_w().value, total.p_w().standard_error});
  result.metrics.push_back({"predicted_peak_time", sequencer::rephasing_time(cfg.sequence, phys, 0.0), kNaN});

  const std::vector<CurvePoint> eta = run.eta();
  const std::vector<CurvePoint> background = in_window(eta, cfg.snr_background);
  const std::vector<CurvePoint> peak = in_window(eta, cfg.snr_peak);
  Metric time{"peak_time", kNaN, kNaN}, fwhm{"peak_fwhm", kNaN, kNaN}, snr{"snr", kNaN, kNaN};
  if (!background.empty() && peak.size() >= 4) {
    double mean = 0.0;
    for (const CurvePoint& p : background) mean += p.value;
    mean /= static_cast<double>(background.size());
    try {
      const fit::GaussianPeak g = fit::fit_gaussian_peak(peak, mean);
      time.value = g.center;
      fwhm.value = g.fwhm();
    } catch (const Error&) {
    }
  }
  if (!background.empty() && !peak.empty()) {
    try {
      snr.value = photon::snr_at_rephasing(eta, cfg.snr_background, cfg.snr_peak, cfg.snr_model);
      // delta method: the highest peak point against the background mean
      double mean = 0.0, var = 0.0;
      for (const CurvePoint& p : background) {
        mean += p.value;
        var += p.standard_error * p.standard_error;
      }
      mean /= static_cast<double>(background.size());
      var /= static_cast<double>(background.size() * background.size());
      const CurvePoint top = *std::max_element(peak.begin(), peak.end(),
                                               [](const CurvePoint& a, const CurvePoint& b) { return a.value < b.value; });
      if (top.value > 0.0) {
        snr.standard_error = snr.value * std::sqrt(std::pow(top.standard_error / top.value, 2) + var / (mean * mean));
      }
    } catch (const Error&) {
    }
  }
  result.metrics.push_back(time);
  result.metrics.push_back(fwhm);
  result.metrics.push_back(snr);
}

void multiplex(const RunConfig& cfg, Writer& w, ScenarioResult& result) {
  const sequencer::PhysicsSetup phys = cfg.resolved_physics();
  sequencer::StatsSetup stats = cfg.stats;
  stats.noise.kappa *= cfg.multiplex_noise_scale;
  sequencer::MultiplexPlan plan = cfg.multiplex;
  plan.readout_scan = cfg.readout_times;
  const sequencer::MultiplexResult mux = sequencer::run_multiplex(cfg.sequence, plan, phys, stats, cfg.control());

  for (std::size_t k = 0; k < mux.per_write.size(); ++k) write_curves(w, fmt::format("_write{}", k + 1), mux.per_write[k]);
  write_curves(w, "_combined", mux.combined);
  w.file("selectivity.csv", [&](std::ostream& out) {
    out << "peak,readout_time_s,selectivity,selectivity_err";
    for (std::size_t k = 0; k < mux.peaks.size(); ++k) out << fmt::format(",p_c{0},p_c{0}_err", k + 1);
    out << "\n";
    for (std::size_t i = 0; i < mux.peaks.size(); ++i) {
      const sequencer::PeakSelectivity& p = mux.peaks[i];
      out << fmt::format("{},{},{},{}", i + 1, p.readout_time, p.selectivity.value, p.selectivity.standard_error);
      for (const Estimate& c : p.coincidence) out << fmt::format(",{},{}", c.value, c.standard_error);
      out << "\n";
    }
  });
  for (std::size_t i = 0; i < mux.peaks.size(); ++i) {
    w.file(fmt::format("histogram_peak{}.csv", i + 1),
           [&](std::ostream& out) { analysis::export_csv(mux.peaks[i].histogram, out); });
  }

  for (std::size_t i = 0; i < mux.peak_times.size(); ++i) {
    result.metrics.push_back({fmt::format("peak_time_{}", i + 1), mux.peak_times[i], kNaN});
  }
  for (std::size_t i = 0; i < mux.peaks.size(); ++i) {
    result.metrics.push_back({fmt::format("selectivity_{}", i + 1), mux.peaks[i].selectivity.value,
                              mux.peaks[i].selectivity.standard_error});
  }
  result.metrics.push_back({"mean_selectivity", mux.mean_selectivity.value, mux.mean_selectivity.standard_error});
  result.metrics.push_back({"background_ratio", mux.background_ratio.value, mux.background_ratio.standard_error});

  if (cfg.export_timetags) {
    // the recorded peak runs are not kept by run_multiplex; repeat them with recording on
    sequencer::RunControl control = cfg.control();
    control.record_clicks = true;
    const sequencer::CurveRun at_peaks = sequencer::run_scan(cfg.sequence, phys, stats,
                                                             sequencer::GradientMode::kReversal,
                                                             plan.write_offsets, mux.peak_times, control);
    for (std::size_t i = 0; i < at_peaks.points.size(); ++i) {
      export_timetags(w, cfg, fmt::format("peak{}", i + 1), at_peaks.points[i]);
    }
  }
}

void alpha_scan(const RunConfig& cfg, Writer& w, ScenarioResult& result) {
  const sequencer::PhysicsSetup phys = cfg.resolved_physics();
  sequencer::RunControl control = cfg.control();
  control.target_heralds = cfg.alpha_heralds;
  control.record_clicks = cfg.export_timetags;
  const double readout[] = {cfg.sequence.readout_delay};
  const double offsets[] = {0.0};

  std::vector<photon::AlphaPoint> points;
  std::vector<photon::CoincidenceStats> all;
  std::vector<double> excitation;
  for (std::size_t i = 0; i < cfg.alpha_p_w.size(); ++i) {
    sequencer::StatsSetup stats = cfg.stats;
    stats.p_w = cfg.alpha_p_w[i];
    const sequencer::CurveRun run = sequencer::run_scan(cfg.sequence, phys, stats, sequencer::GradientMode::kReversal,
                                                        offsets, readout, control);
    const photon::CoincidenceStats s = run.total();
    all.push_back(s);
    excitation.push_back(stats.emission().p);
    if (s.n_wr1 > 0 && s.n_wr2 > 0) points.push_back({excitation.back(), photon::antibunching_alpha(s)});
    if (cfg.export_timetags) export_timetags(w, cfg, fmt::format("p_w_{:03d}", i), run.points.front());
  }

  std::optional<photon::AlphaFit> fitted;
  if (points.size() >= 2) {
    try {
      fitted = photon::fit_alpha_c(points);
    } catch (const Error&) {
    }
  }
  w.file("alpha_vs_pw.csv", [&](std::ostream& out) {
    out << "p_w,p,trials,n_w,n_wr1,n_wr2,n_wr1r2,alpha,alpha_err,g2_wr,g2_wr_err,alpha_model\n";
    for (std::size_t i = 0; i < all.size(); ++i) {
      const photon::CoincidenceStats& s = all[i];
      Estimate alpha{kNaN, kNaN}, g2{kNaN, kNaN};
      if (s.n_wr1 > 0 && s.n_wr2 > 0) alpha = photon::antibunching_alpha(s);
      if (s.n_w > 0 && s.n_r > 0) g2 = photon::g2_cross(s);
      const double model = fitted ? photon::alpha_model_curve(excitation[i], fitted->c.value) : kNaN;
      out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", cfg.alpha_p_w[i], excitation[i], s.trials, s.n_w,
                         s.n_wr1, s.n_wr2, s.n_wr1r2, alpha.value, alpha.standard_error, g2.value, g2.standard_error,
                         model);
    }
  });
  w.file("stats.csv", [&](std::ostream& out) {
    out << "p_w," << photon::CoincidenceStats::csv_header() << "\n";
    for (std::size_t i = 0; i < all.size(); ++i) out << fmt::format("{},", cfg.alpha_p_w[i]) << all[i].to_csv_row() << "\n";
  });

  for (std::size_t i = 0; i < all.size(); ++i) {
    Estimate alpha{kNaN, kNaN};
    if (all[i].n_wr1 > 0 && all[i].n_wr2 > 0) alpha = photon::antibunching_alpha(all[i]);
    result.metrics.push_back({fmt::format("alpha_{}", i + 1), alpha.value, alpha.standard_error});
  }
  if (fitted) {
    result.metrics.push_back({"c", fitted->c.value, fitted->c.standard_error});
    result.metrics.push_back({"c_chi2", fitted->chi2, kNaN});
  } else {
    result.metrics.push_back({"c", kNaN, kNaN});
  }
}

std::string metric_text(double v) { return std::isnan(v) ? std::string("undefined") : fmt::format("{}", v); }

}  // namespace

std::optional<Metric> ScenarioResult::find(const std::string& name) const {
  for (const Metric& m : metrics) {
    if (m.name == name) return m;
  }
  return std::nullopt;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config::to_text(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string manifest_text(const RunConfig& cfg) {
  return fmt::format(
      "# dlczsim manifest\n# version = {}\n# config_hash = fnv1a64:{:016x}\n# seed = {}\n"
      "# re-run: dlczsim run <this file> --out <dir>\n",
      kVersion, config_hash(cfg), cfg.seed) +
         config::to_text(cfg);
}

ScenarioResult run_scenario(const RunConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  ScenarioResult result;
  Writer w(out_dir, result);
  switch (cfg.scenario) {
    case Scenario::kStandard: standard(cfg, w, result); break;
    case Scenario::kRephase: rephase(cfg, w, result); break;
    case Scenario::kMultiplex: multiplex(cfg, w, result); break;
    case Scenario::kAlphaScan: alpha_scan(cfg, w, result); break;
  }
  w.file("metrics.txt", [&](std::ostream& out) {
    out << "scenario = " << config::scenario_name(cfg.scenario) << "\n";
    for (const Metric& m : result.metrics) {
      out << fmt::format("{} = {}", m.name, metric_text(m.value));
      if (!std::isnan(m.standard_error)) out << fmt::format(" +- {}", m.standard_error);
      out << "\n";
    }
  });
  w.file("manifest.txt", [&](std::ostream& out) { out << manifest_text(cfg); });
  return result;
}

SweepResult run_sweep(const RunConfig& base, const std::string& axis, const std::vector<std::string>& values,
                      const fs::path& out_dir) {
  if (!config::is_numeric_field(axis)) {
    throw LocatedError(ErrorCode::kConfig, fmt::format("{}: not a numeric config field", axis), 0, axis);
  }
  if (values.empty()) throw LocatedError(ErrorCode::kConfig, "sweep needs at least one value", 0, axis);
  SweepResult sweep;
  for (std::size_t i = 0; i < values.size(); ++i) {
    RunConfig cfg = base;
    config::set_field(cfg, axis, values[i]);
    sweep.values.push_back(config::get_field(cfg, axis));
    sweep.runs.push_back(run_scenario(cfg, out_dir / fmt::format("sweep_{:03d}", i)));
  }
  std::ofstream out(out_dir / "summary.csv", std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", (out_dir / "summary.csv").string()));
  // numeric column: the canonical text without its unit
  auto number = [](const std::string& text) { return text.substr(0, text.find(' ')); };
  out << "index," << axis;
  for (const Metric& m : sweep.runs.front().metrics) out << "," << m.name << "," << m.name << "_err";
  out << "\n";
  for (std::size_t i = 0; i < sweep.runs.size(); ++i) {
    out << fmt::format("{},{}", i, number(sweep.values[i]));
    for (const Metric& m : sweep.runs.front().metrics) {
      const std::optional<Metric> v = sweep.runs[i].find(m.name);
      out << "," << (v ? metric_text(v->value) : "undefined") << "," << (v ? metric_text(v->standard_error) : "undefined");
    }
    out << "\n";
  }
  return sweep;
}

}  // namespace dlcz::scenario
