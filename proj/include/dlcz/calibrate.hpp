#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dlcz/config.hpp"
#include "dlcz/error.hpp"

namespace dlcz::calibrate {

struct Target {
  double value = 0.0;
  double tolerance = 0.0;  // absolute, in the unit of `value`
};

/// Observables the staged calibration can be pointed at. Absent targets
/// leave the corresponding parameters untouched.
struct Targets {
  std::optional<Target> decay_time;           // s, standard DLCZ 1/e time
  std::optional<Target> beat_period;          // s
  std::optional<Target> peak_time;            // s, from the write pulse
  std::optional<Target> peak_fwhm;            // s
  std::optional<Target> relative_efficiency;  // rephased / standard at the same time
  std::optional<Target> snr;
  double snr_p_w = 0.01;
  /// Mean selectivity targets, one per write-click probability.
  std::vector<double> selectivity_p_w;
  std::vector<double> selectivity;
  double selectivity_tolerance = 0.0;
  /// Also fit multiplex.noise_scale to the selectivity targets.
  bool fit_multiplex_noise = false;
};

/// Targets file: a [targets] section, e.g. `peak_time = 20.84 us` with
/// `peak_time_tolerance = 1 ns`; relative tolerances may be given in %.
Targets parse_targets(const std::string& text, const std::string& source_name = "<targets>");
Targets load_targets(const std::filesystem::path& path);

struct Residual {
  std::string name;
  double target = 0.0;
  double achieved = 0.0;
  double tolerance = 0.0;

  bool ok() const;
};

struct FittedParameter {
  std::string field;  // config path
  std::string value;  // canonical config text
};

struct Stage {
  std::string name;
  std::vector<FittedParameter> parameters;
  std::vector<Residual> residuals;
};

struct CalibrationReport {
  std::vector<Stage> stages;
  config::RunConfig calibrated;

  bool ok() const;
  std::string to_text() const;
};

/// Error(kNotConverged) that keeps the best-so-far report.
class NotConverged : public Error {
 public:
  explicit NotConverged(CalibrationReport report);
  const CalibrationReport& report() const noexcept { return report_; }

 private:
  CalibrationReport report_;
};

/// Staged fit: (1) temperature and beat from the standard-DLCZ decay, (2) coil
/// tau from the peak time, (3) gradient amplitude and peak jitter from the
/// peak width and relative efficiency, (4) kappa from the SNR, (5) optional
/// multiplex noise scale from the selectivity targets. Throws NotConverged
/// if any residual exceeds its tolerance.
CalibrationReport calibrate(const config::RunConfig& base, const Targets& targets);

// ---------------------------------------------------------- analytic models

/// Gauss-Hermite nodes/weights for integrals against exp(-x^2) (Golub-Welsch).
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};
Quadrature gauss_hermite(int order);

/// Infinite-ensemble overlap of a spin-wave written at `creation` and read at
/// `t_read`, averaged over the per-ensemble peak jitter.
double expected_overlap(const sequencer::SequenceConfig& sequence, const sequencer::PhysicsSetup& physics,
                        sequencer::GradientMode mode, double creation, double t_read);

struct PeakShape {
  double center = 0.0;
  double fwhm = 0.0;
  double maximum = 0.0;  // overlap
  double relative_efficiency = 0.0;
};

/// Shape of the jitter-averaged rephasing peak of a spin-wave written at 0.
PeakShape rephasing_peak(const sequencer::SequenceConfig& sequence, const sequencer::PhysicsSetup& physics);

/// Standard-DLCZ 1/e time of the single-class motional envelope.
double motional_decay_time(const sequencer::PhysicsSetup& physics);

/// Expected eta_ret = p_wr / p_w at a readout time, including noise.
double expected_eta_ret(const sequencer::SequenceConfig& sequence, const sequencer::PhysicsSetup& physics,
                        const sequencer::StatsSetup& stats, sequencer::GradientMode mode, double t_read);

/// Expected SNR of the rephasing curve: peak eta_ret over the eta_ret of a
/// fully dephased spin-wave.
double expected_snr(const sequencer::SequenceConfig& sequence, const sequencer::PhysicsSetup& physics,
                    const sequencer::StatsSetup& stats);

/// Expected S(i) for every write of `offsets`, each read at its own peak.
std::vector<double> expected_selectivity(const sequencer::SequenceConfig& sequence,
                                         const sequencer::PhysicsSetup& physics,
                                         const sequencer::StatsSetup& stats,
                                         const std::vector<double>& offsets);

}  // namespace dlcz::calibrate
