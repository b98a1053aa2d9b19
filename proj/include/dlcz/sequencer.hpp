#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "dlcz/analysis_io.hpp"
#include "dlcz/photon_stats.hpp"
#include "dlcz/physics.hpp"
#include "dlcz/types.hpp"

namespace dlcz::sequencer {

/// Timing of one ensemble cycle: MOT load, molasses, optical pumping, then a
/// train of write trials. All times in seconds.
struct SequenceConfig {
  double mot_load = 15e-3;
  double molasses = 1.6e-3;
  double pumping = 10e-6;
  double interrogation_max = 660e-6;
  int max_trials = 200;
  double trial_period = 3.3e-6;
  double reversal_latency = 3e-6;  // write pulse -> reversal instruction
  double readout_delay = 20.84e-6;
  double repetition_rate = 59.0;   // Hz
  /// Probability that a stored excitation survives one cleaning stage.
  double residual_excitation = 0.0;

  void validate() const;
  double cycle_period() const { return 1.0 / repetition_rate; }
  /// MOT loading actually available once the other stages fit in one cycle.
  double effective_mot_load() const;
  /// Start of the first write trial, measured from the start of the cycle.
  double interrogation_start() const;
  /// Trials that still leave room for a read at `readout_time` inside the
  /// interrogation window.
  int trials_per_ensemble(double readout_time) const;
};

struct MultiplexPlan {
  std::vector<double> write_offsets{0.0, 600e-9};
  std::vector<double> readout_scan;
  /// Flat region (readout times) used for the background ratio.
  photon::TimeWindow background{5e-6, 15e-6};

  void validate() const;
};

enum class GradientMode {
  kOff,       // standard DLCZ: no gradient during interrogation
  kStatic,    // gradient on, never reversed
  kReversal,  // reversed reversal_latency after the write pulse
};

/// Physical parameters behind one run.
struct PhysicsSetup {
  physics::EnsembleModel ensemble;
  double wavelength = constants::kRbD2Wavelength;
  double crossing_angle = constants::kDefaultCrossingAngle;
  double misalignment = 0.0;
  physics::ClassMixture mixture;
  physics::MotionModel motion = physics::MotionModel::kFrozenPosition;
  double gradient_amplitude = 0.17;  // T/m before the reversal
  double coil_tau = 8.44e-6;
  double zeeman_coefficient = constants::kDefaultZeemanCoefficient;
  double reversed_ratio = -1.0;
  double eta0 = 0.3;
  double motional_lifetime = std::numeric_limits<double>::infinity();
  /// Per-ensemble Gaussian spread of the rephasing time, applied as a
  /// gradient-area offset |G(t_r)| * dt.
  double peak_jitter = 0.0;

  void validate() const;
  physics::SpinWaveMode mode(double creation_time = 0.0) const;
  /// Waveform in the frame of a trial whose first write pulse is at t = 0.
  physics::GradientWaveform waveform(GradientMode mode, double reversal_latency) const;
};

struct StatsSetup {
  double p_w = 0.01;  // write-click probability per write pulse
  int fock_cutoff = 6;
  photon::DetectionChain chain;
  photon::NoiseModel noise;

  void validate() const;
  photon::EmissionModel emission() const;
};

struct RunControl {
  std::uint64_t seed = 1;
  std::uint64_t target_heralds = 10000;
  std::uint64_t max_ensembles = 100'000'000;
  unsigned threads = 1;
  std::size_t batch = 512;     // ensembles per scheduling batch
  bool record_clicks = false;  // fill ScanPoint::records
  bool record_trace = false;   // fill ScanPoint::trace (tests only; large)
};

enum class TrialAction { kCleaning, kGradientReversal, kReadPulse };

struct GradientEvent {
  double time = 0.0;
  TrialAction action = TrialAction::kCleaning;
};

struct Click {
  double time = 0.0;
  int detector = 0;  // write slot, or read detector 1/2
};

/// Times are measured from the start of the ensemble's cycle.
struct TrialRecord {
  std::uint64_t ensemble_id = 0;
  std::uint32_t trial_index = 0;
  std::vector<double> write_times;
  std::vector<Click> write_clicks;
  std::vector<Click> read_clicks;
  std::vector<GradientEvent> gradient_events;
};

struct ScanPoint {
  double readout_time = 0.0;  // from the first write pulse of a trial
  photon::CoincidenceStats stats;
  std::uint64_t ensembles = 0;
  std::vector<analysis::DetectionRecord> records;
  std::vector<TrialRecord> trace;
};

struct CurveRun {
  std::vector<ScanPoint> points;

  /// eta_ret = n_wr / n_w per readout time.
  std::vector<CurvePoint> eta() const;
  /// Coincidence probability per trial p_wr.
  std::vector<CurvePoint> coincidence() const;
  photon::CoincidenceStats total() const;
};

/// Simulates ensembles until `target_heralds` write clicks are collected at
/// every readout time. Ensembles are processed in fixed batches and merged in
/// index order, so the result does not depend on `threads`.
CurveRun run_scan(const SequenceConfig& config, const PhysicsSetup& physics,
                  const StatsSetup& stats, GradientMode mode,
                  std::span<const double> write_offsets,
                  std::span<const double> readout_times, const RunControl& control);

CurveRun run_standard_dlcz(const SequenceConfig& config, const PhysicsSetup& physics,
                           const StatsSetup& stats, std::span<const double> storage_times,
                           const RunControl& control);

CurveRun run_rephasing(const SequenceConfig& config, const PhysicsSetup& physics,
                       const StatsSetup& stats, std::span<const double> readout_scan,
                       const RunControl& control);

struct PeakSelectivity {
  double readout_time = 0.0;         // rephasing time of this write's spin-wave
  analysis::Histogram histogram;     // start-stop delays, one bin per write
  std::vector<Estimate> coincidence; // p_C,k per bin, per trial
  Estimate selectivity;              // S(i) of the rephasing write
};

struct MultiplexResult {
  std::vector<double> peak_times;  // per write, from the first write pulse
  std::vector<CurveRun> per_write;
  CurveRun combined;
  std::vector<PeakSelectivity> peaks;
  Estimate mean_selectivity;
  /// Combined over single-write coincidence background in the flat region.
  Estimate background_ratio;
};

MultiplexResult run_multiplex(const SequenceConfig& config, const MultiplexPlan& plan,
                              const PhysicsSetup& physics, const StatsSetup& stats,
                              const RunControl& control);

/// S(i) = p_i / sum_k p_k.
std::vector<double> selectivity(std::span<const double> peak_probabilities);

/// Free-running trials without heralding logic: every trial is read out
/// with retrieval efficiency `eta`. Used for g2 and source checks.
photon::CoincidenceStats run_free_trials(const StatsSetup& stats, double eta, std::uint64_t trials,
                                         std::uint64_t seed, unsigned threads = 1);

/// Rephasing time of a spin-wave written at `creation_time` in the trial frame.
double rephasing_time(const SequenceConfig& config, const PhysicsSetup& physics,
                      double creation_time = 0.0);

}  // namespace dlcz::sequencer
