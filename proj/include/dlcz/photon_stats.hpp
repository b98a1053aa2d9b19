#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dlcz/constants.hpp"
#include "dlcz/rng.hpp"
#include "dlcz/types.hpp"

namespace dlcz::photon {

/// Write photon / spin-wave pairs from a two-mode squeezed source,
/// truncated at `fock_cutoff` and renormalised.
struct EmissionModel {
  double p = 0.0;  // spin-wave creation probability per trial in the detected mode
  int fock_cutoff = 6;

  void validate() const;
  /// Probability mass beyond the cutoff, p^(cutoff + 1).
  double norm_deficit() const;
  /// P(n pairs) of the truncated, renormalised state.
  double probability(int n) const;
};

struct PairNumbers {
  int write = 0;
  int spinwave = 0;
};

/// Draws (n, n) with probability (1 - p) p^n.
PairNumbers sample_pair_numbers(const EmissionModel& model, CounterRng& rng);

struct DetectionChain {
  double filter_transmission = constants::kDefaultFilterTransmission;
  double spd_efficiency = constants::kDefaultSpdEfficiency;
  double read_splitter_ratio = 0.5;      // fraction routed to read detector 1
  double dark_rate = 0.0;                // counts/s per detector
  double coincidence_window = 200e-9;    // s, detector gate

  void validate() const;
  double arm_efficiency() const { return filter_transmission * spd_efficiency; }
  /// Dark click probability of one detector within one gate.
  double dark_probability() const;
  /// Exact write-click probability for a threshold detector.
  double write_click_probability(const EmissionModel& emission) const;
};

/// Excitation probability that yields write-click probability `p_w`.
EmissionModel emission_for_write_probability(double p_w, const DetectionChain& chain,
                                             int fock_cutoff = 6);

/// Uncorrelated read-arm background: mean noise photon number at the read
/// detectors is kappa / cavity_suppression * p_w + floor.
struct NoiseModel {
  double kappa = 0.0;
  double floor = 0.0;
  double cavity_suppression = 1.0;

  void validate() const;
  double read_noise_mean(double write_click_probability) const;
};

struct TrialOutcome {
  bool write = false;
  bool read1 = false;
  bool read2 = false;

  bool read() const { return read1 || read2; }
};

/// `excitations` stored spin-wave quanta, each retrieved with probability `eta`.
struct SpinWaveReadout {
  int excitations = 0;
  double eta = 0.0;
};

struct ReadClicks {
  bool read1 = false;
  bool read2 = false;
};

/// Binomial thinning: number of survivors out of n at the given efficiency.
int thin(int n, double efficiency, CounterRng& rng);

bool detect_write(int photons, const DetectionChain& chain, CounterRng& rng);

ReadClicks detect_read(std::span<const SpinWaveReadout> spinwaves, const DetectionChain& chain,
                       double noise_mean, CounterRng& rng);

/// One full trial: write arm, retrieval at `eta_ret_at_readout`, read arm
/// with a 50/50 (configurable) splitter and uncorrelated noise.
TrialOutcome detect_trial(PairNumbers numbers, const DetectionChain& chain,
                          double eta_ret_at_readout, double noise_mean, CounterRng& rng);

/// Aggregated click counts. Merging is associative and commutative.
struct CoincidenceStats {
  std::uint64_t trials = 0;
  std::uint64_t n_w = 0;
  std::uint64_t n_r = 0;
  std::uint64_t n_r1 = 0;
  std::uint64_t n_r2 = 0;
  std::uint64_t n_wr = 0;
  std::uint64_t n_wr1 = 0;
  std::uint64_t n_wr2 = 0;
  std::uint64_t n_wr1r2 = 0;

  void add(const TrialOutcome& outcome);
  CoincidenceStats& merge(const CoincidenceStats& other);
  void validate() const;

  Estimate p_w() const;
  Estimate p_r() const;
  Estimate p_wr() const;
  /// n_wr / n_w; empty when there was no write click.
  std::optional<Estimate> eta_ret() const;
  std::optional<Estimate> alpha() const;
  std::optional<Estimate> g2_wr() const;

  /// `key = value` lines; undefined quantities are written as `undefined`.
  std::string to_key_value() const;
  static std::string csv_header();
  std::string to_csv_row() const;
  /// Parses the count columns of a row written by to_csv_row.
  static CoincidenceStats from_csv_row(const std::string& row);

  friend bool operator==(const CoincidenceStats&, const CoincidenceStats&) = default;
};

CoincidenceStats accumulate(std::span<const TrialOutcome> outcomes);

/// alpha = p_{w,r1,r2} p_w / (p_{w,r1} p_{w,r2}) with first-order binomial
/// error propagation. With zero triples the error uses a single count.
Estimate antibunching_alpha(const CoincidenceStats& stats);

/// alpha = 2p(2c(1+p) - p) / (c(1+p))^2.
double alpha_model_curve(double p, double c);

struct AlphaPoint {
  double p = 0.0;
  Estimate alpha;
};

/// Weighted least-squares estimate of c in alpha_model_curve; the error
/// comes from the curvature of chi^2.
struct AlphaFit {
  Estimate c;
  double chi2 = 0.0;
};
AlphaFit fit_alpha_c(std::span<const AlphaPoint> points);

/// g2_{w,r} = p_{w,r} / (p_w p_r).
Estimate g2_cross(const CoincidenceStats& stats);

struct TimeWindow {
  double begin = 0.0;
  double end = 0.0;
  bool contains(double t) const { return t >= begin && t <= end; }
};

enum class PeakModel { kMaximumSample, kGaussianFit };

/// Peak maximum over the mean background. The Gaussian model fits
/// amplitude, centre and width over the peak window with the offset pinned to
/// the background mean; it needs at least four peak samples and otherwise
/// falls back to the largest sample.
double snr_at_rephasing(std::span<const CurvePoint> curve, TimeWindow background,
                        TimeWindow peak, PeakModel model = PeakModel::kGaussianFit);

/// Exact per-trial probabilities when every trial is read out.
struct ReadoutExpectation {
  double p_w = 0.0;
  double p_r = 0.0;
  double p_wr = 0.0;
  double p_wr1 = 0.0;
  double p_wr2 = 0.0;
  double p_wr1r2 = 0.0;

  double eta_ret() const { return p_wr / p_w; }
  double alpha() const { return p_wr1r2 * p_w / (p_wr1 * p_wr2); }
  double g2() const { return p_wr / (p_w * p_r); }
};

ReadoutExpectation expected_readout(const EmissionModel& emission, const DetectionChain& chain,
                                    double eta_ret, double noise_mean);

}  // namespace dlcz::photon
