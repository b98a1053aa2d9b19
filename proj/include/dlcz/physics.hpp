#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace dlcz::physics {

using Vec3 = Eigen::Vector3d;

/// One atom contributing to a spin-wave. The gradient axis is z.
struct AtomSample {
  Vec3 position = Vec3::Zero();  // m
  Vec3 velocity = Vec3::Zero();  // m/s
};

struct EnsembleModel {
  std::size_t atom_count = 10000;
  Vec3 cloud_sigma = Vec3::Constant(1e-3);  // m
  double temperature = 100e-6;              // K
  std::uint64_t rng_seed = 1;
  double atom_mass = 0.0;  // kg; 0 selects 87Rb

  void validate() const;
  double mass() const;
  /// One-dimensional Maxwell-Boltzmann velocity spread sqrt(k_B T / m).
  double velocity_sigma() const;
};

/// Draws positions from a centred Gaussian and velocities from a
/// Maxwell-Boltzmann distribution. Atom j depends only on (seed, j).
std::vector<AtomSample> sample_ensemble(const EnsembleModel& model);

/// Spin-wave phase grating k_W - k_w and the time it was written.
struct SpinWaveMode {
  Vec3 delta_k = Vec3::Zero();  // rad/m
  double creation_time = 0.0;   // s

  /// Write pulse and write photon of equal wavelength crossing at
  /// `crossing_angle`: |delta_k| = 2 k sin(angle / 2). The grating is put on
  /// the gradient axis, tilted by `misalignment` in the x-z plane.
  static SpinWaveMode from_geometry(double wavelength, double crossing_angle,
                                    double misalignment = 0.0,
                                    double creation_time = 0.0);
};

struct GradientSegment {
  double start = 0.0;   // s
  double target = 0.0;  // T/m
};

/// Magnetic gradient G(t). Before the first segment the gradient holds
/// `initial_amplitude`; at each segment start it relaxes exponentially
/// (time constant `coil_response_tau`) from its current value to the
/// segment target, so G is continuous for tau > 0. All integrals are
/// evaluated in closed form.
class GradientWaveform {
 public:
  GradientWaveform() = default;
  GradientWaveform(std::vector<GradientSegment> segments, double coil_response_tau,
                   double zeeman_coefficient, double initial_amplitude = 0.0);

  /// Zero gradient everywhere.
  static GradientWaveform off(double zeeman_coefficient);
  /// Settled at `amplitude`, switched at `reversal_time` towards
  /// `reversed_ratio * amplitude`.
  static GradientWaveform reversal(double amplitude, double reversal_time,
                                   double coil_response_tau, double zeeman_coefficient,
                                   double reversed_ratio = -1.0);

  double amplitude(double t) const;
  /// Integral of G over [t0, t1]; antisymmetric in its bounds.
  double area(double t0, double t1) const;
  /// Integral of (t - t0) G(t) over [t0, t1].
  double first_moment(double t0, double t1) const;

  const std::vector<GradientSegment>& segments() const { return segments_; }
  double coil_response_tau() const { return tau_; }
  double zeeman_coefficient() const { return zeeman_coefficient_; }
  double initial_amplitude() const { return initial_amplitude_; }
  bool is_off() const;

 private:
  struct Piece {
    double start;
    double end;
    double from;    // G at start
    double target;  // asymptote
  };
  void build_pieces();
  template <typename F>
  double integrate(double t0, double t1, F&& piece_integral) const;

  std::vector<GradientSegment> segments_;
  double tau_ = 0.0;
  double zeeman_coefficient_ = 0.0;
  double initial_amplitude_ = 0.0;
  std::vector<Piece> pieces_;
};

/// One coherence class of the stored excitation. Imperfect optical pumping
/// leaves a second class with a different Zeeman sensitivity whose
/// interference with the main one produces a beat note.
struct CoherenceClass {
  double weight = 1.0;
  double zeeman_scale = 1.0;
  double beat_frequency = 0.0;  // rad/s
};

class ClassMixture {
 public:
  ClassMixture();
  explicit ClassMixture(std::vector<CoherenceClass> classes);

  static ClassMixture single();
  static ClassMixture two_class(double second_weight, double second_zeeman_scale,
                                double beat_frequency);

  const std::vector<CoherenceClass>& classes() const { return classes_; }

 private:
  std::vector<CoherenceClass> classes_;
};

enum class MotionModel {
  kFrozenPosition,  // Zeeman phase at creation-time z; motion via Doppler only
  kMovingAtoms,     // Zeeman phase follows z(t) = z + v_z (t - t0)
  kStatic,          // zero-temperature limit: velocities ignored
};

/// Phase acquired by the atom's term of the spin-wave between creation and t.
double accrued_phase(const AtomSample& atom, const SpinWaveMode& mode,
                     const GradientWaveform& waveform, double t,
                     double zeeman_scale = 1.0,
                     MotionModel motion = MotionModel::kFrozenPosition);

/// Value and Monte Carlo standard error of a collective overlap.
struct OverlapEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Evaluates |<psi(0)|psi(t)>|^2 for a fixed atom sample. The gradient enters
/// only through the area and first moment since creation, so one evaluator
/// serves any waveform.
class OverlapEvaluator {
 public:
  OverlapEvaluator(std::span<const AtomSample> atoms, const SpinWaveMode& mode,
                   ClassMixture mixture, MotionModel motion = MotionModel::kFrozenPosition);

  /// `area_offset` is added to the gradient area (slow current drifts).
  double at(const GradientWaveform& waveform, double t, double area_offset = 0.0) const;
  OverlapEstimate estimate_at(const GradientWaveform& waveform, double t,
                              double area_offset = 0.0) const;

  /// Raw form: zeeman_area = gamma * integral(G), zeeman_moment =
  /// gamma * integral((t'-t0) G), elapsed = t - t0.
  OverlapEstimate evaluate(double zeeman_area, double zeeman_moment, double elapsed,
                           bool with_error) const;

  const SpinWaveMode& mode() const { return mode_; }
  std::size_t atom_count() const { return z_.size(); }

 private:
  SpinWaveMode mode_;
  ClassMixture mixture_;
  MotionModel motion_;
  std::vector<double> z_;
  std::vector<double> vz_;
  std::vector<double> doppler_rate_;  // delta_k . v
};

double collective_overlap(std::span<const AtomSample> atoms, const SpinWaveMode& mode,
                          const GradientWaveform& waveform, const ClassMixture& mixture,
                          double t, MotionModel motion = MotionModel::kFrozenPosition);

/// N -> infinity limit of collective_overlap for the Gaussian cloud and
/// Maxwell-Boltzmann velocities of `model` (Gaussian characteristic function).
double gaussian_ensemble_overlap(const EnsembleModel& model, const SpinWaveMode& mode,
                                 const GradientWaveform& waveform,
                                 const ClassMixture& mixture, double t,
                                 double area_offset = 0.0,
                                 MotionModel motion = MotionModel::kFrozenPosition);

/// Root of integral_{creation_time}^{t} G = 0 inside [window_begin, window_end].
/// Atom-independent: the Zeeman phase of every atom is gamma * z_j times
/// the same area. Throws kNoRoot if the area keeps its sign.
double solve_rephasing_time(const GradientWaveform& waveform, double window_begin,
                            double window_end, double creation_time = 0.0);

/// eta(t) = eta0 * overlap(t) * exp(-(t - t0) / motional_lifetime).
std::vector<double> retrieval_efficiency_curve(
    std::span<const AtomSample> atoms, const SpinWaveMode& mode,
    const GradientWaveform& waveform, const ClassMixture& mixture,
    std::span<const double> times, double eta0,
    double motional_lifetime = std::numeric_limits<double>::infinity(),
    MotionModel motion = MotionModel::kFrozenPosition);

}  // namespace dlcz::physics
