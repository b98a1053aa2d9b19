#include "dlcz/physics.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <complex>
#include <fmt/core.h>

#include "dlcz/constants.hpp"
#include "dlcz/error.hpp"
#include "dlcz/rng.hpp"

namespace dlcz::physics {

namespace {

constexpr std::uint64_t kAtomStreamTag = 0xA70A5ull;

}  // namespace

// ---------------------------------------------------------------- ensemble

void EnsembleModel::validate() const {
  require(atom_count >= 1, "ensemble.atom_count must be >= 1");
  for (int axis = 0; axis < 3; ++axis) {
    require(std::isfinite(cloud_sigma[axis]) && cloud_sigma[axis] > 0.0,
            fmt::format("ensemble.cloud_sigma[{}] must be > 0", axis));
  }
  require(std::isfinite(temperature) && temperature > 0.0,
          "ensemble.temperature must be > 0");
  require(atom_mass >= 0.0, "ensemble.atom_mass must be >= 0");
}

double EnsembleModel::mass() const {
  return atom_mass > 0.0 ? atom_mass : constants::kRb87Mass;
}

double EnsembleModel::velocity_sigma() const {
  return std::sqrt(constants::kBoltzmann * temperature / mass());
}

std::vector<AtomSample> sample_ensemble(const EnsembleModel& model) {
  model.validate();
  const double sigma_v = model.velocity_sigma();
  const std::uint64_t key = derive_key(model.rng_seed, {kAtomStreamTag});
  std::vector<AtomSample> atoms(model.atom_count);
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    CounterRng rng(key, j);
    AtomSample& atom = atoms[j];
    for (int axis = 0; axis < 3; ++axis) atom.position[axis] = model.cloud_sigma[axis] * rng.normal();
    for (int axis = 0; axis < 3; ++axis) atom.velocity[axis] = sigma_v * rng.normal();
  }
  return atoms;
}

SpinWaveMode SpinWaveMode::from_geometry(double wavelength, double crossing_angle,
                                         double misalignment, double creation_time) {
  require(wavelength > 0.0, "geometry.wavelength must be > 0");
  require(crossing_angle > 0.0 && crossing_angle < constants::kPi,
          "geometry.crossing_angle must lie in (0, pi)");
  const double k = constants::kTwoPi / wavelength;
  const double magnitude = 2.0 * k * std::sin(0.5 * crossing_angle);
  SpinWaveMode mode;
  mode.delta_k = Vec3(magnitude * std::sin(misalignment), 0.0,
                      magnitude * std::cos(misalignment));
  mode.creation_time = creation_time;
  return mode;
}

// ---------------------------------------------------------------- gradient

GradientWaveform::GradientWaveform(std::vector<GradientSegment> segments,
                                   double coil_response_tau, double zeeman_coefficient,
                                   double initial_amplitude)
    : segments_(std::move(segments)),
      tau_(coil_response_tau),
      zeeman_coefficient_(zeeman_coefficient),
      initial_amplitude_(initial_amplitude) {
  require(std::isfinite(tau_) && tau_ >= 0.0, "gradient.coil_tau must be >= 0");
  require(std::isfinite(zeeman_coefficient_), "gradient.zeeman_coefficient must be finite");
  for (std::size_t i = 1; i < segments_.size(); ++i) {
    require(segments_[i].start > segments_[i - 1].start,
            "gradient segment start times must be strictly increasing");
  }
  build_pieces();
}

GradientWaveform GradientWaveform::off(double zeeman_coefficient) {
  return GradientWaveform({}, 0.0, zeeman_coefficient, 0.0);
}

GradientWaveform GradientWaveform::reversal(double amplitude, double reversal_time,
                                            double coil_response_tau,
                                            double zeeman_coefficient,
                                            double reversed_ratio) {
  return GradientWaveform({{reversal_time, reversed_ratio * amplitude}}, coil_response_tau,
                          zeeman_coefficient, amplitude);
}

bool GradientWaveform::is_off() const {
  if (initial_amplitude_ != 0.0) return false;
  return std::all_of(segments_.begin(), segments_.end(),
                     [](const GradientSegment& s) { return s.target == 0.0; });
}

void GradientWaveform::build_pieces() {
  pieces_.clear();
  const double inf = std::numeric_limits<double>::infinity();
  double start = -inf;
  double value = initial_amplitude_;
  double target = initial_amplitude_;
  for (const GradientSegment& segment : segments_) {
    pieces_.push_back({start, segment.start, value, target});
    // value reached at the end of the previous piece
    if (start == -inf || tau_ == 0.0) {
      value = target;
    } else {
      value = target + (value - target) * std::exp(-(segment.start - start) / tau_);
    }
    start = segment.start;
    target = segment.target;
  }
  pieces_.push_back({start, inf, value, target});
}

double GradientWaveform::amplitude(double t) const {
  for (const Piece& piece : pieces_) {
    if (t >= piece.start && t < piece.end) {
      if (!std::isfinite(piece.start) || tau_ == 0.0) {
        return t > piece.start || !std::isfinite(piece.start) ? piece.target : piece.from;
      }
      return piece.target + (piece.from - piece.target) * std::exp(-(t - piece.start) / tau_);
    }
  }
  return pieces_.back().target;
}

template <typename F>
double GradientWaveform::integrate(double t0, double t1, F&& piece_integral) const {
  double total = 0.0;
  for (const Piece& piece : pieces_) {
    const double lo = std::max(t0, piece.start);
    const double hi = std::min(t1, piece.end);
    if (hi <= lo) continue;
    total += piece_integral(piece, lo, hi);
  }
  return total;
}

double GradientWaveform::area(double t0, double t1) const {
  if (t1 < t0) return -area(t1, t0);
  return integrate(t0, t1, [this](const Piece& piece, double lo, double hi) {
    const double constant_part = piece.target * (hi - lo);
    if (!std::isfinite(piece.start) || tau_ == 0.0) return constant_part;
    const double u0 = lo - piece.start;
    const double u1 = hi - piece.start;
    const double excess = piece.from - piece.target;
    return constant_part + excess * tau_ * (std::exp(-u0 / tau_) - std::exp(-u1 / tau_));
  });
}

double GradientWaveform::first_moment(double t0, double t1) const {
  require(t1 >= t0, "first_moment requires t1 >= t0");
  const double reference = t0;
  return integrate(t0, t1, [this, reference](const Piece& piece, double lo, double hi) {
    const double a = lo - reference;
    const double b = hi - reference;
    const double constant_part = piece.target * 0.5 * (b * b - a * a);
    if (!std::isfinite(piece.start) || tau_ == 0.0) return constant_part;
    // integral of (s + u - reference) * excess * exp(-u / tau) du
    const double u0 = lo - piece.start;
    const double u1 = hi - piece.start;
    const double e0 = std::exp(-u0 / tau_);
    const double e1 = std::exp(-u1 / tau_);
    const double excess = piece.from - piece.target;
    const double offset = piece.start - reference;
    const double zeroth = tau_ * (e0 - e1);
    const double first = tau_ * (u0 * e0 - u1 * e1) + tau_ * tau_ * (e0 - e1);
    return constant_part + excess * (offset * zeroth + first);
  });
}

// ---------------------------------------------------------------- mixture

ClassMixture::ClassMixture() : classes_{CoherenceClass{}} {}

ClassMixture::ClassMixture(std::vector<CoherenceClass> classes) : classes_(std::move(classes)) {
  require(!classes_.empty(), "mixture needs at least one class");
  double sum = 0.0;
  for (const CoherenceClass& c : classes_) {
    require(std::isfinite(c.weight) && c.weight >= 0.0, "mixture weights must be >= 0");
    require(std::isfinite(c.zeeman_scale) && std::isfinite(c.beat_frequency),
            "mixture parameters must be finite");
    sum += c.weight;
  }
  require(std::abs(sum - 1.0) <= 1e-12,
          fmt::format("mixture weights must sum to 1 (got {:.15g})", sum));
}

ClassMixture ClassMixture::single() { return ClassMixture(); }

ClassMixture ClassMixture::two_class(double second_weight, double second_zeeman_scale,
                                     double beat_frequency) {
  return ClassMixture({{1.0 - second_weight, 1.0, 0.0},
                       {second_weight, second_zeeman_scale, beat_frequency}});
}

// ---------------------------------------------------------------- phases

double accrued_phase(const AtomSample& atom, const SpinWaveMode& mode,
                     const GradientWaveform& waveform, double t, double zeeman_scale,
                     MotionModel motion) {
  const double t0 = mode.creation_time;
  if (t < t0) {
    throw Error(ErrorCode::kTimeOrder,
                fmt::format("accrued_phase: t = {} precedes creation time {}", t, t0));
  }
  const double gamma = zeeman_scale * waveform.zeeman_coefficient();
  double phase = gamma * atom.position.z() * waveform.area(t0, t);
  if (motion == MotionModel::kStatic) return phase;
  if (motion == MotionModel::kMovingAtoms) {
    phase += gamma * atom.velocity.z() * waveform.first_moment(t0, t);
  }
  phase += mode.delta_k.dot(atom.velocity) * (t - t0);
  return phase;
}

OverlapEvaluator::OverlapEvaluator(std::span<const AtomSample> atoms, const SpinWaveMode& mode,
                                   ClassMixture mixture, MotionModel motion)
    : mode_(mode), mixture_(std::move(mixture)), motion_(motion) {
  if (atoms.empty()) throw Error(ErrorCode::kEmptyEnsemble, "collective overlap of an empty ensemble");
  z_.reserve(atoms.size());
  vz_.reserve(atoms.size());
  doppler_rate_.reserve(atoms.size());
  for (const AtomSample& atom : atoms) {
    z_.push_back(atom.position.z());
    vz_.push_back(motion == MotionModel::kStatic ? 0.0 : atom.velocity.z());
    doppler_rate_.push_back(motion == MotionModel::kStatic ? 0.0 : mode.delta_k.dot(atom.velocity));
  }
}

OverlapEstimate OverlapEvaluator::evaluate(double zeeman_area, double zeeman_moment,
                                           double elapsed, bool with_error) const {
  const auto& classes = mixture_.classes();
  const std::size_t n = z_.size();
  const bool moving = motion_ == MotionModel::kMovingAtoms;

  // Y_j = sum_c w_c exp(i Omega_c tau) exp(i phi_jc); overlap = |mean Y|^2.
  std::vector<std::complex<double>> class_factor;
  class_factor.reserve(classes.size());
  for (const CoherenceClass& c : classes) {
    class_factor.push_back(c.weight * std::polar(1.0, c.beat_frequency * elapsed));
  }

  double sum_re = 0.0, sum_im = 0.0;
  double sum_re2 = 0.0, sum_im2 = 0.0, sum_reim = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double zeeman = zeeman_area * z_[j] + (moving ? zeeman_moment * vz_[j] : 0.0);
    const double doppler = doppler_rate_[j] * elapsed;
    double re = 0.0, im = 0.0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      const double phi = classes[c].zeeman_scale * zeeman + doppler;
      const double cs = std::cos(phi);
      const double sn = std::sin(phi);
      re += class_factor[c].real() * cs - class_factor[c].imag() * sn;
      im += class_factor[c].real() * sn + class_factor[c].imag() * cs;
    }
    sum_re += re;
    sum_im += im;
    if (with_error) {
      sum_re2 += re * re;
      sum_im2 += im * im;
      sum_reim += re * im;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const double mean_re = sum_re * inv_n;
  const double mean_im = sum_im * inv_n;
  OverlapEstimate estimate;
  estimate.value = std::clamp(mean_re * mean_re + mean_im * mean_im, 0.0, 1.0);
  if (with_error) {
    const double var_re = sum_re2 * inv_n - mean_re * mean_re;
    const double var_im = sum_im2 * inv_n - mean_im * mean_im;
    const double cov = sum_reim * inv_n - mean_re * mean_im;
    // delta method on |Z|^2 plus the O(1/N) bias of |Z|^2 itself
    const double linear = 4.0 *
                          (mean_re * mean_re * var_re + mean_im * mean_im * var_im +
                           2.0 * mean_re * mean_im * cov) * inv_n;
    const double bias = (var_re + var_im) * inv_n;
    estimate.standard_error = std::sqrt(std::max(linear, 0.0) + bias * bias);
  }
  return estimate;
}

OverlapEstimate OverlapEvaluator::estimate_at(const GradientWaveform& waveform, double t,
                                              double area_offset) const {
  const double t0 = mode_.creation_time;
  if (t < t0) {
    throw Error(ErrorCode::kTimeOrder,
                fmt::format("overlap: t = {} precedes creation time {}", t, t0));
  }
  if (t == t0 && area_offset == 0.0) return {1.0, 0.0};
  const double gamma = waveform.zeeman_coefficient();
  const double area = waveform.area(t0, t) + area_offset;
  const double moment =
      motion_ == MotionModel::kMovingAtoms ? waveform.first_moment(t0, t) : 0.0;
  return evaluate(gamma * area, gamma * moment, t - t0, true);
}

double OverlapEvaluator::at(const GradientWaveform& waveform, double t,
                            double area_offset) const {
  const double t0 = mode_.creation_time;
  if (t < t0) {
    throw Error(ErrorCode::kTimeOrder,
                fmt::format("overlap: t = {} precedes creation time {}", t, t0));
  }
  if (t == t0 && area_offset == 0.0) return 1.0;
  const double gamma = waveform.zeeman_coefficient();
  const double area = waveform.area(t0, t) + area_offset;
  const double moment =
      motion_ == MotionModel::kMovingAtoms ? waveform.first_moment(t0, t) : 0.0;
  return evaluate(gamma * area, gamma * moment, t - t0, false).value;
}

double collective_overlap(std::span<const AtomSample> atoms, const SpinWaveMode& mode,
                          const GradientWaveform& waveform, const ClassMixture& mixture,
                          double t, MotionModel motion) {
  return OverlapEvaluator(atoms, mode, mixture, motion).at(waveform, t);
}

double gaussian_ensemble_overlap(const EnsembleModel& model, const SpinWaveMode& mode,
                                 const GradientWaveform& waveform,
                                 const ClassMixture& mixture, double t, double area_offset,
                                 MotionModel motion) {
  model.validate();
  const double t0 = mode.creation_time;
  if (t < t0) {
    throw Error(ErrorCode::kTimeOrder,
                fmt::format("overlap: t = {} precedes creation time {}", t, t0));
  }
  const double tau = t - t0;
  const double gamma = waveform.zeeman_coefficient();
  const double area = waveform.area(t0, t) + area_offset;
  const double moment = motion == MotionModel::kMovingAtoms ? waveform.first_moment(t0, t) : 0.0;
  const double sigma_v = motion == MotionModel::kStatic ? 0.0 : model.velocity_sigma();
  const double sigma_z = model.cloud_sigma.z();
  const Vec3 dk_tau = mode.delta_k * tau;

  std::complex<double> total = 0.0;
  for (const CoherenceClass& c : mixture.classes()) {
    const double zeeman = c.zeeman_scale * gamma;
    const double kz = dk_tau.z() + zeeman * moment;
    const double variance = std::pow(zeeman * area * sigma_z, 2) +
                            sigma_v * sigma_v *
                                (dk_tau.x() * dk_tau.x() + dk_tau.y() * dk_tau.y() + kz * kz);
    total += c.weight * std::polar(std::exp(-0.5 * variance), c.beat_frequency * tau);
  }
  return std::clamp(std::norm(total), 0.0, 1.0);
}

double solve_rephasing_time(const GradientWaveform& waveform, double window_begin,
                            double window_end, double creation_time) {
  require(window_end > window_begin, "rephasing search window must have positive width");
  require(window_begin >= creation_time, "rephasing search window starts before creation");
  auto area = [&](double t) { return waveform.area(creation_time, t); };

  constexpr int kScanSteps = 4096;
  const double step = (window_end - window_begin) / kScanSteps;
  double a = window_begin;
  double fa = area(a);
  if (fa == 0.0 && a > creation_time) return a;
  for (int i = 1; i <= kScanSteps; ++i) {
    const double b = i == kScanSteps ? window_end : window_begin + i * step;
    const double fb = area(b);
    if (fb == 0.0) return b;
    if ((fa < 0.0) != (fb < 0.0) && fa != 0.0) {
      std::uintmax_t iterations = 200;
      auto tolerance = [](double lo, double hi) { return std::abs(hi - lo) <= 1e-15; };
      const auto bracket =
          boost::math::tools::toms748_solve(area, a, b, fa, fb, tolerance, iterations);
      return 0.5 * (bracket.first + bracket.second);
    }
    a = b;
    fa = fb;
  }
  throw Error(ErrorCode::kNoRoot,
              fmt::format("gradient area does not change sign in [{}, {}] s", window_begin,
                          window_end));
}

std::vector<double> retrieval_efficiency_curve(std::span<const AtomSample> atoms,
                                               const SpinWaveMode& mode,
                                               const GradientWaveform& waveform,
                                               const ClassMixture& mixture,
                                               std::span<const double> times, double eta0,
                                               double motional_lifetime, MotionModel motion) {
  require(eta0 > 0.0 && eta0 <= 1.0, "eta0 must lie in (0, 1]");
  require(motional_lifetime > 0.0, "motional_lifetime must be > 0");
  require(std::is_sorted(times.begin(), times.end()), "times must be non-decreasing");
  const OverlapEvaluator evaluator(atoms, mode, mixture, motion);
  std::vector<double> curve;
  curve.reserve(times.size());
  for (double t : times) {
    const double extra = std::isinf(motional_lifetime)
                             ? 1.0
                             : std::exp(-(t - mode.creation_time) / motional_lifetime);
    curve.push_back(eta0 * evaluator.at(waveform, t) * extra);
  }
  return curve;
}

}  // namespace dlcz::physics
