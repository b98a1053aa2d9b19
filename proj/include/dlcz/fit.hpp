#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <span>

#include "dlcz/types.hpp"

namespace dlcz::fit {

/// residuals(params, out) fills `out` (pre-sized) with weighted residuals.
using ResidualFunction = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LeastSquaresResult {
  Eigen::VectorXd parameters;
  Eigen::MatrixXd covariance;  // (J^T J)^-1 at the optimum
  double chi2 = 0.0;
  bool converged = false;
};

/// Levenberg-Marquardt with a forward-difference Jacobian.
LeastSquaresResult least_squares(const ResidualFunction& residuals,
                                 Eigen::VectorXd initial, int residual_count);

struct GaussianPeak {
  double amplitude = 0.0;
  double center = 0.0;
  double sigma = 0.0;
  double offset = 0.0;

  double operator()(double t) const;
  double maximum() const { return offset + amplitude; }
  double fwhm() const;
};

/// Unweighted fit of offset + A exp(-(t - t_c)^2 / (2 sigma^2)). With
/// `fixed_offset` the offset is held at that value. Needs >= 4 points.
GaussianPeak fit_gaussian_peak(std::span<const CurvePoint> points,
                               std::optional<double> fixed_offset = std::nullopt);

/// eta(t) = A exp(-(t / tau)^2) (1 + V cos(Omega t + phi)) + B. With
/// `beat_guess` <= 0 the beat term is dropped (V = 0); B is fitted only
/// with `free_offset` (a read-noise floor that does not decay).
struct DecayFit {
  double amplitude = 0.0;
  Estimate tau;
  double visibility = 0.0;
  Estimate beat_frequency;  // rad/s
  double phase = 0.0;
  double offset = 0.0;
  bool converged = false;

  double operator()(double t) const;
};

DecayFit fit_decay(std::span<const CurvePoint> points, double tau_guess, double beat_guess,
                   bool free_offset = false);

}  // namespace dlcz::fit
