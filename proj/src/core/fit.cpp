#include "dlcz/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "dlcz/constants.hpp"
#include "dlcz/error.hpp"

namespace dlcz::fit {

namespace {

struct Functor {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  const ResidualFunction* residuals;
  int input_count;
  int value_count;

  int inputs() const { return input_count; }
  int values() const { return value_count; }
  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    (*residuals)(x, out);
    return 0;
  }
};

Eigen::MatrixXd jacobian(const ResidualFunction& residuals, const Eigen::VectorXd& x,
                         int residual_count) {
  Eigen::VectorXd base(residual_count), shifted(residual_count);
  residuals(x, base);
  Eigen::MatrixXd jac(residual_count, x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd probe = x;
    const double h = 1e-7 * std::max(std::abs(x[k]), 1e-8);
    probe[k] += h;
    residuals(probe, shifted);
    jac.col(k) = (shifted - base) / h;
  }
  return jac;
}

}  // namespace

LeastSquaresResult least_squares(const ResidualFunction& residuals, Eigen::VectorXd initial,
                                 int residual_count) {
  require(residual_count >= initial.size(), "least squares needs at least as many residuals as parameters");
  Functor functor{&residuals, static_cast<int>(initial.size()), residual_count};
  Eigen::NumericalDiff<Functor> numeric(functor);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<Functor>> solver(numeric);
  solver.parameters.maxfev = 4000;
  solver.parameters.xtol = 1e-12;
  solver.parameters.ftol = 1e-12;
  const auto status = solver.minimize(initial);

  LeastSquaresResult result;
  result.parameters = initial;
  Eigen::VectorXd r(residual_count);
  residuals(initial, r);
  result.chi2 = r.squaredNorm();
  result.converged = status == Eigen::LevenbergMarquardtSpace::RelativeReductionTooSmall ||
                     status == Eigen::LevenbergMarquardtSpace::RelativeErrorTooSmall ||
                     status == Eigen::LevenbergMarquardtSpace::RelativeErrorAndReductionTooSmall ||
                     status == Eigen::LevenbergMarquardtSpace::CosinusTooSmall ||
                     status == Eigen::LevenbergMarquardtSpace::XtolTooSmall ||
                     status == Eigen::LevenbergMarquardtSpace::FtolTooSmall ||
                     status == Eigen::LevenbergMarquardtSpace::GtolTooSmall;
  const Eigen::MatrixXd jac = jacobian(residuals, initial, residual_count);
  result.covariance = (jac.transpose() * jac).completeOrthogonalDecomposition().pseudoInverse();
  return result;
}

double GaussianPeak::operator()(double t) const {
  const double u = (t - center) / sigma;
  return offset + amplitude * std::exp(-0.5 * u * u);
}

double GaussianPeak::fwhm() const { return 2.0 * std::sqrt(2.0 * std::log(2.0)) * sigma; }

GaussianPeak fit_gaussian_peak(std::span<const CurvePoint> points,
                               std::optional<double> fixed_offset) {
  require(points.size() >= 4, "gaussian peak fit needs at least four points");
  const auto max_it = std::max_element(points.begin(), points.end(),
                                       [](const auto& a, const auto& b) { return a.value < b.value; });
  double lowest = points.front().value;
  for (const CurvePoint& p : points) lowest = std::min(lowest, p.value);
  const double offset0 = fixed_offset.value_or(lowest);
  const double amplitude0 = max_it->value - offset0;

  // width guess from the samples above half maximum
  double lo = max_it->time, hi = max_it->time;
  for (const CurvePoint& p : points) {
    if (p.value - offset0 >= 0.5 * amplitude0) {
      lo = std::min(lo, p.time);
      hi = std::max(hi, p.time);
    }
  }
  double spacing = (points.back().time - points.front().time) / (points.size() - 1);
  if (!(spacing > 0.0)) spacing = 1.0;
  const double sigma0 = std::max(hi - lo, spacing) / 2.3548;

  // parameters scaled to O(1): amplitude/amplitude0, (centre - t_max)/sigma0,
  // sigma/sigma0, offset/amplitude0
  const double scale_a = amplitude0 != 0.0 ? std::abs(amplitude0) : 1.0;
  const double t_ref = max_it->time;
  const bool free_offset = !fixed_offset.has_value();
  auto unpack = [&](const Eigen::VectorXd& x) {
    GaussianPeak peak;
    peak.amplitude = x[0] * scale_a;
    peak.center = t_ref + x[1] * sigma0;
    peak.sigma = std::abs(x[2]) * sigma0;
    peak.offset = free_offset ? x[3] * scale_a : *fixed_offset;
    return peak;
  };
  ResidualFunction residuals = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    const GaussianPeak peak = unpack(x);
    for (std::size_t i = 0; i < points.size(); ++i) {
      out[static_cast<Eigen::Index>(i)] = (peak(points[i].time) - points[i].value) / scale_a;
    }
  };
  Eigen::VectorXd initial(free_offset ? 4 : 3);
  initial[0] = amplitude0 / scale_a;
  initial[1] = 0.0;
  initial[2] = 1.0;
  if (free_offset) initial[3] = offset0 / scale_a;
  const LeastSquaresResult result =
      least_squares(residuals, initial, static_cast<int>(points.size()));
  return unpack(result.parameters);
}

}  // namespace dlcz::fit

namespace dlcz::fit {

double DecayFit::operator()(double t) const {
  const double u = t / tau.value;
  return amplitude * std::exp(-u * u) * (1.0 + visibility * std::cos(beat_frequency.value * t + phase)) + offset;
}

DecayFit fit_decay(std::span<const CurvePoint> points, double tau_guess, double beat_guess, bool free_offset) {
  const bool beat = beat_guess > 0.0;
  const Eigen::Index n_params = (beat ? 5 : 2) + (free_offset ? 1 : 0);
  require(points.size() > static_cast<std::size_t>(n_params), "decay fit needs more curve points");
  require(tau_guess > 0.0, "decay fit needs a positive tau guess");
  double scale = 0.0;
  for (const CurvePoint& p : points) scale = std::max(scale, std::abs(p.value));
  if (scale == 0.0) throw Error(ErrorCode::kInsufficientStatistics, "decay fit of an all-zero curve");
  for (const CurvePoint& p : points) {
    require(p.standard_error > 0.0, "decay fit needs positive standard errors");
  }

  // x = (A / scale, tau / tau_guess, [V, Omega / beat_guess, phi], [B / scale])
  auto unpack = [&](const Eigen::VectorXd& x) {
    DecayFit f;
    f.amplitude = x[0] * scale;
    f.tau.value = std::abs(x[1]) * tau_guess;
    if (beat) {
      f.visibility = x[2];
      f.beat_frequency.value = x[3] * beat_guess;
      f.phase = x[4];
    }
    if (free_offset) f.offset = x[n_params - 1] * scale;
    return f;
  };
  ResidualFunction residuals = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    const DecayFit f = unpack(x);
    for (std::size_t i = 0; i < points.size(); ++i) {
      out[static_cast<Eigen::Index>(i)] = (f(points[i].time) - points[i].value) / points[i].standard_error;
    }
  };
  Eigen::VectorXd initial(n_params);
  initial[0] = points.front().value / scale;
  initial[1] = 1.0;
  if (beat) {
    initial[2] = 0.2;
    initial[3] = 1.0;
    initial[4] = 0.0;
  }
  if (free_offset) {
    // start from the tail of the curve
    initial[n_params - 1] = std::max(0.0, points.back().value) / scale;
    initial[0] -= initial[n_params - 1];
  }
  const LeastSquaresResult r = least_squares(residuals, initial, static_cast<int>(points.size()));
  DecayFit fit = unpack(r.parameters);
  fit.converged = r.converged;
  const double dof = std::max<double>(1.0, static_cast<double>(points.size()) - initial.size());
  const double inflate = std::max(1.0, std::sqrt(r.chi2 / dof));
  fit.tau.standard_error = std::sqrt(std::max(0.0, r.covariance(1, 1))) * tau_guess * inflate;
  if (beat) fit.beat_frequency.standard_error = std::sqrt(std::max(0.0, r.covariance(3, 3))) * beat_guess * inflate;
  // keep the visibility positive; a negative V is a pi phase shift
  if (fit.visibility < 0.0) {
    fit.visibility = -fit.visibility;
    fit.phase += constants::kPi;
  }
  return fit;
}

}  // namespace dlcz::fit
