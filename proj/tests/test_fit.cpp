#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dlcz/error.hpp"
#include "dlcz/fit.hpp"
#include "dlcz/rng.hpp"

using namespace dlcz;

TEST_CASE("least squares on a straight line") {
  // y = 2 x + 1 sampled exactly
  fit::ResidualFunction r = [](const Eigen::VectorXd& p, Eigen::VectorXd& out) {
    for (int i = 0; i < 5; ++i) out[i] = p[0] * i + p[1] - (2.0 * i + 1.0);
  };
  const fit::LeastSquaresResult res = fit::least_squares(r, Eigen::Vector2d(0.0, 0.0), 5);
  CHECK(res.converged);
  CHECK(res.parameters[0] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(res.parameters[1] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("gaussian peak fit") {
  fit::GaussianPeak truth{0.2, 20.84e-6, 150e-9 / 2.3548200450309493, 0.015};
  std::vector<CurvePoint> pts;
  for (int i = -20; i <= 20; ++i) {
    const double t = truth.center + i * 15e-9;
    pts.push_back({t, truth(t), 0.001});
  }
  SUBCASE("free offset") {
    const fit::GaussianPeak g = fit::fit_gaussian_peak(pts);
    CHECK(g.center == doctest::Approx(truth.center).epsilon(1e-6));
    CHECK(g.fwhm() == doctest::Approx(150e-9).epsilon(1e-4));
    CHECK(g.maximum() == doctest::Approx(0.215).epsilon(1e-6));
  }
  SUBCASE("pinned offset") {
    const fit::GaussianPeak g = fit::fit_gaussian_peak(pts, 0.015);
    CHECK(g.offset == 0.015);
    CHECK(g.fwhm() == doctest::Approx(150e-9).epsilon(1e-4));
  }
  SUBCASE("too few points") {
    pts.resize(3);
    CHECK_THROWS_AS(fit::fit_gaussian_peak(pts), Error);
  }
}

TEST_CASE("decay fit") {
  const double tau = 57e-6, omega = 2.0 * 3.14159265358979323846 / 20e-6;
  CounterRng rng(1, 0);
  std::vector<CurvePoint> pts;
  for (int i = 0; i <= 60; ++i) {
    const double t = i * 2e-6;
    const double v = 0.3 * std::exp(-std::pow(t / tau, 2)) * (1.0 + 0.2 * std::cos(omega * t + 0.3));
    const double err = 0.002;
    pts.push_back({t, v + err * rng.normal(), err});
  }
  const fit::DecayFit f = fit::fit_decay(pts, 40e-6, 2.0 * 3.14159265358979323846 / 18e-6);
  CHECK(f.converged);
  CHECK(std::abs(f.tau.value - tau) < 4.0 * f.tau.standard_error);
  CHECK(std::abs(f.beat_frequency.value - omega) < 4.0 * f.beat_frequency.standard_error);
  CHECK(f.visibility > 0.0);

  SUBCASE("without a beat") {
    std::vector<CurvePoint> plain;
    for (int i = 0; i <= 30; ++i) {
      const double t = i * 4e-6;
      plain.push_back({t, 0.3 * std::exp(-std::pow(t / tau, 2)), 1e-4});
    }
    const fit::DecayFit g = fit::fit_decay(plain, 30e-6, 0.0);
    CHECK(g.tau.value == doctest::Approx(tau).epsilon(1e-6));
    CHECK(g.visibility == 0.0);
  }

  SUBCASE("a constant floor does not stretch the decay") {
    std::vector<CurvePoint> floored;
    for (int i = 0; i <= 30; ++i) {
      const double t = i * 4e-6;
      floored.push_back({t, 0.3 * std::exp(-std::pow(t / tau, 2)) + 0.015, 1e-4});
    }
    const fit::DecayFit g = fit::fit_decay(floored, 30e-6, 0.0, true);
    CHECK(g.tau.value == doctest::Approx(tau).epsilon(1e-6));
    CHECK(g.offset == doctest::Approx(0.015).epsilon(1e-6));
    // without the floor term the fit drifts long
    CHECK(fit::fit_decay(floored, 30e-6, 0.0).tau.value > 1.05 * tau);
  }
}
