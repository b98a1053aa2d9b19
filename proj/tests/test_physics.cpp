#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numeric>

#include "dlcz/error.hpp"
#include "dlcz/physics.hpp"
#include "dlcz/rng.hpp"

using namespace dlcz;
using namespace dlcz::physics;

namespace {

constexpr double kGamma = 2.0 * 3.14159265358979323846 * 13.996245042e9;

SpinWaveMode z_mode(double dk = 1.3e5, double t0 = 0.0) {
  SpinWaveMode m;
  m.delta_k = Vec3(0, 0, dk);
  m.creation_time = t0;
  return m;
}

std::vector<AtomSample> cloud(std::size_t n, double sigma, double temperature, std::uint64_t seed) {
  EnsembleModel model;
  model.atom_count = n;
  model.cloud_sigma = Vec3::Constant(sigma);
  model.temperature = temperature;
  model.rng_seed = seed;
  return sample_ensemble(model);
}

double sample_std(const std::vector<double>& x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double s = 0.0;
  for (double v : x) s += (v - mean) * (v - mean);
  return std::sqrt(s / (x.size() - 1));
}

}  // namespace

TEST_CASE("philox known answers") {
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) ==
        std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("counter rng streams are reproducible and distinct") {
  CounterRng a(7, 3), b(7, 3), c(7, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    differs |= x != c();
  }
  CHECK(differs);
  CounterRng u(1, 0);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) sum += u.uniform();
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("sample_ensemble") {
  SUBCASE("single atom is deterministic") {
    const auto a = cloud(1, 1e-3, 100e-6, 42);
    const auto b = cloud(1, 1e-3, 100e-6, 42);
    REQUIRE(a.size() == 1);
    CHECK(a[0].position == b[0].position);
    CHECK(a[0].velocity == b[0].velocity);
  }
  SUBCASE("moments") {
    const auto atoms = cloud(100000, 1e-3, 100e-6, 5);
    std::vector<double> vz, z;
    for (const auto& a : atoms) {
      vz.push_back(a.velocity.z());
      z.push_back(a.position.z());
    }
    // sqrt(k_B T / m) for 87Rb at 100 uK
    CHECK(std::abs(sample_std(vz) / 0.0978102266161 - 1.0) < 0.02);
    CHECK(std::abs(sample_std(z) / 1e-3 - 1.0) < 0.02);
  }
  SUBCASE("invalid parameters") {
    EnsembleModel m;
    m.temperature = -1.0;
    CHECK_THROWS_AS(sample_ensemble(m), Error);
    m = EnsembleModel{};
    m.atom_count = 0;
    CHECK_THROWS_AS(sample_ensemble(m), Error);
    m = EnsembleModel{};
    m.cloud_sigma.y() = 0.0;
    CHECK_THROWS_AS(sample_ensemble(m), Error);
  }
}

TEST_CASE("spin-wave geometry") {
  const SpinWaveMode m = SpinWaveMode::from_geometry(780.241209686e-9, 0.95 * 3.14159265358979323846 / 180.0);
  // 2 k sin(theta / 2)
  CHECK(m.delta_k.norm() == doctest::Approx(133520.2023652304).epsilon(1e-12));
  CHECK(m.delta_k.x() == doctest::Approx(0.0));
}

TEST_CASE("gradient waveform") {
  SUBCASE("step limit") {
    const GradientWaveform g({{0.0, 1.0}}, 0.0, kGamma);
    for (double t : {1e-9, 1e-6, 1e-3}) CHECK(g.amplitude(t) == 1.0);
  }
  SUBCASE("ideal reversal") {
    const GradientWaveform g({{0.0, 1.0}, {3e-6, -1.0}}, 0.0, kGamma);
    CHECK(g.amplitude(2e-6) == 1.0);
    CHECK(g.amplitude(4e-6) == -1.0);
  }
  SUBCASE("continuity with a coil response") {
    const GradientWaveform g({{0.0, 1.0}, {3e-6, -1.0}}, 2e-6, kGamma);
    CHECK(g.amplitude(3e-6 - 1e-15) == doctest::Approx(g.amplitude(3e-6 + 1e-15)));
    CHECK(g.amplitude(1.0) == doctest::Approx(-1.0));
  }
  SUBCASE("area by trapezoid") {
    const GradientWaveform g({{0.0, 1.0}, {3e-6, -1.0}}, 2e-6, kGamma, 0.3);
    const int n = 200000;
    const double t1 = 12e-6, h = t1 / n;
    double area = 0.0, moment = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = i * h, b = a + h;
      area += 0.5 * h * (g.amplitude(a) + g.amplitude(b));
      moment += 0.5 * h * (a * g.amplitude(a) + b * g.amplitude(b));
    }
    CHECK(g.area(0.0, t1) == doctest::Approx(area).epsilon(1e-8));
    CHECK(g.first_moment(0.0, t1) == doctest::Approx(moment).epsilon(1e-8));
    CHECK(g.area(t1, 0.0) == doctest::Approx(-area).epsilon(1e-8));
  }
}

TEST_CASE("accrued phase") {
  AtomSample atom;
  atom.position = Vec3(1e-4, -2e-4, 3e-4);
  const GradientWaveform off = GradientWaveform::off(kGamma);
  SUBCASE("no gradient, no motion") {
    for (double t : {0.0, 1e-6, 1e-4}) CHECK(accrued_phase(atom, z_mode(), off, t) == 0.0);
  }
  SUBCASE("pure doppler") {
    atom.velocity = Vec3(0, 0, 0.1);
    for (double t : {1e-6, 5e-6, 2e-5}) CHECK(accrued_phase(atom, z_mode(), off, t) == doctest::Approx(1.3e5 * 0.1 * t));
  }
  SUBCASE("symmetric reversal") {
    const GradientWaveform g({{0.0, 0.1}, {3e-6, -0.1}}, 0.0, kGamma);
    CHECK(std::abs(accrued_phase(atom, z_mode(), g, 6e-6)) < 1e-9);
  }
  SUBCASE("additivity") {
    atom.velocity = Vec3(0.05, 0.02, -0.1);
    const GradientWaveform g({{0.0, 0.1}, {3e-6, -0.1}}, 2e-6, kGamma);
    const double t1 = 1e-6, t2 = 4e-6, t3 = 9e-6;
    const double a = accrued_phase(atom, z_mode(1.3e5, t1), g, t2);
    const double b = accrued_phase(atom, z_mode(1.3e5, t2), g, t3);
    const double c = accrued_phase(atom, z_mode(1.3e5, t1), g, t3);
    CHECK(std::abs(a + b - c) < 1e-9);
  }
  SUBCASE("time ordering") {
    try {
      accrued_phase(atom, z_mode(1.3e5, 2e-6), off, 1e-6);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kTimeOrder);
    }
  }
}

TEST_CASE("collective overlap") {
  SUBCASE("unity at creation") {
    const auto atoms = cloud(1000, 1e-3, 100e-6, 1);
    const GradientWaveform g({{0.0, 0.1}}, 0.0, kGamma);
    CHECK(collective_overlap(atoms, z_mode(1.3e5, 2e-6), g, ClassMixture::two_class(0.3, 0.5, 1e5), 2e-6) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("two-class beat by complex arithmetic") {
    const auto atoms = cloud(10, 1e-3, 100e-6, 1);
    const double omega = 2.0 * 3.14159265358979323846 * 50e3;
    const GradientWaveform off = GradientWaveform::off(kGamma);
    const ClassMixture mix({{0.8, 1.0, 0.0}, {0.2, 1.0, omega}});
    for (double t : {0.0, 3e-6, 10e-6, 17e-6}) {
      const double expected = std::norm(0.8 + 0.2 * std::exp(std::complex<double>(0.0, omega * t)));
      CHECK(collective_overlap(atoms, z_mode(), off, mix, t, MotionModel::kStatic) ==
            doctest::Approx(expected).epsilon(1e-12));
    }
    // extremes 0.36 and 1
    CHECK(collective_overlap(atoms, z_mode(), off, mix, 10e-6, MotionModel::kStatic) ==
          doctest::Approx(0.36).epsilon(1e-12));
  }
  SUBCASE("empty ensemble") {
    std::vector<AtomSample> none;
    CHECK_THROWS_AS(collective_overlap(none, z_mode(), GradientWaveform::off(kGamma), ClassMixture::single(), 0.0),
                    Error);
  }
  SUBCASE("finite-N matches the Gaussian limit") {
    EnsembleModel model;
    model.atom_count = 50000;
    model.rng_seed = 3;
    const auto atoms = sample_ensemble(model);
    const GradientWaveform g({{0.0, 0.02}, {3e-6, -0.02}}, 1e-6, kGamma);
    const OverlapEvaluator ev(atoms, z_mode(), ClassMixture::single());
    for (double t : {1e-6, 4e-6, 6.5e-6, 20e-6}) {
      const OverlapEstimate e = ev.estimate_at(g, t);
      const double limit = gaussian_ensemble_overlap(model, z_mode(), g, ClassMixture::single(), t);
      CHECK(std::abs(e.value - limit) < 4.0 * e.standard_error + 1.0 / model.atom_count);
    }
  }
}

TEST_CASE("rephasing time") {
  SUBCASE("ideal reversal at 3 us") {
    const GradientWaveform g({{0.0, 0.1}, {3e-6, -0.1}}, 0.0, kGamma);
    CHECK(solve_rephasing_time(g, 3e-6, 20e-6) == doctest::Approx(6e-6).epsilon(1e-9));
  }
  SUBCASE("asymmetric reversal to -2 G0") {
    const GradientWaveform g({{0.0, 0.1}, {3e-6, -0.2}}, 0.0, kGamma);
    CHECK(solve_rephasing_time(g, 3e-6, 20e-6) == doctest::Approx(4.5e-6).epsilon(1e-9));
  }
  SUBCASE("coil response delays the echo") {
    const GradientWaveform g({{0.0, 1.0}, {3e-6, -1.0}}, 2e-6, kGamma);
    const double t = solve_rephasing_time(g, 3e-6, 30e-6);
    CHECK(t > 6e-6);
    // root of the trapezoid-integrated area; frozen from the closed-form
    // segments evaluated at 30 digits
    CHECK(std::abs(t - 7.653028976518297e-06) < 1e-9);
  }
  SUBCASE("no root") {
    const GradientWaveform g({{0.0, 0.1}}, 0.0, kGamma);
    try {
      solve_rephasing_time(g, 1e-6, 20e-6);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNoRoot);
    }
  }
  SUBCASE("independent of atom positions") {
    const GradientWaveform g({{0.0, 0.1}, {3e-6, -0.1}}, 2e-6, kGamma);
    const double t = solve_rephasing_time(g, 3e-6, 30e-6);
    for (double scale : {0.1, 1.0, 37.0}) {
      AtomSample atom;
      atom.position = Vec3(0, 0, scale * 1e-3);
      CHECK(std::abs(accrued_phase(atom, z_mode(), g, t, 1.0, MotionModel::kStatic)) < 1e-6);
    }
  }
}

TEST_CASE("echo at twice the reversal time") {
  const auto atoms = cloud(10000, 1e-3, 100e-6, 9);
  const GradientWaveform g({{0.0, 0.1}, {3e-6, -0.1}}, 0.0, kGamma);
  const double o = collective_overlap(atoms, z_mode(), g, ClassMixture::single(), 6e-6, MotionModel::kStatic);
  CHECK(o == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(collective_overlap(atoms, z_mode(), g, ClassMixture::single(), 4e-6, MotionModel::kStatic) < 0.01);
}

TEST_CASE("retrieval efficiency curve") {
  const auto atoms = cloud(100, 1e-3, 100e-6, 2);
  const std::vector<double> times{0.0, 10e-6, 50e-6};
  const auto flat = retrieval_efficiency_curve(atoms, z_mode(), GradientWaveform::off(kGamma), ClassMixture::single(),
                                               times, 0.3, std::numeric_limits<double>::infinity(),
                                               MotionModel::kStatic);
  for (double e : flat) CHECK(e == doctest::Approx(0.3));
  const auto decayed = retrieval_efficiency_curve(atoms, z_mode(), GradientWaveform::off(kGamma),
                                                  ClassMixture::single(), times, 0.3, 50e-6, MotionModel::kStatic);
  CHECK(decayed[2] == doctest::Approx(0.3 * std::exp(-1.0)));
  const std::vector<double> backwards{2e-6, 1e-6};
  CHECK_THROWS_AS(retrieval_efficiency_curve(atoms, z_mode(), GradientWaveform::off(kGamma), ClassMixture::single(),
                                             backwards, 0.3),
                  Error);
}

TEST_CASE("doppler decay of the Gaussian limit") {
  EnsembleModel model;
  model.temperature = 100e-6;
  const double sigma_v = model.velocity_sigma();
  const double dk = 1.3e5;
  for (double t : {10e-6, 50e-6}) {
    const double o = gaussian_ensemble_overlap(model, z_mode(dk), GradientWaveform::off(kGamma), ClassMixture::single(), t);
    CHECK(o == doctest::Approx(std::exp(-std::pow(dk * sigma_v * t, 2))).epsilon(1e-12));
  }
}
