#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "pseudochain/common/error.hpp"
#include "pseudochain/privacy/dope.hpp"

using namespace pseudochain;

namespace {

// Adaptive trapezoid with relative tolerance; test-side integration oracle.
double adaptive_trapezoid(const std::function<double(double)>& f, double lo, double hi,
                          double rel_tol = 1e-8) {
  std::function<double(double, double, double, double, double, int)> rec =
      [&](double a, double b, double fa, double fb, double whole, int depth) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        const double left = 0.5 * (m - a) * (fa + fm);
        const double right = 0.5 * (b - m) * (fm + fb);
        const double refined = left + right;
        // Richardson step: trapezoid error shrinks by 4 per halving.
        if (depth > 40 ||
            std::abs(refined - whole) <= 3.0 * rel_tol * std::max(std::abs(refined), 1e-12)) {
          return refined + (refined - whole) / 3.0;
        }
        return rec(a, m, fa, fm, left, depth + 1) + rec(m, b, fm, fb, right, depth + 1);
      };
  const double fa = f(lo);
  const double fb = f(hi);
  return rec(lo, hi, fa, fb, 0.5 * (hi - lo) * (fa + fb), 0);
}

const TrackingBounds kBounds{1.0 / 160.0, 1.0 / 10.0};

}  // namespace

TEST_CASE("entropy gain") {
  CHECK(entropy_gain(0.5) == doctest::Approx(1.0));
  CHECK(entropy_gain(1.0) == 0.0);
  CHECK(entropy_gain(1.0 / 160.0) == doctest::Approx(7.321928094887362).epsilon(1e-12));
  CHECK_THROWS_AS(entropy_gain(0.0), Error);
  CHECK_THROWS_AS(entropy_gain(1.5), Error);
  CHECK_THROWS_AS(entropy_gain(-0.1), Error);
}

TEST_CASE("instantaneous DoPE") {
  CHECK(instantaneous_dope(3.0, 3.0, 0.1) == doctest::Approx(entropy_gain(0.1)).epsilon(1e-12));
  CHECK(instantaneous_dope(1e3, 0.0, 0.1) == doctest::Approx(-1.0));
  // 4.321928.../e - 1 evaluated at 50 digits.
  CHECK(instantaneous_dope(1.0, 0.0, 0.1) == doctest::Approx(0.5899484923).epsilon(1e-9));
  CHECK_THROWS_AS(instantaneous_dope(1.0, 2.0, 0.1), Error);
  CHECK_THROWS_AS(instantaneous_dope(1.0, 0.0, 0.0), Error);
}

TEST_CASE("boundary identity holds for random p") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> p(1e-6, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double pi = p(rng);
    CHECK(std::abs(instantaneous_dope(5.0, 5.0, pi) - entropy_gain(pi)) <= 1e-12);
  }
}

TEST_CASE("interval area") {
  CHECK(interval_area(0.0, 0.3) == 0.0);
  CHECK(interval_area(1.0, 0.5) == doctest::Approx(0.2642411177).epsilon(1e-9));
  const double oracle = adaptive_trapezoid(
      [](double t) { return instantaneous_dope(t, 0.0, 0.5); }, 0.0, 1.0);
  CHECK(interval_area(1.0, 0.5) == doctest::Approx(oracle).epsilon(1e-7));
  CHECK(interval_area(10.0, kBounds.b) < 0.0);
  CHECK(interval_area(10.0, kBounds.b) == doctest::Approx(-5.678268).epsilon(1e-6));
  CHECK_THROWS_AS(interval_area(-1.0, 0.5), Error);
}

TEST_CASE("interval area matches numeric integration on random (X, p)") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> X(0.0, 10.0);
  std::uniform_real_distribution<double> P(kBounds.a, kBounds.b);
  for (int i = 0; i < 200; ++i) {
    const double x = X(rng);
    const double p = P(rng);
    const double oracle =
        adaptive_trapezoid([&](double t) { return instantaneous_dope(t, 0.0, p); }, 0.0, x);
    const double q = interval_area(x, p);
    CHECK(std::abs(q - oracle) <= 1e-6 * std::max(std::abs(oracle), 1e-6));
  }
}

TEST_CASE("closed-form time average") {
  CHECK(time_average_dope(2.0, kBounds) == doctest::Approx(2.6653043127).epsilon(1e-9));
  CHECK(time_average_dope(1.0, kBounds) == doctest::Approx(1.7489782346).epsilon(1e-9));
  CHECK(time_average_dope(1e-9, kBounds) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK_THROWS_AS(time_average_dope(0.0, kBounds), Error);
  CHECK_THROWS_AS(time_average_dope(1.0, TrackingBounds{0.2, 0.1}), Error);
}

TEST_CASE("time average is increasing in lambda and decreasing in b") {
  double prev = -2.0;
  for (double lam = 0.05; lam < 20.0; lam *= 1.3) {
    const double h = time_average_dope(lam, kBounds);
    CHECK(h > prev);
    prev = h;
  }
  prev = 1e9;
  for (double b = 0.01; b <= 1.0; b += 0.01) {
    const double h = time_average_dope(1.5, TrackingBounds{0.005, b});
    CHECK(h < prev);
    prev = h;
  }
}

TEST_CASE("Monte Carlo agrees with the closed form at 1e6 events") {
  for (double lam : {0.5, 1.0, 2.0}) {
    CAPTURE(lam);
    auto est = simulate_dope(lam, kBounds, 1e6 / lam, 2024);
    const double closed = time_average_dope(lam, kBounds);
    CHECK(est.events >= 990000);
    CHECK(std::abs(est.area_estimate - closed) / std::abs(closed) <= 0.01);
    CHECK(est.integral_estimate == doctest::Approx(est.area_estimate).epsilon(1e-9));
  }
}

TEST_CASE("deterministic event stream averages to Q(1, 0.5)") {
  std::vector<ChangeEvent> events;
  for (int i = 0; i < 1000; ++i) events.push_back({static_cast<double>(i), 0.5});
  CHECK(average_dope_area(events, 1000.0) == doctest::Approx(0.2642411177).epsilon(1e-9));
  CHECK(average_dope_integral(events, 1000.0) == doctest::Approx(0.2642411177).epsilon(1e-9));
}

TEST_CASE("simulation is bit-identical for a fixed seed") {
  auto a = simulate_dope(2.0, kBounds, 1e4, 9);
  auto b = simulate_dope(2.0, kBounds, 1e4, 9);
  CHECK(a.area_estimate == b.area_estimate);
  CHECK(a.integral_estimate == b.integral_estimate);
  CHECK(a.events == b.events);
  auto proc = sample_process(2.0, kBounds, 1e3, 9);
  CHECK_NOTHROW(proc.validate());
}
