#include <doctest.h>

#include <cmath>
#include <random>

#include "pseudochain/common/error.hpp"
#include "pseudochain/economics/welfare.hpp"
#include "pseudochain/privacy/dope.hpp"

using namespace pseudochain;

namespace {

const EconomicParams kDefaults{};
const double kH2 = 2.66530431;  // time-average DoPE at lambda = 2

// Inverse CDF by cumulative summation of the pmf written out directly.
int inverse_poisson(double mean, double ratio) {
  double term = std::exp(-mean);
  double sum = term;
  int k = 0;
  while (sum < ratio) {
    ++k;
    term *= mean / k;
    sum += term;
  }
  return k;
}

}  // namespace

TEST_CASE("slot welfare worked example") {
  auto out = slot_welfare(kDefaults, kH2, 90, 100, 70);
  // U = -0.2*100 + 1.4*90 - 0.1*10 = 105
  // VMU = -7 + (0.2*2.6653043 - 0.5)*90
  CHECK(out.R == 90);
  CHECK(out.lmm_utility == doctest::Approx(105.0));
  CHECK(out.vmu_total_utility == doctest::Approx(-4.0246).epsilon(1e-4));
  CHECK(out.social_welfare == doctest::Approx(100.9754).epsilon(1e-5));
}

TEST_CASE("slot welfare boundaries") {
  auto eq = slot_welfare(kDefaults, kH2, 50, 50, 10);
  CHECK(eq.lmm_utility == doctest::Approx(-0.2 * 50 + 1.4 * 50));
  auto none = slot_welfare(kDefaults, kH2, 90, 0, 70);
  CHECK(none.social_welfare == doctest::Approx(-70 * 0.1 - 0.5 * 90));
  CHECK_THROWS_AS(slot_welfare(kDefaults, kH2, 90, 121, 70), Error);
  try {
    slot_welfare(kDefaults, kH2, 1, 121, 1);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCapViolation);
  }
}

TEST_CASE("critical ratio and analytic optimum at lambda = 2") {
  const double ratio = critical_ratio(kDefaults, kH2);
  CHECK(ratio == doctest::Approx(1.73306086 / 2.03306086).epsilon(1e-8));
  CHECK(ratio == doctest::Approx(0.852437).epsilon(1e-5));  // rounded operands
  const int g = optimal_generation(kDefaults, kH2, DemandModel::poisson(90));
  CHECK(g == inverse_poisson(90.0, ratio));
  CHECK(g == 100);
  CHECK(optimal_generation(kDefaults, kH2, DemandModel::deterministic(77)) == 77);
}

TEST_CASE("degenerate ratio and the g_max clamp") {
  EconomicParams p = kDefaults;
  p.g = 5.0;  // numerator negative
  CHECK_THROWS_AS(optimal_generation(p, kH2, DemandModel::poisson(90)), Error);
  EconomicParams q = kDefaults;
  q.h = 0.0;
  q.g = 1e-9;  // ratio just below 1
  CHECK(optimal_generation(q, kH2, DemandModel::poisson(500)) == q.g_max);
}

TEST_CASE("brute force optimum matches the analytic optimum") {
  auto bf = brute_force_optimum(kDefaults, kH2, DemandModel::poisson(90), 70, 60, 120,
                                100000, 1);
  const int g = optimal_generation(kDefaults, kH2, DemandModel::poisson(90));
  CHECK(std::abs(bf.argmax - g) <= 1);
  CHECK(brute_force_optimum(kDefaults, kH2, DemandModel::deterministic(64), 70, 0, 120,
                            10, 1)
            .argmax == 64);
  EconomicParams unprofitable = kDefaults;
  unprofitable.r = unprofitable.h = 0.0;
  unprofitable.g = 2.0;
  CHECK(brute_force_optimum(unprofitable, kH2, DemandModel::poisson(90), 70, 0, 120,
                            2000, 1)
            .argmax == 0);
}

TEST_CASE("newsvendor agreement across a parameter grid") {
  for (double lam : {1.75, 2.0, 3.0}) {
    const double hbar = time_average_dope(lam, TrackingBounds{});
    for (double g : {0.1, 0.3}) {
      for (double h : {0.05, 0.3}) {
        for (double r : {0.2, 1.0}) {
          EconomicParams p = kDefaults;
          p.g = g;
          p.h = h;
          p.r = r;
          const double ratio = critical_ratio(p, hbar);
          if (!(ratio > 0.0 && ratio < 1.0)) continue;
          CAPTURE(lam);
          CAPTURE(ratio);
          const int gs = optimal_generation(p, hbar, DemandModel::poisson(90));
          auto bf = brute_force_optimum(p, hbar, DemandModel::poisson(90), 70, 60, 120,
                                        100000, 7);
          CHECK(std::abs(bf.argmax - gs) <= 1);
        }
      }
    }
  }
}

TEST_CASE("expected welfare: optimum beats +-10 and the curve is concave") {
  auto demand = DemandModel::poisson(90);
  const int g = optimal_generation(kDefaults, kH2, demand);
  auto at = [&](int G) {
    return expected_welfare(kDefaults, kH2, G, demand, 70, 100000, 3).mean;
  };
  CHECK(at(g) > at(g - 10));
  CHECK(at(g) > at(g + 10));

  auto bf = brute_force_optimum(kDefaults, kH2, demand, 70, 80, 110, 100000, 3);
  for (std::size_t i = 1; i + 1 < bf.curve.size(); ++i) {
    const double d2 = bf.curve[i + 1].mean - 2 * bf.curve[i].mean + bf.curve[i - 1].mean;
    CHECK(d2 <= 3.0 * bf.curve[i].stderr_);
  }
  // Unimodal: no interior strict local minimum.
  for (std::size_t i = 1; i + 1 < bf.curve.size(); ++i) {
    CHECK_FALSE((bf.curve[i].mean < bf.curve[i - 1].mean &&
                 bf.curve[i].mean < bf.curve[i + 1].mean));
  }
  auto det = expected_welfare(kDefaults, kH2, 95, DemandModel::deterministic(90), 70, 5, 1);
  CHECK(det.mean == doctest::Approx(slot_welfare(kDefaults, kH2, 90, 95, 70).social_welfare));
}

TEST_CASE("I shifts welfare additively and leaves the argmax alone") {
  auto demand = DemandModel::poisson(90);
  auto base = brute_force_optimum(kDefaults, kH2, demand, 70, 70, 120, 20000, 4);
  auto more = brute_force_optimum(kDefaults, kH2, demand, 95, 70, 120, 20000, 4);
  CHECK(base.argmax == more.argmax);
  for (std::size_t i = 0; i < base.curve.size(); ++i) {
    CHECK(more.curve[i].mean - base.curve[i].mean == doctest::Approx(-0.1 * 25));
  }
}

TEST_CASE("G* is non-decreasing in r and non-increasing in h") {
  auto demand = DemandModel::poisson(90);
  int prev = -1;
  for (double r = 0.0; r <= 3.0; r += 0.1) {
    EconomicParams p = kDefaults;
    p.r = r;
    const int g = optimal_generation(p, kH2, demand);
    CHECK(g >= prev);
    prev = g;
  }
  prev = 1000;
  for (double h = 0.0; h <= 3.0; h += 0.1) {
    EconomicParams p = kDefaults;
    p.h = h;
    const int g = optimal_generation(p, kH2, demand);
    CHECK(g <= prev);
    prev = g;
  }
}

TEST_CASE("Problem constraints") {
  const int ok[] = {100, 100, 100};
  CHECK(validate_constraints(kDefaults, kH2, ok).ok());
  CHECK(validate_constraints(kDefaults, kH2, ok).items.empty());
  const int over[] = {100, 100, 101};
  auto rep = validate_constraints(kDefaults, kH2, over);
  CHECK_FALSE(rep.ok());
  CHECK(rep.has("theta"));
  const int cap[] = {121, 0, 0};
  CHECK(validate_constraints(kDefaults, kH2, cap).has("g_max"));

  const double h125 = time_average_dope(1.25, TrackingBounds{});
  auto warn = validate_constraints(kDefaults, h125, ok);
  CHECK(warn.has("delta"));
  CHECK(warn.ok());  // a warning, not a hard failure
}

TEST_CASE("parameter validation") {
  CHECK_NOTHROW(kDefaults.validate());
  EconomicParams bad = kDefaults;
  bad.c = 2.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = kDefaults;
  bad.h = -1;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK(poisson_cdf(200, 90) == doctest::Approx(1.0));
  CHECK(poisson_pmf(0, 0.0) == 1.0);
}
