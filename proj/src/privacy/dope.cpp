#include "pseudochain/privacy/dope.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "pseudochain/common/error.hpp"
#include "pseudochain/common/rng.hpp"

namespace pseudochain {

namespace {

void check_probability(double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::kDomainError, "probability must be in (0, 1], got " +
                                             std::to_string(p));
  }
}

// 16-point Gauss-Legendre nodes and weights on [-1, 1], positive half.
constexpr std::array<double, 8> kGlNodes = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
    0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
    0.9445750230732326, 0.9894009349916499};
constexpr std::array<double, 8> kGlWeights = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
    0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
    0.0622535239386479, 0.0271524594117541};

double integrate_h(double X, double p) {
  // Split so that each panel spans at most one unit of decay.
  const int panels = std::max(1, static_cast<int>(std::ceil(X)));
  const double w = X / panels;
  double total = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double mid = (k + 0.5) * w;
    const double half = 0.5 * w;
    double s = 0.0;
    for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
      s += kGlWeights[i] * (instantaneous_dope(mid + half * kGlNodes[i], 0.0, p) +
                            instantaneous_dope(mid - half * kGlNodes[i], 0.0, p));
    }
    total += half * s;
  }
  return total;
}

template <typename Area>
double average_over(std::span<const ChangeEvent> events, double horizon, Area area) {
  if (events.empty()) throw Error(ErrorCode::kInvalidArgument, "no events");
  if (!(horizon > events.back().t)) {
    throw Error(ErrorCode::kInvalidArgument, "horizon must exceed the last event");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const double end = i + 1 < events.size() ? events[i + 1].t : horizon;
    sum += area(end - events[i].t, events[i].p);
  }
  return sum / (horizon - events.front().t);
}

}  // namespace

void TrackingBounds::validate() const {
  if (!(a > 0.0 && a < b && b <= 1.0)) {
    throw Error(ErrorCode::kDomainError, "tracking bounds need 0 < a < b <= 1");
  }
}

double entropy_gain(double p) {
  check_probability(p);
  return -std::log2(p);
}

double instantaneous_dope(double t, double t_prev, double p) {
  check_probability(p);
  if (!(t >= t_prev)) throw Error(ErrorCode::kDomainError, "t precedes t_prev");
  return std::exp(-(t - t_prev - std::log(1.0 - std::log2(p)))) - 1.0;
}

double interval_area(double X, double p) {
  check_probability(p);
  if (!(X >= 0.0)) throw Error(ErrorCode::kDomainError, "interval length must be >= 0");
  return -std::expm1(-X) * (1.0 - std::log2(p)) - X;
}

double time_average_dope(double lambda, const TrackingBounds& bounds) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kDomainError, "lambda must be > 0");
  }
  bounds.validate();
  const double a = bounds.a;
  const double b = bounds.b;
  const double mean_gain =
      1.0 / std::numbers::ln2 - (b * std::log2(b) - a * std::log2(a)) / (b - a);
  return lambda / (lambda + 1.0) * (1.0 + mean_gain) - 1.0;
}

void PrivacyProcess::validate() const {
  if (!(lambda > 0.0)) throw Error(ErrorCode::kDomainError, "lambda must be > 0");
  bounds.validate();
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!bounds.contains(events[i].p)) {
      throw Error(ErrorCode::kDomainError, "event probability outside [a, b]");
    }
    if (i > 0 && !(events[i].t > events[i - 1].t)) {
      throw Error(ErrorCode::kDomainError, "event times must strictly increase");
    }
  }
}

PrivacyProcess sample_process(double lambda, const TrackingBounds& bounds,
                              double horizon, std::uint64_t seed) {
  PrivacyProcess proc{lambda, bounds, {}};
  if (!(lambda > 0.0)) throw Error(ErrorCode::kDomainError, "lambda must be > 0");
  bounds.validate();
  if (!(horizon > 0.0)) throw Error(ErrorCode::kDomainError, "horizon must be > 0");
  Rng rng = make_rng(seed, "dope");
  std::exponential_distribution<double> gap(lambda);
  std::uniform_real_distribution<double> prob(bounds.a, bounds.b);
  double t = 0.0;
  while (t < horizon) {
    proc.events.push_back({t, prob(rng)});
    t += gap(rng);
  }
  return proc;
}

double average_dope_area(std::span<const ChangeEvent> events, double horizon) {
  return average_over(events, horizon, interval_area);
}

double average_dope_integral(std::span<const ChangeEvent> events, double horizon) {
  return average_over(events, horizon, integrate_h);
}

DopeEstimate simulate_dope(double lambda, const TrackingBounds& bounds,
                           double horizon, std::uint64_t seed) {
  PrivacyProcess proc = sample_process(lambda, bounds, horizon, seed);
  DopeEstimate est;
  est.events = proc.events.size();
  est.horizon = horizon;
  est.area_estimate = average_dope_area(proc.events, horizon);
  est.integral_estimate = average_dope_integral(proc.events, horizon);
  return est;
}

}  // namespace pseudochain
