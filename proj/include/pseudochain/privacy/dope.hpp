#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pseudochain {

// Tracking probability bounds: a = 1 / max vehicles, b = 1 / min vehicles.
struct TrackingBounds {
  double a = 1.0 / 160.0;
  double b = 1.0 / 10.0;

  void validate() const;  // 0 < a < b <= 1
  bool contains(double p) const { return p >= a && p <= b; }
};

// -log2 p, in bits.
double entropy_gain(double p);

// H(t) = exp(-[t - t_prev - ln(1 - log2 p)]) - 1. Not clamped; goes
// negative for long gaps.
double instantaneous_dope(double t, double t_prev, double p);

// Integral of H over an interval of length X that began with probability p.
double interval_area(double X, double p);

// Closed-form long-run time average for Poisson changes at rate lambda
// with p ~ U[a, b].
double time_average_dope(double lambda, const TrackingBounds& bounds);

struct ChangeEvent {
  double t = 0.0;
  double p = 0.0;
};

// Poisson change process; the clock starts at t = 0 with an implicit change.
struct PrivacyProcess {
  double lambda = 1.0;
  TrackingBounds bounds;
  std::vector<ChangeEvent> events;  // strictly increasing t, p in [a, b]

  void validate() const;
};

PrivacyProcess sample_process(double lambda, const TrackingBounds& bounds,
                              double horizon, std::uint64_t seed);

// Average of H over [0, horizon] for a given event stream; events[0] is
// the change at the start of the window. The area version sums closed
// interval areas; the integral version integrates H numerically per
// interval (Gauss-Legendre), and exists to cross-check the first.
double average_dope_area(std::span<const ChangeEvent> events, double horizon);
double average_dope_integral(std::span<const ChangeEvent> events, double horizon);

struct DopeEstimate {
  double area_estimate = 0.0;
  double integral_estimate = 0.0;
  std::size_t events = 0;
  double horizon = 0.0;
};

DopeEstimate simulate_dope(double lambda, const TrackingBounds& bounds,
                           double horizon, std::uint64_t seed);

}  // namespace pseudochain
