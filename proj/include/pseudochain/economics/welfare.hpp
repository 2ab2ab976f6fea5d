#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pseudochain/common/rng.hpp"

namespace pseudochain {

struct EconomicParams {
  double epsilon = 0.1;  // request base cost per VMU
  double beta = 0.2;     // privacy profit per unit DoPE per pseudonym
  double delta = 0.5;    // routing-table update cost per change
  double p0 = 1.5;       // supply price per pseudonym
  double g = 0.2;        // generation cost
  double c = 0.1;        // mean distribution overhead
  double h = 0.1;        // storage cost per surplus pseudonym
  double r = 0.5;        // penalty per unmet unit
  double theta_per_s = 5.0;
  int g_max = 120;
  double slot_seconds = 60.0;
  std::vector<int> vmu_counts = {80, 70, 60};
  std::vector<double> demand_means = {80.0, 90.0, 100.0};

  int metaverses() const { return static_cast<int>(vmu_counts.size()); }
  double slot_cap() const { return theta_per_s * slot_seconds; }
  // Throws ConfigError on negative costs, c outside (0, p0), or shape mismatch.
  void validate() const;
};

struct SlotOutcome {
  int j = 0;
  int t = 0;
  int D = 0;
  int G = 0;
  int R = 0;  // min(D, G)
  double vmu_total_utility = 0.0;
  double lmm_utility = 0.0;
  double social_welfare = 0.0;
};

// Throws CapViolation if G > g_max, InvalidArgument on negative D or G.
SlotOutcome slot_welfare(const EconomicParams& params, double hbar, int D, int G,
                         int vmus);
// Same, with a realized per-slot overhead in place of params.c.
SlotOutcome slot_welfare(const EconomicParams& params, double hbar, int D, int G,
                         int vmus, double comm_cost);

double poisson_pmf(int k, double mean);
double poisson_cdf(int k, double mean);

class DemandModel {
 public:
  static DemandModel deterministic(int d);
  static DemandModel poisson(double mean);

  bool is_deterministic() const { return deterministic_; }
  double mean() const { return mean_; }
  double cdf(int k) const;
  int sample(Rng& rng) const;

 private:
  bool deterministic_ = true;
  double mean_ = 0.0;
};

// (p0 - c + r - g + beta*H - delta) / (p0 - c + r + h + beta*H - delta)
double critical_ratio(const EconomicParams& params, double hbar);

// Smallest G with F(G) >= ratio, clamped to [0, g_max].
// Throws DegenerateRatio when the ratio is outside (0, 1).
int optimal_generation(const EconomicParams& params, double hbar,
                       const DemandModel& demand);

struct WelfareEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t samples = 0;
};

WelfareEstimate expected_welfare(const EconomicParams& params, double hbar, int G,
                                 const DemandModel& demand, int vmus,
                                 std::size_t n_samples, std::uint64_t seed);

struct BruteForceResult {
  int argmax = 0;
  std::vector<int> grid;
  std::vector<WelfareEstimate> curve;
};

// Argmax of the Monte Carlo mean welfare over [g_lo, g_hi], sharing one set
// of demand draws across G. Ties go to the smaller G.
BruteForceResult brute_force_optimum(const EconomicParams& params, double hbar,
                                     const DemandModel& demand, int vmus, int g_lo,
                                     int g_hi, std::size_t n_samples,
                                     std::uint64_t seed);

struct ConstraintViolation {
  std::string constraint;
  std::string detail;
  bool warning = false;  // reported but not fatal
};

struct ConstraintReport {
  std::vector<ConstraintViolation> items;

  bool ok() const;  // no non-warning violations
  bool has(const std::string& constraint) const;
};

// Per-slot Problem constraints on a proposed joint generation vector.
ConstraintReport validate_constraints(const EconomicParams& params, double hbar,
                                      std::span<const int> generation);

}  // namespace pseudochain
