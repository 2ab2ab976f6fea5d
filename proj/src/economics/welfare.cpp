#include "pseudochain/economics/welfare.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "pseudochain/common/error.hpp"

namespace pseudochain {

void EconomicParams::validate() const {
  for (double v : {epsilon, beta, delta, p0, g, c, h, r}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kConfigError, "economic costs must be finite and >= 0");
    }
  }
  if (!(c > 0.0 && c < p0)) throw Error(ErrorCode::kConfigError, "need 0 < c < p0");
  if (g_max < 0) throw Error(ErrorCode::kConfigError, "g_max must be >= 0");
  if (!(theta_per_s > 0.0) || !(slot_seconds > 0.0)) {
    throw Error(ErrorCode::kConfigError, "theta and slot length must be > 0");
  }
  if (vmu_counts.empty() || vmu_counts.size() != demand_means.size()) {
    throw Error(ErrorCode::kConfigError,
                "vmu_counts and demand_means must be non-empty and equal length");
  }
  for (int i : vmu_counts) {
    if (i < 0) throw Error(ErrorCode::kConfigError, "VMU counts must be >= 0");
  }
  for (double m : demand_means) {
    if (!(m >= 0.0)) throw Error(ErrorCode::kConfigError, "demand means must be >= 0");
  }
}

SlotOutcome slot_welfare(const EconomicParams& params, double hbar, int D, int G,
                         int vmus) {
  return slot_welfare(params, hbar, D, G, vmus, params.c);
}

SlotOutcome slot_welfare(const EconomicParams& params, double hbar, int D, int G,
                         int vmus, double comm_cost) {
  if (D < 0 || G < 0 || vmus < 0) {
    throw Error(ErrorCode::kInvalidArgument, "D, G and I must be >= 0");
  }
  if (G > params.g_max) {
    throw Error(ErrorCode::kCapViolation,
                fmt::format("G = {} exceeds g_max = {}", G, params.g_max));
  }
  SlotOutcome out;
  out.D = D;
  out.G = G;
  out.R = std::min(D, G);
  out.vmu_total_utility =
      -vmus * params.epsilon + (params.beta * hbar - params.delta) * out.R;
  out.lmm_utility = -params.g * G + (params.p0 - comm_cost) * out.R -
                    params.h * std::max(G - D, 0) - params.r * std::max(D - G, 0);
  out.social_welfare = out.vmu_total_utility + out.lmm_utility;
  return out;
}

double poisson_pmf(int k, double mean) {
  if (k < 0) return 0.0;
  if (mean == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(k * std::log(mean) - mean - std::lgamma(k + 1.0));
}

double poisson_cdf(int k, double mean) {
  if (k < 0) return 0.0;
  double sum = 0.0;
  for (int i = 0; i <= k; ++i) sum += poisson_pmf(i, mean);
  return std::min(sum, 1.0);
}

DemandModel DemandModel::deterministic(int d) {
  if (d < 0) throw Error(ErrorCode::kInvalidArgument, "demand must be >= 0");
  DemandModel m;
  m.deterministic_ = true;
  m.mean_ = d;
  return m;
}

DemandModel DemandModel::poisson(double mean) {
  if (!(mean >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "mean must be >= 0");
  DemandModel m;
  m.deterministic_ = false;
  m.mean_ = mean;
  return m;
}

double DemandModel::cdf(int k) const {
  if (deterministic_) return k >= static_cast<int>(mean_) ? 1.0 : 0.0;
  return poisson_cdf(k, mean_);
}

int DemandModel::sample(Rng& rng) const {
  if (deterministic_ || mean_ == 0.0) return static_cast<int>(mean_);
  return std::poisson_distribution<int>(mean_)(rng);
}

double critical_ratio(const EconomicParams& params, double hbar) {
  const double privacy = params.beta * hbar - params.delta;
  const double margin = params.p0 - params.c + params.r;
  return (margin - params.g + privacy) / (margin + params.h + privacy);
}

int optimal_generation(const EconomicParams& params, double hbar,
                       const DemandModel& demand) {
  const double ratio = critical_ratio(params, hbar);
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error(ErrorCode::kDegenerateRatio,
                fmt::format("critical ratio {:.6f} outside (0, 1)", ratio));
  }
  double F = 0.0;
  for (int G = 0; G <= params.g_max; ++G) {
    F = demand.is_deterministic() ? demand.cdf(G) : F + poisson_pmf(G, demand.mean());
    if (F >= ratio) return G;
  }
  return params.g_max;
}

namespace {

WelfareEstimate summarize(const std::vector<double>& values) {
  WelfareEstimate est;
  est.samples = values.size();
  est.mean = std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - est.mean) * (v - est.mean);
    const double var = ss / static_cast<double>(values.size() - 1);
    est.stderr_ = std::sqrt(var / static_cast<double>(values.size()));
  }
  return est;
}

std::vector<int> draw_demands(const DemandModel& demand, std::size_t n,
                              std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n_samples must be >= 1");
  Rng rng = make_rng(seed, "demand");
  std::vector<int> out(n);
  for (auto& d : out) d = demand.sample(rng);
  return out;
}

}  // namespace

WelfareEstimate expected_welfare(const EconomicParams& params, double hbar, int G,
                                 const DemandModel& demand, int vmus,
                                 std::size_t n_samples, std::uint64_t seed) {
  std::vector<double> sw;
  sw.reserve(n_samples);
  for (int D : draw_demands(demand, n_samples, seed)) {
    sw.push_back(slot_welfare(params, hbar, D, G, vmus).social_welfare);
  }
  return summarize(sw);
}

BruteForceResult brute_force_optimum(const EconomicParams& params, double hbar,
                                     const DemandModel& demand, int vmus, int g_lo,
                                     int g_hi, std::size_t n_samples,
                                     std::uint64_t seed) {
  if (g_lo < 0 || g_hi < g_lo) throw Error(ErrorCode::kInvalidArgument, "bad G range");
  const std::vector<int> demands = draw_demands(demand, n_samples, seed);
  BruteForceResult out;
  std::vector<double> sw(demands.size());
  for (int G = g_lo; G <= g_hi; ++G) {
    for (std::size_t i = 0; i < demands.size(); ++i) {
      sw[i] = slot_welfare(params, hbar, demands[i], G, vmus).social_welfare;
    }
    out.grid.push_back(G);
    out.curve.push_back(summarize(sw));
    if (out.curve.size() == 1 || out.curve.back().mean > out.curve[out.argmax - g_lo].mean) {
      out.argmax = G;
    }
  }
  return out;
}

bool ConstraintReport::ok() const {
  return std::none_of(items.begin(), items.end(),
                      [](const ConstraintViolation& v) { return !v.warning; });
}

bool ConstraintReport::has(const std::string& constraint) const {
  return std::any_of(items.begin(), items.end(), [&](const ConstraintViolation& v) {
    return v.constraint == constraint;
  });
}

ConstraintReport validate_constraints(const EconomicParams& params, double hbar,
                                      std::span<const int> generation) {
  ConstraintReport rep;
  long total = 0;
  for (std::size_t j = 0; j < generation.size(); ++j) {
    const int G = generation[j];
    total += G;
    if (G < 0 || G > params.g_max) {
      rep.items.push_back({"g_max", fmt::format("G[{}] = {} outside [0, {}]", j, G,
                                                params.g_max)});
    }
  }
  if (total > params.slot_cap()) {
    rep.items.push_back(
        {"theta", fmt::format("sum G = {} exceeds {:g}", total, params.slot_cap())});
  }
  if (!(params.c > 0.0 && params.c < params.p0)) {
    rep.items.push_back({"c", fmt::format("c = {:g} not in (0, p0 = {:g})", params.c,
                                          params.p0)});
  }
  const double privacy = params.beta * hbar;
  if (!(params.delta > 0.0 && params.delta < privacy)) {
    rep.items.push_back({"delta",
                         fmt::format("delta = {:g} not in (0, beta*H = {:.5f})",
                                     params.delta, privacy),
                         true});
  }
  return rep;
}

}  // namespace pseudochain
