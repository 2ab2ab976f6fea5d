#include "pseudochain/madrl/env.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pseudochain/common/error.hpp"

namespace pseudochain {

void EnvConfig::validate() const {
  economics.validate();
  bounds.validate();
  if (!(lambda_per_min > 0.0)) throw Error(ErrorCode::kConfigError, "lambda must be > 0");
  if (steps <= 0) throw Error(ErrorCode::kConfigError, "steps must be positive");
  if (history <= 0) throw Error(ErrorCode::kConfigError, "history must be positive");
  if (!(comm_cost_max >= 0.0)) throw Error(ErrorCode::kConfigError, "comm_cost_max < 0");
}

double EnvConfig::hbar() const { return time_average_dope(lambda_per_min, bounds); }

DemandModel EnvConfig::demand(int j) const {
  const double mean = economics.demand_means.at(static_cast<std::size_t>(j));
  return deterministic_demand ? DemandModel::deterministic(static_cast<int>(std::lround(mean)))
                              : DemandModel::poisson(mean);
}

PseudonymGenEnv::PseudonymGenEnv(EnvConfig config) : config_(std::move(config)) {
  config_.validate();
  hbar_ = config_.hbar();
  double max_mean = 0.0;
  for (int j = 0; j < config_.agents(); ++j) {
    demand_.push_back(config_.demand(j));
    max_mean = std::max(max_mean, config_.economics.demand_means[j]);
  }
  d_hi_ = std::max<double>(config_.economics.g_max,
                           std::ceil(max_mean + 6.0 * std::sqrt(max_mean)));
}

JointObservation PseudonymGenEnv::reset(std::uint64_t seed) {
  rng_ = make_rng(seed, "madrl-env");
  t_ = 0;
  window_.assign(static_cast<std::size_t>(config_.agents()), {});
  for (auto& w : window_) w.assign(static_cast<std::size_t>(config_.history), SlotFeatures{});
  warmup_rewards_.clear();
  if (config_.warmup) {
    std::uniform_int_distribution<int> pick(0, config_.economics.g_max);
    std::vector<int> a(static_cast<std::size_t>(config_.agents()));
    for (int k = 0; k < config_.history; ++k) {
      for (int& x : a) x = pick(rng_);
      warmup_rewards_.push_back(advance(a).reward);
    }
  }
  return observe();
}

StepRecord PseudonymGenEnv::step(std::span<const int> actions) {
  if (done()) throw Error(ErrorCode::kInvalidAction, "episode already finished");
  if (actions.size() != static_cast<std::size_t>(config_.agents())) {
    throw Error(ErrorCode::kInvalidAction,
                fmt::format("expected {} actions, got {}", config_.agents(), actions.size()));
  }
  for (int a : actions) {
    if (a < 0 || a > config_.economics.g_max) {
      throw Error(ErrorCode::kInvalidAction, fmt::format("action {} outside [0, {}]", a,
                                                         config_.economics.g_max));
    }
  }
  StepRecord rec = advance(actions);
  rec.t = t_++;
  return rec;
}

StepRecord PseudonymGenEnv::advance(std::span<const int> actions) {
  const auto& p = config_.economics;
  const int n = config_.agents();
  std::uniform_real_distribution<double> overhead(0.0, config_.comm_cost_max);
  StepRecord rec;
  rec.G.assign(actions.begin(), actions.end());
  int total = 0;
  double sw = 0.0;
  for (int j = 0; j < n; ++j) {
    const int D = demand_[j].sample(rng_);
    const double c = overhead(rng_);
    const double w = slot_welfare(p, hbar_, D, rec.G[j], p.vmu_counts[j], c).social_welfare;
    rec.D.push_back(D);
    rec.c.push_back(c);
    rec.welfare.push_back(w);
    total += rec.G[j];
    sw += w;
    window_[j].pop_front();
    window_[j].push_back({c, static_cast<double>(rec.G[j] - D), static_cast<double>(D)});
  }
  rec.cap_exceeded = total > p.slot_cap();
  rec.reward = rec.cap_exceeded ? 0.0 : sw;
  return rec;
}

std::vector<double> PseudonymGenEnv::observe(int j) const {
  const auto& w = window_.at(static_cast<std::size_t>(j));
  const double g_max = config_.economics.g_max;
  auto unit = [](double x, double lo, double hi) {
    return hi > lo ? std::clamp((x - lo) / (hi - lo), 0.0, 1.0) : 0.0;
  };
  std::vector<double> o;
  o.reserve(static_cast<std::size_t>(config_.obs_width()));
  for (const SlotFeatures& s : w) {
    o.push_back(unit(s.c, 0.0, config_.comm_cost_max));
    o.push_back(unit(s.overproduction, -d_hi_, g_max));
    o.push_back(unit(s.demand, 0.0, d_hi_));
  }
  return o;
}

JointObservation PseudonymGenEnv::observe() const {
  JointObservation out;
  for (int j = 0; j < config_.agents(); ++j) out.push_back(observe(j));
  return out;
}

}  // namespace pseudochain
