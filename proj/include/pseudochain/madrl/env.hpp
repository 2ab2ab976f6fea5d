#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "pseudochain/common/rng.hpp"
#include "pseudochain/economics/welfare.hpp"
#include "pseudochain/privacy/dope.hpp"

namespace pseudochain {

struct EnvConfig {
  EconomicParams economics;
  double lambda_per_min = 2.0;  // pseudonym change rate feeding H-bar
  TrackingBounds bounds;
  int steps = 120;    // T
  int history = 3;    // L
  double comm_cost_max = 0.2;  // c ~ U[0, comm_cost_max]
  bool deterministic_demand = false;  // demand fixed at the rounded means
  bool warmup = true;  // L unrewarded random slots before the first step

  void validate() const;
  int agents() const { return economics.metaverses(); }
  int actions() const { return economics.g_max + 1; }
  int obs_width() const { return 3 * history; }
  double hbar() const;
  DemandModel demand(int j) const;
};

struct SlotFeatures {
  double c = 0.0;
  double overproduction = 0.0;  // G - D
  double demand = 0.0;
};

struct StepRecord {
  int t = 0;
  std::vector<int> G;
  std::vector<int> D;
  std::vector<double> c;
  std::vector<double> welfare;  // per-agent SW
  double reward = 0.0;          // team reward, zero when the cap binds
  bool cap_exceeded = false;
};

using JointObservation = std::vector<std::vector<double>>;  // [agent][3L]

// Multi-LMM pseudonym generation environment. Each step draws demand and
// overhead per metaverse, scores every LMM with the slot welfare, and pays
// the team the sum unless the joint generation exceeds the slot cap.
class PseudonymGenEnv {
 public:
  explicit PseudonymGenEnv(EnvConfig config);

  const EnvConfig& config() const { return config_; }
  double hbar() const { return hbar_; }

  JointObservation reset(std::uint64_t seed);
  // Throws InvalidAction on a wrong arity or an action outside {0..g_max}.
  StepRecord step(std::span<const int> actions);
  bool done() const { return t_ >= config_.steps; }
  int time() const { return t_; }

  JointObservation observe() const;
  // Min-max normalized window of agent j, oldest slot first.
  std::vector<double> observe(int j) const;
  // Team rewards of the warm-up slots (never part of an episode return).
  const std::vector<double>& warmup_rewards() const { return warmup_rewards_; }

 private:
  StepRecord advance(std::span<const int> actions);

  EnvConfig config_;
  double hbar_ = 0.0;
  std::vector<DemandModel> demand_;
  Rng rng_;
  int t_ = 0;
  std::vector<std::deque<SlotFeatures>> window_;
  std::vector<double> warmup_rewards_;
  double d_hi_ = 1.0;
};

}  // namespace pseudochain
