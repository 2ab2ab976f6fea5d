#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "pseudochain/chain/workload.hpp"
#include "pseudochain/madrl/baselines.hpp"
#include "pseudochain/madrl/mappo.hpp"
#include "pseudochain/protocols/scenario.hpp"

namespace pseudochain {

struct ChainBenchConfig {
  ChainCalibration calibration = ChainCalibration::shipped();
  std::vector<int> subchains = {3, 5, 7};
  std::vector<int> miners = {4, 7, 10, 13};
  std::vector<int> tx_counts = {500, 1000, 1500, 2000, 2500};
  int bench_txs = 1000;
};

struct ProtocolSimConfig {
  int slots = 100;
  double change_rate_per_min = 2.0;
  double move_probability = 0.1;
  double misbehavior_probability = 0.1;
  double false_report_probability = 0.05;
  double forged_request_probability = 0.1;
  double forged_origin_probability = 0.05;
  int traceability_samples = 200;
  bool log_broadcasts = false;
};

struct EvalConfig {
  int episodes = 100;
  bool greedy_actions = true;  // argmax execution of trained actors
  int final_window = 50;       // episodes averaged for final performance
};

struct SweepConfig {
  std::vector<double> lambdas = {1.25, 1.5, 1.75, 2.0};
  std::vector<double> deltas = {0.3, 0.4, 0.5, 0.6, 0.7};
  bool include_mappo = true;
};

struct DopeBenchConfig {
  std::vector<double> lambdas = {0.5, 1.0, 2.0};
  int events = 1000000;
};

struct NewsvendorBenchConfig {
  int samples = 100000;
  int g_lo = 60;
  int g_hi = 120;
};

// Everything an experiment reads. Defaults reproduce the reference setup:
// three metaverses with I = [80, 70, 60] (economics.vmu_counts, also the
// protocol population), demand means [80, 90, 100], 10 to 160 vehicles per
// district.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  double lambda_per_min = 2.0;
  TrackingBounds bounds;
  EconomicParams economics;
  LatencyModel latency;
  ChainVerificationModel verification;
  CryptoAggregate crypto_aggregate;
  CryptoTimingModel crypto_timing;
  CrossChainTiming cross_timing;
  ChainBenchConfig chain;
  ProtocolSimConfig protocol;
  TrainConfig train;
  std::vector<std::uint64_t> train_seeds = {0, 1, 2};
  EvalConfig eval;
  GeneticConfig genetic;
  SweepConfig sweep;
  DopeBenchConfig dope;
  NewsvendorBenchConfig newsvendor;

  // Throws ConfigError.
  void validate() const;

  EnvConfig env() const;
  ScenarioConfig scenario() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
// Overrides on top of the defaults; unknown keys and type mismatches throw
// ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& overrides);
ExperimentConfig load_config(const std::string& path);

// SHA-256 (hex) of the canonical JSON dump of the full config.
std::string config_digest(const ExperimentConfig& config);

}  // namespace pseudochain
