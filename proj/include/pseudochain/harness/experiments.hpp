#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pseudochain/harness/config.hpp"

namespace pseudochain {

struct MetricPoint {
  double x = 0.0;
  double y = 0.0;
  double stderr_ = 0.0;
  std::string label;  // categorical x (method, table row, ...)
};

struct MetricSeries {
  std::string name;
  std::vector<MetricPoint> points;
};

struct MetricsRecord {
  std::string experiment;
  std::deque<MetricSeries> series;  // deque: add_series references stay valid
  std::uint64_t seed = 0;
  std::string config_digest;
  std::vector<std::string> warnings;

  MetricSeries& add_series(std::string name);
  const MetricSeries* find(const std::string& name) const;
};

enum class OutputFormat { kCsv, kJson };

// CSV: "# key=value" metadata lines, then experiment,series,label,x,y,stderr.
void write_metrics(std::ostream& os, const MetricsRecord& record, OutputFormat format);

// Consensus time vs miners per chain layout, commit time vs transaction
// count, and the per-request delay table.
std::vector<MetricsRecord> run_chain_benchmark(const ExperimentConfig& config);

struct ProtocolRun {
  MetricsRecord metrics;
  ScenarioResult result;
};
ProtocolRun run_protocol_simulation(const ExperimentConfig& config);

struct MethodRun {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<EpisodeStats> curve;
  double final_mean = 0.0;
  double wall_seconds = 0.0;
};

struct TrainingRun {
  std::vector<MethodRun> runs;  // every method for every training seed
  std::vector<std::vector<Mlp>> policies;  // trained actors per seed
  MetricsRecord summary;  // final-window mean per method and seed
  std::uint64_t cap_violations = 0;
  std::uint64_t cap_violations_with_reward = 0;
  std::uint64_t invalid_distributions = 0;
};
// observer sees every step of every method (training and baselines).
TrainingRun run_training_eval(const ExperimentConfig& config,
                              const StepObserver& observer = {});

// Episode means of a controller over eval.episodes evaluation episodes.
struct EvalSummary {
  std::string method;
  double mean = 0.0;
  double stderr_ = 0.0;
};
std::vector<EvalSummary> evaluate_methods(const ExperimentConfig& config,
                                          const std::vector<Mlp>* mappo_actors);

enum class SweepKind { kLambda, kDelta };

struct SweepRow {
  std::string param;
  double value = 0.0;
  std::string method;
  double mean_sw = 0.0;
  double stderr_ = 0.0;
  std::vector<int> g_star;  // oracle generation vector at this point
  std::string warning;      // constraint warnings, ';'-joined
};

struct SweepResult {
  SweepKind kind = SweepKind::kLambda;
  std::vector<SweepRow> rows;
  MetricsRecord metrics;  // one series per method, x = grid value
};

// Trains MAPPO (if enabled) and evaluates every method at each grid point.
SweepResult sweep_and_export(const ExperimentConfig& config, SweepKind kind);
// Columns: param,value,method,mean_SW,stderr,G_star,warning.
void write_sweep_csv(std::ostream& os, const SweepResult& result);

// Monte Carlo versus closed-form time-average DoPE.
MetricsRecord run_dope_benchmark(const ExperimentConfig& config);
// Analytic G* against the brute-force Monte Carlo argmax per metaverse.
MetricsRecord run_newsvendor_benchmark(const ExperimentConfig& config);

void write_curves_csv(std::ostream& os, const TrainingRun& run, const std::string& digest);

}  // namespace pseudochain
