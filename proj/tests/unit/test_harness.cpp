#include <doctest.h>

#include <sstream>
#include <string>

#include "json.hpp"
#include "pseudochain/common/error.hpp"
#include "pseudochain/harness/experiments.hpp"

using namespace pseudochain;
using nlohmann::json;

namespace {

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInvalidArgument;
}

ExperimentConfig tiny() {
  return config_from_json(json::parse(R"({
    "economics": {"vmu_counts": [8, 7, 6]},
    "protocol": {"slots": 4, "traceability_samples": 10},
    "train": {"episodes": 3, "steps": 24, "epochs": 2, "hidden": 16},
    "train_seeds": [0, 1],
    "eval": {"episodes": 3, "final_window": 2},
    "genetic": {"population": 6, "generations": 3},
    "sweep": {"lambdas": [1.25, 2.0], "deltas": [0.5]},
    "dope": {"lambdas": [2.0], "events": 20000},
    "newsvendor": {"samples": 2000, "g_lo": 80, "g_hi": 120}
  })"));
}

const MetricPoint& point(const MetricsRecord& r, const std::string& series, std::size_t i) {
  const MetricSeries* s = r.find(series);
  REQUIRE(s != nullptr);
  REQUIRE(i < s->points.size());
  return s->points[i];
}

}  // namespace

TEST_CASE("config defaults round-trip through JSON") {
  const ExperimentConfig def;
  const ExperimentConfig back = config_from_json(to_json(def));
  CHECK(to_json(back) == to_json(def));
  CHECK(config_digest(back) == config_digest(def));
  CHECK(config_digest(def).size() == 64);
  CHECK(def.economics.vmu_counts == std::vector<int>{80, 70, 60});
  CHECK(def.train.clip_mode == ClipMode::kStandard);
  CHECK(to_json(def)["train"]["encoding"] == "scalar");
}

TEST_CASE("config overrides, digest sensitivity and rejection") {
  const ExperimentConfig c = config_from_json(json::parse(R"({"seed": 9, "train": {"clip_mode": "literal"}})"));
  CHECK(c.seed == 9);
  CHECK(c.train.clip_mode == ClipMode::kLiteral);
  CHECK(c.train.episodes == 500);
  CHECK(config_digest(c) != config_digest(ExperimentConfig{}));

  CHECK(code_of([] { config_from_json(json::parse(R"({"sed": 1})")); }) == ErrorCode::kConfigError);
  CHECK(code_of([] { config_from_json(json::parse(R"({"train": {"epoch": 1}})")); }) ==
        ErrorCode::kConfigError);
  CHECK(code_of([] { config_from_json(json::parse(R"({"seed": "x"})")); }) ==
        ErrorCode::kConfigError);
  CHECK(code_of([] { config_from_json(json::parse(R"({"chain": {"miners": [3]}})")); }) ==
        ErrorCode::kConfigError);
  CHECK(code_of([] { config_from_json(json::parse(R"({"train_seeds": []})")); }) ==
        ErrorCode::kConfigError);
  CHECK(code_of([] { config_from_json(json::parse("[1]")); }) == ErrorCode::kConfigError);
  CHECK(code_of([] { load_config("/nonexistent/config.json"); }) == ErrorCode::kConfigError);
}

TEST_CASE("chain benchmark reproduces the delay table and scaling shape") {
  const auto records = run_chain_benchmark(ExperimentConfig{});
  REQUIRE(records.size() == 3);
  const MetricsRecord& miners = records[0];
  for (const auto& s : miners.series) {
    for (std::size_t i = 1; i < s.points.size(); ++i) {
      CHECK(s.points[i].y > s.points[i - 1].y);
    }
  }
  const MetricsRecord& load = records[1];
  const auto& red = load.find("reduction_s7")->points;
  CHECK(red.back().y > red.front().y);
  CHECK(point(load, "speedup_s3", 1).y < point(load, "speedup_s5", 1).y);
  CHECK(point(load, "speedup_s5", 1).y < point(load, "speedup_s7", 1).y);

  const MetricsRecord& delay = records[2];
  CHECK(point(delay, "total_ms", 0).y == doctest::Approx(107.0));
  CHECK(point(delay, "total_ms", 1).y == doctest::Approx(78.0));
  CHECK(point(delay, "total_ms", 2).y == doctest::Approx(863.0));
  CHECK(point(delay, "crypto_ms", 1).y == doctest::Approx(7.0));
  CHECK(point(delay, "chain_ms", 0).y == doctest::Approx(28.0));
}

TEST_CASE("metrics writers") {
  MetricsRecord r;
  r.experiment = "x";
  r.config_digest = "abc";
  r.warnings.push_back("w");
  r.add_series("s,1").points.push_back({1.0, 2.5, 0.1, "lbl"});
  std::ostringstream csv, js;
  write_metrics(csv, r, OutputFormat::kCsv);
  write_metrics(js, r, OutputFormat::kJson);
  CHECK(csv.str().find("# config_digest=abc") != std::string::npos);
  CHECK(csv.str().find("x,\"s,1\",lbl,1,2.5,0.1") != std::string::npos);
  const json parsed = json::parse(js.str());
  CHECK(parsed["series"][0]["points"][0]["y"] == 2.5);
  CHECK(parsed["warnings"][0] == "w");
}

TEST_CASE("protocol simulation passes the audit") {
  const ProtocolRun run = run_protocol_simulation(tiny());
  CHECK(run.result.audit.passed());
  CHECK(point(run.metrics, "audit", 14).label == "passed");
  CHECK(point(run.metrics, "audit", 14).y == 1.0);
  CHECK(point(run.metrics, "delay_ms", 0).y == doctest::Approx(78.0));
}

TEST_CASE("training evaluation covers every method and seed deterministically") {
  const ExperimentConfig c = tiny();
  const TrainingRun a = run_training_eval(c);
  CHECK(a.runs.size() == 10);
  CHECK(a.policies.size() == 2);
  CHECK(a.cap_violations_with_reward == 0);
  CHECK(a.invalid_distributions == 0);
  for (const auto& r : a.runs) CHECK(r.curve.size() == 3);
  const TrainingRun b = run_training_eval(c);
  std::ostringstream ca, cb;
  write_curves_csv(ca, a, "d");
  write_curves_csv(cb, b, "d");
  CHECK(ca.str() == cb.str());
  CHECK(ca.str().find("method,seed,episode,mean_reward,cap_violations,G0,G1,G2") !=
        std::string::npos);

  const auto evals = evaluate_methods(c, &a.policies[0]);
  REQUIRE(evals.size() == 5);
  CHECK(evals[0].method == "mappo");
  CHECK(evals[4].method == "oracle");
  std::vector<Mlp> wrong(2, a.policies[0][0]);
  CHECK(code_of([&] { evaluate_methods(c, &wrong); }) == ErrorCode::kConfigError);
}

TEST_CASE("sweeps flag constraint warnings and export rows") {
  ExperimentConfig c = tiny();
  c.sweep.include_mappo = false;
  const SweepResult lam = sweep_and_export(c, SweepKind::kLambda);
  CHECK(lam.rows.size() == 2 * 4);
  bool warned_low = false;
  for (const auto& r : lam.rows) {
    CHECK(r.g_star.size() == 3);
    if (r.value == 1.25 && !r.warning.empty()) warned_low = true;
  }
  CHECK(warned_low);
  std::ostringstream os;
  write_sweep_csv(os, lam);
  CHECK(os.str().find("param,value,method,mean_SW,stderr,G_star,warning") != std::string::npos);
  CHECK(os.str().find("lambda,2,oracle,") != std::string::npos);
}

TEST_CASE("DoPE and newsvendor benches") {
  const ExperimentConfig c = tiny();
  const MetricsRecord d = run_dope_benchmark(c);
  CHECK(point(d, "closed_form", 0).y == doctest::Approx(2.6653043127).epsilon(1e-9));
  CHECK(point(d, "relative_error", 0).y < 0.05);
  const MetricsRecord n = run_newsvendor_benchmark(c);
  CHECK(point(n, "analytic_g_star", 0).y == 89);
  CHECK(point(n, "analytic_g_star", 1).y == 100);
  CHECK(point(n, "analytic_g_star", 2).y == 110);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(point(n, "brute_force_g_star", j).y - point(n, "analytic_g_star", j).y) <= 3);
  }
}
