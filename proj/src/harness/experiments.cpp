#include "pseudochain/harness/experiments.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include "json.hpp"

#include "pseudochain/common/error.hpp"
#include "pseudochain/privacy/dope.hpp"

namespace pseudochain {

MetricSeries& MetricsRecord::add_series(std::string name) {
  series.push_back(MetricSeries{std::move(name), {}});
  return series.back();
}

const MetricSeries* MetricsRecord::find(const std::string& name) const {
  for (const auto& s : series) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

namespace {

std::string num(double x) { return fmt::format("{:.10g}", x); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string join_ints(const std::vector<int>& xs, char sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(xs[i]);
  }
  return out;
}

MetricsRecord new_record(const ExperimentConfig& config, std::string experiment) {
  MetricsRecord r;
  r.experiment = std::move(experiment);
  r.seed = config.seed;
  r.config_digest = config_digest(config);
  return r;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double cross_workload_ms(int subchains, int n_txs, const ConsensusConfig& sub,
                         const ConsensusConfig& relay) {
  std::vector<std::unique_ptr<ChainState>> owned;
  std::vector<ChainState*> ptrs;
  for (int k = 0; k < subchains; ++k) {
    owned.push_back(std::make_unique<ChainState>(fmt::format("SC{}", k), ChainTier::kSubchain, sub));
    ptrs.push_back(owned.back().get());
  }
  ChainState relay_chain("RC", ChainTier::kRelayChain, relay);
  return commit_workload_cross(ptrs, relay_chain, n_txs).total_ms;
}

double single_workload_ms(int n_txs, const ConsensusConfig& cfg) {
  ChainState chain("MC", ChainTier::kMainChain, cfg);
  return commit_workload_single(chain, n_txs).total_ms;
}

SystemConfig system_config(const ExperimentConfig& config, ChainMode mode) {
  SystemConfig s = config.scenario().system;
  s.mode = mode;
  return s;
}

// One exhausted pair per request kind; delays are read off the result.
DelayBreakdown measure_request(const ExperimentConfig& config, ChainMode mode, bool migrate) {
  PseudonymSystem sys(system_config(config, mode));
  const int home = 0;
  const int v = sys.create_vmu(home);
  sys.bootstrap_registration(v, home, 0.0);
  while (sys.actor(v).unused() > 0) sys.synchronous_change(v, 0.0);
  if (migrate) sys.migrate(v, (home + 1) % config.economics.metaverses(), 10.0);
  const DistributionResult res = sys.request_pseudonyms(v, 20.0);
  if (!res.replied) {
    throw Error(ErrorCode::kInvalidArgument, "benchmark request was not answered: " + res.drop_reason);
  }
  return res.delay;
}

void add_eval_point(MetricSeries& s, double x, const std::vector<EpisodeStats>& curve,
                    const std::string& label) {
  double sum = 0.0, sq = 0.0;
  for (const auto& e : curve) {
    sum += e.mean_reward;
    sq += e.mean_reward * e.mean_reward;
  }
  const double n = static_cast<double>(curve.size());
  const double mean = sum / n;
  const double var = n > 1 ? std::max(0.0, (sq - n * mean * mean) / (n - 1)) : 0.0;
  s.points.push_back({x, mean, std::sqrt(var / n), label});
}

EvalSummary summarize(const std::string& method, const std::vector<EpisodeStats>& curve) {
  MetricSeries tmp;
  add_eval_point(tmp, 0.0, curve, method);
  return {method, tmp.points[0].y, tmp.points[0].stderr_};
}

std::vector<int> oracle_vector(const EnvConfig& env) {
  return NewsvendorOracleController(env).generation();
}

}  // namespace

void write_metrics(std::ostream& os, const MetricsRecord& record, OutputFormat format) {
  if (format == OutputFormat::kJson) {
    nlohmann::json j;
    j["experiment"] = record.experiment;
    j["seed"] = record.seed;
    j["config_digest"] = record.config_digest;
    j["warnings"] = record.warnings;
    j["series"] = nlohmann::json::array();
    for (const auto& s : record.series) {
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& p : s.points) {
        pts.push_back({{"label", p.label}, {"x", p.x}, {"y", p.y}, {"stderr", p.stderr_}});
      }
      j["series"].push_back({{"name", s.name}, {"points", pts}});
    }
    os << j.dump(2) << "\n";
    return;
  }
  os << "# experiment=" << record.experiment << "\n";
  os << "# seed=" << record.seed << "\n";
  os << "# config_digest=" << record.config_digest << "\n";
  for (const auto& w : record.warnings) os << "# warning=" << w << "\n";
  os << "experiment,series,label,x,y,stderr\n";
  for (const auto& s : record.series) {
    for (const auto& p : s.points) {
      os << record.experiment << ',' << csv_field(s.name) << ',' << csv_field(p.label) << ','
         << num(p.x) << ',' << num(p.y) << ',' << num(p.stderr_) << "\n";
    }
  }
}

std::vector<MetricsRecord> run_chain_benchmark(const ExperimentConfig& config) {
  config.validate();
  const ChainCalibration& cal = config.chain.calibration;
  std::vector<MetricsRecord> out;

  // Consensus time against consortium size; every chain gets the same size.
  MetricsRecord miners = new_record(config, "chain_miners");
  {
    MetricSeries& block = miners.add_series("block_time_ms");
    for (int m : config.chain.miners) {
      ConsensusConfig c = cal.subchain;
      c.n_miners = m;
      block.points.push_back({double(m), c.block_time_ms(), 0.0, ""});
    }
    MetricSeries& single = miners.add_series("single");
    for (int m : config.chain.miners) {
      ConsensusConfig c = cal.single_chain;
      c.n_miners = m;
      single.points.push_back({double(m), single_workload_ms(config.chain.bench_txs, c), 0.0, ""});
    }
    for (int s : config.chain.subchains) {
      MetricSeries& series = miners.add_series(fmt::format("cross_s{}", s));
      for (int m : config.chain.miners) {
        ConsensusConfig sub = cal.subchain, relay = cal.relay_chain;
        sub.n_miners = m;
        relay.n_miners = m;
        series.points.push_back(
            {double(m), cross_workload_ms(s, config.chain.bench_txs, sub, relay), 0.0, ""});
      }
    }
  }
  out.push_back(std::move(miners));

  // Commit time against workload under the shipped calibration.
  MetricsRecord load = new_record(config, "chain_workload");
  {
    std::vector<double> single_ms;
    MetricSeries& single = load.add_series("single");
    for (int n : config.chain.tx_counts) {
      single_ms.push_back(single_workload_ms(n, cal.single_chain));
      single.points.push_back({double(n), single_ms.back(), 0.0, ""});
    }
    for (int s : config.chain.subchains) {
      std::vector<MetricPoint> time, speedup, reduction;
      for (std::size_t i = 0; i < config.chain.tx_counts.size(); ++i) {
        const int n = config.chain.tx_counts[i];
        const double ms = cross_workload_ms(s, n, cal.subchain, cal.relay_chain);
        time.push_back({double(n), ms, 0.0, ""});
        speedup.push_back({double(n), single_ms[i] / ms, 0.0, ""});
        reduction.push_back({double(n), 1.0 - ms / single_ms[i], 0.0, ""});
      }
      load.add_series(fmt::format("cross_s{}", s)).points = std::move(time);
      load.add_series(fmt::format("speedup_s{}", s)).points = std::move(speedup);
      load.add_series(fmt::format("reduction_s{}", s)).points = std::move(reduction);
    }
  }
  out.push_back(std::move(load));

  // Per-request delay decomposition from full protocol runs.
  MetricsRecord delays = new_record(config, "request_delay");
  {
    struct Row {
      const char* label;
      DelayBreakdown d;
    };
    const Row rows[] = {
        {"single_chain", measure_request(config, ChainMode::kSingleChain, false)},
        {"cross_chain_local", measure_request(config, ChainMode::kCrossChain, false)},
        {"cross_district", measure_request(config, ChainMode::kCrossChain, true)},
    };
    MetricSeries& crypto = delays.add_series("crypto_ms");
    MetricSeries& comm = delays.add_series("communication_ms");
    MetricSeries& chain = delays.add_series("chain_ms");
    MetricSeries& total = delays.add_series("total_ms");
    double x = 0.0;
    for (const Row& r : rows) {
      crypto.points.push_back({x, r.d.crypto_ms, 0.0, r.label});
      comm.points.push_back({x, r.d.communication_ms, 0.0, r.label});
      chain.points.push_back({x, r.d.chain_ms, 0.0, r.label});
      total.points.push_back({x, r.d.total_ms(), 0.0, r.label});
      x += 1.0;
    }
  }
  out.push_back(std::move(delays));
  return out;
}

ProtocolRun run_protocol_simulation(const ExperimentConfig& config) {
  config.validate();
  ProtocolRun run;
  run.result = run_scenario(config.scenario());
  const ScenarioResult& r = run.result;
  MetricsRecord& m = run.metrics;
  m = new_record(config, "protocol_sim");

  auto delay_point = [](const std::vector<DelayBreakdown>& ds, const char* label, double x) {
    MetricSeries tmp;
    std::vector<EpisodeStats> as_curve;
    for (const auto& d : ds) as_curve.push_back({0, d.total_ms(), {}, 0});
    if (as_curve.empty()) return MetricPoint{x, 0.0, 0.0, label};
    add_eval_point(tmp, x, as_curve, label);
    return tmp.points[0];
  };
  MetricSeries& delay = m.add_series("delay_ms");
  delay.points.push_back(delay_point(r.local_delays, "local", 0.0));
  delay.points.push_back(delay_point(r.cross_delays, "cross_district", 1.0));

  MetricSeries& dope = m.add_series("dope");
  dope.points.push_back({0.0, r.realized_dope, 0.0, "realized"});
  dope.points.push_back({1.0, r.closed_form_dope, 0.0, "closed_form"});

  const ScenarioCounters& c = r.counters;
  MetricSeries& counters = m.add_series("counters");
  const std::pair<const char*, double> cs[] = {
      {"broadcasts", double(c.broadcasts)},       {"changes", double(c.changes)},
      {"local_requests", double(c.local_requests)}, {"cross_requests", double(c.cross_requests)},
      {"dropped_requests", double(c.dropped_requests)}, {"migrations", double(c.migrations)},
      {"revocations", double(c.revocations)},     {"abnormal_origins", double(c.abnormal_origins)},
  };
  double x = 0.0;
  for (const auto& [label, v] : cs) counters.points.push_back({x++, v, 0.0, label});

  const PropertyAudit& a = r.audit;
  MetricSeries& audit = m.add_series("audit");
  const std::pair<const char*, double> as[] = {
      {"anonymity_leaks", double(a.anonymity_leaks)},
      {"atomic_violations", double(a.atomic_violations)},
      {"traceability_checks", double(a.traceability_checks)},
      {"traceability_failures", double(a.traceability_failures)},
      {"conservation_failures", double(a.conservation_failures)},
      {"delay_additivity_failures", double(a.delay_additivity_failures)},
      {"injected_misbehaviors", double(a.injected_misbehaviors)},
      {"blacklist_size", double(a.blacklist_size)},
      {"forged_requests", double(a.forged_requests)},
      {"forged_replies", double(a.forged_replies)},
      {"forged_silent_drops", double(a.forged_silent_drops)},
      {"false_reports", double(a.false_reports)},
      {"false_reports_confirmed", double(a.false_reports_confirmed)},
      {"chains_valid", a.chains_valid ? 1.0 : 0.0},
      {"passed", a.passed() ? 1.0 : 0.0},
  };
  x = 0.0;
  for (const auto& [label, v] : as) audit.points.push_back({x++, v, 0.0, label});
  if (!a.passed()) m.warnings.push_back("property audit failed");
  return run;
}

TrainingRun run_training_eval(const ExperimentConfig& config, const StepObserver& observer) {
  config.validate();
  TrainingRun out;
  out.summary = new_record(config, "training");
  const EnvConfig env = config.env();
  const int E = config.train.episodes;
  const std::size_t window = static_cast<std::size_t>(config.eval.final_window);

  for (std::uint64_t seed : config.train_seeds) {
    auto record = [&](std::string method, std::vector<EpisodeStats> curve, double secs) {
      MethodRun m;
      m.method = std::move(method);
      m.seed = seed;
      m.final_mean = final_mean_reward(curve, window);
      m.curve = std::move(curve);
      m.wall_seconds = secs;
      out.runs.push_back(std::move(m));
    };

    TrainConfig tc = config.train;
    tc.seed = seed;
    auto t0 = std::chrono::steady_clock::now();
    TrainResult trained = train_mappo(tc, env, observer);
    const double mappo_secs = seconds_since(t0);
    out.cap_violations += trained.cap_violations;
    out.cap_violations_with_reward += trained.cap_violations_with_reward;
    out.invalid_distributions += trained.invalid_distributions;
    out.policies.push_back(trained.actors);
    record("mappo", std::move(trained.curve), mappo_secs);

    RandomController random(env);
    t0 = std::chrono::steady_clock::now();
    auto rc = run_controller(random, env, E, seed, observer);
    record("random", std::move(rc), seconds_since(t0));

    GreedyController greedy(env);
    t0 = std::chrono::steady_clock::now();
    auto gc = run_controller(greedy, env, E, seed, observer);
    record("greedy", std::move(gc), seconds_since(t0));

    t0 = std::chrono::steady_clock::now();
    GeneticController genetic(run_genetic(env, config.genetic, seed), E);
    auto ga = run_controller(genetic, env, E, seed, observer);
    record("genetic", std::move(ga), seconds_since(t0));

    NewsvendorOracleController oracle(env);
    t0 = std::chrono::steady_clock::now();
    auto oc = run_controller(oracle, env, E, seed, observer);
    record("oracle", std::move(oc), seconds_since(t0));
  }

  for (const char* method : {"mappo", "random", "greedy", "genetic", "oracle"}) {
    MetricSeries& s = out.summary.add_series(fmt::format("final_mean_{}", method));
    for (const auto& r : out.runs) {
      if (r.method == method) s.points.push_back({double(r.seed), r.final_mean, 0.0, ""});
    }
  }
  MetricSeries& audit = out.summary.add_series("audit");
  audit.points.push_back({0.0, double(out.cap_violations), 0.0, "cap_violations"});
  audit.points.push_back(
      {1.0, double(out.cap_violations_with_reward), 0.0, "cap_violations_with_reward"});
  audit.points.push_back({2.0, double(out.invalid_distributions), 0.0, "invalid_distributions"});
  return out;
}

std::vector<EvalSummary> evaluate_methods(const ExperimentConfig& config,
                                          const std::vector<Mlp>* mappo_actors) {
  config.validate();
  const EnvConfig env = config.env();
  const int E = config.eval.episodes;
  const std::uint64_t seed = derive_seed(config.seed, "evaluation");
  std::vector<EvalSummary> out;

  if (mappo_actors) {
    if (static_cast<int>(mappo_actors->size()) != env.agents()) {
      throw Error(ErrorCode::kConfigError, "policy agent count does not match the config");
    }
    for (const auto& a : *mappo_actors) {
      if (a.in() != static_cast<std::size_t>(env.obs_width()) ||
          a.out() != static_cast<std::size_t>(env.actions())) {
        throw Error(ErrorCode::kConfigError, "policy shape does not match the config");
      }
    }
    MappoController mappo(*mappo_actors, config.eval.greedy_actions);
    out.push_back(summarize("mappo", run_controller(mappo, env, E, seed)));
  }
  RandomController random(env);
  out.push_back(summarize("random", run_controller(random, env, E, seed)));
  GreedyController greedy(env);
  out.push_back(summarize("greedy", run_controller(greedy, env, E, seed)));
  // The evolved vector is frozen at its final generation for evaluation.
  GeneticController genetic(run_genetic(env, config.genetic, config.seed), 1);
  out.push_back(summarize("genetic", run_controller(genetic, env, E, seed)));
  NewsvendorOracleController oracle(env);
  out.push_back(summarize("oracle", run_controller(oracle, env, E, seed)));
  return out;
}

SweepResult sweep_and_export(const ExperimentConfig& config, SweepKind kind) {
  config.validate();
  SweepResult result;
  result.kind = kind;
  const bool lambda = kind == SweepKind::kLambda;
  const std::string param = lambda ? "lambda" : "delta";
  result.metrics = new_record(config, lambda ? "sweep_lambda" : "sweep_delta");
  const std::vector<double>& grid = lambda ? config.sweep.lambdas : config.sweep.deltas;

  for (double value : grid) {
    ExperimentConfig point = config;
    if (lambda) {
      point.lambda_per_min = value;
    } else {
      point.economics.delta = value;
    }
    const EnvConfig env = point.env();
    std::vector<int> g_star;
    std::string warning;
    try {
      g_star = oracle_vector(env);
      const ConstraintReport report = validate_constraints(env.economics, env.hbar(), g_star);
      for (const auto& item : report.items) {
        if (!warning.empty()) warning += ';';
        warning += item.constraint;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateRatio) throw;
      warning = "degenerate_ratio";
    }
    if (!warning.empty()) {
      result.metrics.warnings.push_back(fmt::format("{}={}: {}", param, num(value), warning));
    }

    std::vector<Mlp> actors;
    if (config.sweep.include_mappo) {
      TrainConfig tc = point.train;
      tc.seed = point.train_seeds.front();
      actors = train_mappo(tc, env).actors;
    }
    const auto summaries =
        evaluate_methods(point, config.sweep.include_mappo ? &actors : nullptr);
    for (const auto& s : summaries) {
      result.rows.push_back({param, value, s.method, s.mean, s.stderr_, g_star, warning});
      MetricSeries* series = nullptr;
      for (auto& existing : result.metrics.series) {
        if (existing.name == s.method) series = &existing;
      }
      if (!series) series = &result.metrics.add_series(s.method);
      series->points.push_back({value, s.mean, s.stderr_, ""});
    }
  }
  return result;
}

void write_sweep_csv(std::ostream& os, const SweepResult& result) {
  os << "# config_digest=" << result.metrics.config_digest << "\n";
  os << "param,value,method,mean_SW,stderr,G_star,warning\n";
  for (const auto& r : result.rows) {
    os << r.param << ',' << num(r.value) << ',' << r.method << ',' << num(r.mean_sw) << ','
       << num(r.stderr_) << ',' << join_ints(r.g_star, ';') << ',' << csv_field(r.warning)
       << "\n";
  }
}

MetricsRecord run_dope_benchmark(const ExperimentConfig& config) {
  config.validate();
  MetricsRecord m = new_record(config, "dope");
  MetricSeries& mc = m.add_series("monte_carlo");
  MetricSeries& integral = m.add_series("monte_carlo_integral");
  MetricSeries& closed = m.add_series("closed_form");
  MetricSeries& rel = m.add_series("relative_error");
  for (double lambda : config.dope.lambdas) {
    const double horizon = config.dope.events / lambda;
    const DopeEstimate est =
        simulate_dope(lambda, config.bounds, horizon,
                      derive_seed(config.seed, fmt::format("dope-{}", num(lambda))));
    const double exact = time_average_dope(lambda, config.bounds);
    mc.points.push_back({lambda, est.area_estimate, 0.0, ""});
    integral.points.push_back({lambda, est.integral_estimate, 0.0, ""});
    closed.points.push_back({lambda, exact, 0.0, ""});
    rel.points.push_back({lambda, std::abs(est.area_estimate - exact) / exact, 0.0, ""});
  }
  return m;
}

MetricsRecord run_newsvendor_benchmark(const ExperimentConfig& config) {
  config.validate();
  MetricsRecord m = new_record(config, "newsvendor");
  const EnvConfig env = config.env();
  const double hbar = env.hbar();
  MetricSeries& ratio = m.add_series("critical_ratio");
  ratio.points.push_back({0.0, critical_ratio(env.economics, hbar), 0.0, ""});
  MetricSeries& analytic = m.add_series("analytic_g_star");
  MetricSeries& brute = m.add_series("brute_force_g_star");
  for (int j = 0; j < env.agents(); ++j) {
    const DemandModel demand = env.demand(j);
    analytic.points.push_back(
        {double(j), double(optimal_generation(env.economics, hbar, demand)), 0.0, ""});
    const BruteForceResult bf = brute_force_optimum(
        env.economics, hbar, demand, env.economics.vmu_counts[j], config.newsvendor.g_lo,
        config.newsvendor.g_hi, config.newsvendor.samples,
        derive_seed(config.seed, fmt::format("newsvendor-{}", j)));
    brute.points.push_back({double(j), double(bf.argmax), 0.0, ""});
    MetricSeries& curve = m.add_series(fmt::format("expected_welfare_m{}", j));
    for (std::size_t i = 0; i < bf.grid.size(); ++i) {
      curve.points.push_back({double(bf.grid[i]), bf.curve[i].mean, bf.curve[i].stderr_, ""});
    }
  }
  const ConstraintReport report =
      validate_constraints(env.economics, hbar, oracle_vector(env));
  for (const auto& item : report.items) {
    m.warnings.push_back(fmt::format("{}: {}", item.constraint, item.detail));
  }
  return m;
}

void write_curves_csv(std::ostream& os, const TrainingRun& run, const std::string& digest) {
  os << "# config_digest=" << digest << "\n";
  std::size_t agents = 0;
  for (const auto& r : run.runs) {
    if (!r.curve.empty()) agents = std::max(agents, r.curve.front().mean_generation.size());
  }
  os << "method,seed,episode,mean_reward,cap_violations";
  for (std::size_t j = 0; j < agents; ++j) os << ",G" << j;
  os << "\n";
  for (const auto& r : run.runs) {
    for (const auto& e : r.curve) {
      os << r.method << ',' << r.seed << ',' << e.episode << ',' << num(e.mean_reward) << ','
         << e.cap_violations;
      for (double g : e.mean_generation) os << ',' << num(g);
      os << "\n";
    }
  }
}

}  // namespace pseudochain
