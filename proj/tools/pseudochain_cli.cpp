#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "json.hpp"
#include "pseudochain/common/error.hpp"
#include "pseudochain/harness/experiments.hpp"

namespace fs = std::filesystem;
using namespace pseudochain;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;
constexpr int kExitAudit = 3;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string format = "csv";
  std::string policy;
  std::string kind = "lambda";
};

class Outputs {
 public:
  Outputs(const Options& opt, const ExperimentConfig& config)
      : dir_(opt.out),
        format_(opt.format == "json" ? OutputFormat::kJson : OutputFormat::kCsv),
        digest_(config_digest(config)) {
    fs::create_directories(dir_);
  }

  const std::string& digest() const { return digest_; }

  std::ofstream open(const std::string& name) const {
    const fs::path p = dir_ / name;
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error(ErrorCode::kConfigError, "cannot write " + p.string());
    std::cerr << "wrote " << p.string() << "\n";
    return os;
  }

  void metrics(const MetricsRecord& r) const {
    auto os = open(r.experiment + (format_ == OutputFormat::kJson ? ".json" : ".csv"));
    write_metrics(os, r, format_);
  }

 private:
  fs::path dir_;
  OutputFormat format_;
  std::string digest_;
};

ExperimentConfig resolve_config(const Options& opt) {
  ExperimentConfig config =
      opt.config_path.empty() ? ExperimentConfig{} : load_config(opt.config_path);
  if (opt.seed) {
    config.seed = *opt.seed;
    config.train_seeds = {*opt.seed};
  }
  config.validate();
  return config;
}

void print_summary(const MetricsRecord& r) {
  for (const auto& w : r.warnings) std::cout << r.experiment << " warning: " << w << "\n";
}

int cmd_chain_bench(const Options& opt) {
  const ExperimentConfig config = resolve_config(opt);
  const Outputs out(opt, config);
  for (const auto& r : run_chain_benchmark(config)) out.metrics(r);
  return kExitOk;
}

int cmd_protocol_sim(const Options& opt) {
  const ExperimentConfig config = resolve_config(opt);
  const Outputs out(opt, config);
  const ProtocolRun run = run_protocol_simulation(config);
  out.metrics(run.metrics);
  {
    auto os = out.open("events.csv");
    os << "# config_digest=" << out.digest() << "\n";
    write_event_csv(os, *run.result.system);
  }
  {
    auto os = out.open("audit.jsonl");
    os << nlohmann::json{{"config_digest", out.digest()}}.dump() << "\n";
    write_audit_jsonl(os, run.result);
  }
  const PropertyAudit& a = run.result.audit;
  std::cout << fmt::format(
      "local {:.3f} ms, cross-district {:.3f} ms, leaks {}, blacklist {}/{}, audit {}\n",
      mean_total(run.result.local_delays), mean_total(run.result.cross_delays),
      a.anonymity_leaks, a.blacklist_size, a.injected_misbehaviors,
      a.passed() ? "passed" : "FAILED");
  return a.passed() ? kExitOk : kExitAudit;
}

int cmd_train(const Options& opt) {
  const ExperimentConfig config = resolve_config(opt);
  const Outputs out(opt, config);
  const TrainingRun run = run_training_eval(config);
  out.metrics(run.summary);
  {
    auto os = out.open("curves.csv");
    write_curves_csv(os, run, out.digest());
  }
  for (std::size_t i = 0; i < run.policies.size(); ++i) {
    auto os = out.open(fmt::format("policy_seed{}.txt", config.train_seeds[i]));
    save_policies(os, run.policies[i], config.train.history, config.economics.g_max);
  }
  {
    // Wall-clock times live apart from the reproducible outputs.
    nlohmann::json t;
    t["config_digest"] = out.digest();
    t["unit"] = "seconds";
    t["runs"] = nlohmann::json::array();
    for (const auto& r : run.runs) {
      t["runs"].push_back({{"method", r.method}, {"seed", r.seed}, {"wall_seconds", r.wall_seconds}});
    }
    auto os = out.open("timings.json");
    os << t.dump(2) << "\n";
  }
  for (const auto& r : run.runs) {
    std::cout << fmt::format("{:<8} seed {} final mean {:.3f} ({:.1f} s)\n", r.method, r.seed,
                             r.final_mean, r.wall_seconds);
  }
  const bool ok = run.cap_violations_with_reward == 0 && run.invalid_distributions == 0;
  return ok ? kExitOk : kExitAudit;
}

int cmd_eval(const Options& opt) {
  const ExperimentConfig config = resolve_config(opt);
  std::optional<PolicyFile> policy;
  if (!opt.policy.empty()) {
    std::ifstream is(opt.policy);
    if (!is) throw Error(ErrorCode::kConfigError, "cannot open policy " + opt.policy);
    policy = load_policies(is);
    if (policy->history != config.train.history || policy->g_max != config.economics.g_max) {
      throw Error(ErrorCode::kConfigError, "policy history/g_max do not match the config");
    }
  }
  const Outputs out(opt, config);
  const auto summaries = evaluate_methods(config, policy ? &policy->actors : nullptr);
  MetricsRecord r;
  r.experiment = "eval";
  r.seed = config.seed;
  r.config_digest = out.digest();
  MetricSeries& s = r.add_series("mean_social_welfare");
  double x = 0.0;
  for (const auto& e : summaries) {
    s.points.push_back({x++, e.mean, e.stderr_, e.method});
    std::cout << fmt::format("{:<8} {:.3f} +- {:.3f}\n", e.method, e.mean, e.stderr_);
  }
  out.metrics(r);
  return kExitOk;
}

int cmd_sweep(const Options& opt) {
  const ExperimentConfig config = resolve_config(opt);
  const Outputs out(opt, config);
  const SweepKind kind = opt.kind == "delta" ? SweepKind::kDelta : SweepKind::kLambda;
  const SweepResult result = sweep_and_export(config, kind);
  {
    auto os = out.open(fmt::format("{}_rows.csv", result.metrics.experiment));
    write_sweep_csv(os, result);
  }
  out.metrics(result.metrics);
  print_summary(result.metrics);
  return kExitOk;
}

int cmd_simple(const Options& opt, MetricsRecord (*run)(const ExperimentConfig&)) {
  const ExperimentConfig config = resolve_config(opt);
  const Outputs out(opt, config);
  const MetricsRecord r = run(config);
  out.metrics(r);
  print_summary(r);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudonym management experiments: chains, protocols, privacy, economics, MADRL"};
  app.require_subcommand(1);
  Options opt;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON config overrides")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "master seed (also the only training seed)");
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
    sub->add_option("--format", opt.format, "metrics format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
  };

  int rc = kExitOk;
  auto* chain = app.add_subcommand("chain-bench", "consensus scaling and request-delay table");
  common(chain);
  chain->callback([&] { rc = cmd_chain_bench(opt); });

  auto* proto = app.add_subcommand("protocol-sim", "full lifecycle scenario with property audit");
  common(proto);
  proto->callback([&] { rc = cmd_protocol_sim(opt); });

  auto* train = app.add_subcommand("train", "train MAPPO and baselines");
  common(train);
  train->callback([&] { rc = cmd_train(opt); });

  auto* eval = app.add_subcommand("eval", "evaluate a saved policy against the baselines");
  common(eval);
  eval->add_option("--policy", opt.policy, "policy file written by train");
  eval->callback([&] { rc = cmd_eval(opt); });

  auto* sweep = app.add_subcommand("sweep", "social welfare over a lambda or delta grid");
  common(sweep);
  sweep->add_option("--kind", opt.kind, "grid")
      ->check(CLI::IsMember({"lambda", "delta"}))
      ->capture_default_str();
  sweep->callback([&] { rc = cmd_sweep(opt); });

  auto* dope = app.add_subcommand("dope", "Monte Carlo vs closed-form DoPE");
  common(dope);
  dope->callback([&] { rc = cmd_simple(opt, run_dope_benchmark); });

  auto* nv = app.add_subcommand("newsvendor", "analytic G* vs brute force");
  common(nv);
  nv->callback([&] { rc = cmd_simple(opt, run_newsvendor_benchmark); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return e.code() == ErrorCode::kConfigError ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return rc;
}
