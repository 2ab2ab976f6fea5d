#include "pseudochain/harness/config.hpp"

#include <fstream>

#include <fmt/format.h>

#include "pseudochain/common/bytes.hpp"
#include "pseudochain/common/error.hpp"

namespace pseudochain {

using nlohmann::json;

NLOHMANN_JSON_SERIALIZE_ENUM(ClipMode, {{ClipMode::kStandard, "standard"},
                                        {ClipMode::kLiteral, "literal"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ActionEncoding, {{ActionEncoding::kScalar, "scalar"},
                                              {ActionEncoding::kOneHot, "one_hot"}})

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrackingBounds, a, b)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EconomicParams, epsilon, beta, delta, p0, g, c,
                                                h, r, theta_per_s, g_max, slot_seconds,
                                                vmu_counts, demand_means)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LatencyModel, vmu_to_es_ms, es_to_lmm_ms,
                                                es_to_ta_ms)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ChainVerificationModel, subchain_lookup_ms,
                                                single_chain_lookup_ms)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CryptoAggregate, cross_chain_ms,
                                                single_chain_ms)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CryptoTimingModel, encrypt_ms, decrypt_ms,
                                                sign_ms, verify_sig_ms, verify_cert_ms)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CrossChainTiming, notary_ms, origin_lookup_ms,
                                                link_latency_ms)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ConsensusConfig, n_miners, per_message_ms,
                                                base_round_ms, block_capacity)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ChainCalibration, single_chain, subchain,
                                                relay_chain)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ChainBenchConfig, calibration, subchains,
                                                miners, tx_counts, bench_txs)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ProtocolSimConfig, slots, change_rate_per_min,
                                                move_probability, misbehavior_probability,
                                                false_report_probability,
                                                forged_request_probability,
                                                forged_origin_probability,
                                                traceability_samples, log_broadcasts)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, episodes, steps, history, epochs,
                                                batch, hidden, actor_lr, critic_lr, clip, gamma,
                                                lambda_gae, entropy_coef, reward_scale,
                                                normalize_advantages, clip_mode, encoding, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalConfig, episodes, greedy_actions,
                                                final_window)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GeneticConfig, population, generations,
                                                crossover, mutation, tournament, elite,
                                                mutation_sd)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SweepConfig, lambdas, deltas, include_mappo)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DopeBenchConfig, lambdas, events)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NewsvendorBenchConfig, samples, g_lo, g_hi)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExperimentConfig, seed, lambda_per_min,
                                                bounds, economics, latency, verification,
                                                crypto_aggregate, crypto_timing, cross_timing,
                                                chain, protocol, train, train_seeds, eval,
                                                genetic, sweep, dope, newsvendor)

namespace {

void fail(const std::string& what) { throw Error(ErrorCode::kConfigError, what); }

void check_keys(const json& given, const json& known, const std::string& path) {
  if (!given.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    if (!known.contains(key)) fail(fmt::format("unknown config key '{}{}'", path, key));
    if (value.is_object() && known[key].is_object()) {
      check_keys(value, known[key], path + key + ".");
    }
  }
}

template <typename T>
void require_positive_all(const std::vector<T>& xs, const char* what) {
  if (xs.empty()) fail(fmt::format("{} must be non-empty", what));
  for (T x : xs) {
    if (!(x > 0)) fail(fmt::format("{} entries must be positive", what));
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  bounds.validate();
  economics.validate();
  latency.validate();
  verification.validate();
  crypto_timing.validate();
  cross_timing.validate();
  chain.calibration.single_chain.validate();
  chain.calibration.subchain.validate();
  chain.calibration.relay_chain.validate();
  train.validate();
  if (!(lambda_per_min > 0.0)) fail("lambda_per_min must be > 0");
  require_positive_all(economics.vmu_counts, "economics.vmu_counts");
  require_positive_all(chain.subchains, "chain.subchains");
  require_positive_all(chain.miners, "chain.miners");
  require_positive_all(chain.tx_counts, "chain.tx_counts");
  if (chain.bench_txs <= 0) fail("chain.bench_txs must be positive");
  for (int m : chain.miners) {
    if (m < 4) fail("chain.miners entries must be >= 4 (PBFT with f >= 1)");
  }
  if (protocol.slots <= 0) fail("protocol.slots must be positive");
  if (train_seeds.empty()) fail("train_seeds must be non-empty");
  if (eval.episodes <= 0 || eval.final_window <= 0) fail("eval episodes/window must be > 0");
  require_positive_all(sweep.lambdas, "sweep.lambdas");
  require_positive_all(sweep.deltas, "sweep.deltas");
  require_positive_all(dope.lambdas, "dope.lambdas");
  if (dope.events <= 0) fail("dope.events must be positive");
  if (newsvendor.samples <= 0 || newsvendor.g_lo < 0 || newsvendor.g_hi < newsvendor.g_lo) {
    fail("newsvendor samples/g range invalid");
  }
  if (newsvendor.g_hi > economics.g_max) fail("newsvendor.g_hi must not exceed economics.g_max");
  scenario().validate();
  EnvConfig e = env();
  e.validate();
}

EnvConfig ExperimentConfig::env() const {
  EnvConfig e;
  e.economics = economics;
  e.lambda_per_min = lambda_per_min;
  e.bounds = bounds;
  e.steps = train.steps;
  e.history = train.history;
  return e;
}

ScenarioConfig ExperimentConfig::scenario() const {
  ScenarioConfig s;
  s.system.metaverses = economics.metaverses();
  s.system.latency = latency;
  s.system.verification = verification;
  s.system.aggregate = crypto_aggregate;
  s.system.crypto_timing = crypto_timing;
  s.system.cross_timing = cross_timing;
  s.system.seed = seed;
  s.vmus = economics.vmu_counts;
  s.slots = protocol.slots;
  s.change_rate_per_min = protocol.change_rate_per_min;
  s.bounds = bounds;
  s.move_probability = protocol.move_probability;
  s.misbehavior_probability = protocol.misbehavior_probability;
  s.false_report_probability = protocol.false_report_probability;
  s.forged_request_probability = protocol.forged_request_probability;
  s.forged_origin_probability = protocol.forged_origin_probability;
  s.traceability_samples = protocol.traceability_samples;
  s.log_broadcasts = protocol.log_broadcasts;
  s.seed = seed;
  return s;
}

json to_json(const ExperimentConfig& config) {
  json j;
  to_json(j, config);
  return j;
}

ExperimentConfig config_from_json(const json& overrides) {
  if (!overrides.is_null() && !overrides.is_object()) fail("config must be a JSON object");
  json merged = to_json(ExperimentConfig{});
  check_keys(overrides, merged, "");
  merged.merge_patch(overrides);
  ExperimentConfig config;
  try {
    merged.get_to(config);
  } catch (const json::exception& e) {
    fail(fmt::format("config type error: {}", e.what()));
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(fmt::format("cannot open config '{}'", path));
  json overrides = json::parse(in, nullptr, false, true);
  if (overrides.is_discarded()) fail(fmt::format("config '{}' is not valid JSON", path));
  return config_from_json(overrides);
}

std::string config_digest(const ExperimentConfig& config) {
  return to_hex(sha256(to_bytes(to_json(config).dump())));
}

}  // namespace pseudochain
