#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <vector>

#include "pseudochain/privacy/dope.hpp"
#include "pseudochain/protocols/system.hpp"

namespace pseudochain {

struct ScenarioConfig {
  SystemConfig system;
  std::vector<int> vmus = {80, 70, 60};  // per metaverse; size must equal J
  int slots = 100;
  double change_rate_per_min = 2.0;
  TrackingBounds bounds;
  double move_probability = 0.1;        // per pair per slot, to a ring neighbour
  double misbehavior_probability = 0.1;  // per slot: one malicious pair + report
  double false_report_probability = 0.05;
  double forged_request_probability = 0.1;
  double forged_origin_probability = 0.05;
  int traceability_samples = 200;
  bool log_broadcasts = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PropertyAudit {
  std::uint64_t anonymity_leaks = 0;
  std::uint64_t atomic_violations = 0;
  std::uint64_t traceability_checks = 0;
  std::uint64_t traceability_failures = 0;
  std::uint64_t conservation_checks = 0;
  std::uint64_t conservation_failures = 0;
  std::uint64_t delay_additivity_failures = 0;
  std::size_t injected_misbehaviors = 0;
  std::size_t blacklist_size = 0;
  std::size_t forged_requests = 0;
  std::size_t forged_replies = 0;
  std::size_t forged_silent_drops = 0;
  std::size_t false_reports = 0;
  std::size_t false_reports_confirmed = 0;
  bool chains_valid = true;

  bool anonymity_ok() const { return anonymity_leaks == 0; }
  bool atomic_ok() const { return atomic_violations == 0; }
  bool traceability_ok() const { return traceability_failures == 0 && traceability_checks > 0; }
  bool revocation_ok() const {
    return injected_misbehaviors == blacklist_size && false_reports_confirmed == 0;
  }
  bool silent_drop_ok() const {
    return forged_replies == 0 && forged_silent_drops == forged_requests;
  }
  bool passed() const;
};

struct ScenarioCounters {
  std::uint64_t broadcasts = 0;
  std::uint64_t changes = 0;
  std::uint64_t local_requests = 0;
  std::uint64_t cross_requests = 0;
  std::uint64_t dropped_requests = 0;
  std::uint64_t migrations = 0;
  std::uint64_t revocations = 0;
  std::uint64_t abnormal_origins = 0;
};

struct ScenarioResult {
  std::unique_ptr<PseudonymSystem> system;
  std::vector<DelayBreakdown> local_delays;
  std::vector<DelayBreakdown> cross_delays;
  std::vector<std::vector<int>> demand;  // [slot][metaverse]
  double realized_dope = 0.0;            // mean over surviving pairs
  double closed_form_dope = 0.0;
  ScenarioCounters counters;
  PropertyAudit audit;
};

ScenarioResult run_scenario(const ScenarioConfig& config);

// CSV: time_ms,actor,event_kind,detail
void write_event_csv(std::ostream& os, const PseudonymSystem& system);
// One JSON object per line; the last line is the property audit summary.
void write_audit_jsonl(std::ostream& os, const ScenarioResult& result);

double mean_total(const std::vector<DelayBreakdown>& delays);

}  // namespace pseudochain
