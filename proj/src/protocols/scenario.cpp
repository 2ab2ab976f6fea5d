#include "pseudochain/protocols/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

#include <fmt/format.h>
#include "json.hpp"

#include "pseudochain/common/error.hpp"

namespace pseudochain {

void ScenarioConfig::validate() const {
  system.validate();
  if (static_cast<int>(vmus.size()) != system.metaverses) {
    throw Error(ErrorCode::kConfigError, "vmus must list one count per metaverse");
  }
  for (int n : vmus) {
    if (n < 0) throw Error(ErrorCode::kConfigError, "VMU counts must be >= 0");
  }
  if (slots < 1) throw Error(ErrorCode::kConfigError, "slots must be >= 1");
  if (!(change_rate_per_min > 0.0)) throw Error(ErrorCode::kConfigError, "lambda must be > 0");
  bounds.validate();
  for (double p : {move_probability, misbehavior_probability, false_report_probability,
                   forged_request_probability, forged_origin_probability}) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::kConfigError, "probabilities in [0, 1]");
  }
  if (traceability_samples < 1) {
    throw Error(ErrorCode::kConfigError, "traceability_samples must be >= 1");
  }
}

bool PropertyAudit::passed() const {
  return anonymity_ok() && atomic_ok() && traceability_ok() && revocation_ok() &&
         silent_drop_ok() && conservation_failures == 0 && delay_additivity_failures == 0 &&
         chains_valid;
}

double mean_total(const std::vector<DelayBreakdown>& delays) {
  if (delays.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : delays) s += d.total_ms();
  return s / static_cast<double>(delays.size());
}

namespace {

enum class EventType { kSlot = 0, kChange = 1, kBroadcast = 2 };

struct Event {
  double time_ms;
  std::uint64_t seq;
  EventType type;
  int pair;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time_ms != b.time_ms) return a.time_ms > b.time_ms;
    return a.seq > b.seq;
  }
};

bool leaks(std::string_view s) {
  return s.find("ID-VMU") != std::string_view::npos || s.find("ID-VT") != std::string_view::npos;
}

class Driver {
 public:
  explicit Driver(const ScenarioConfig& cfg)
      : cfg_(cfg), rng_(make_rng(cfg.seed, "scenario")) {
    result_.system = std::make_unique<PseudonymSystem>(cfg.system);
    result_.closed_form_dope = time_average_dope(cfg.change_rate_per_min, cfg.bounds);
  }

  ScenarioResult run() {
    PseudonymSystem& sys = *result_.system;
    end_ms_ = cfg_.slots * cfg_.system.slot_ms;
    for (int j = 0; j < cfg_.system.metaverses; ++j) {
      for (int i = 0; i < cfg_.vmus[j]; ++i) {
        const int v = sys.create_vmu(j);
        sys.bootstrap_registration(v, j, 0.0);
        pairs_.push_back(v);
      }
    }
    dope_.resize(sys.actor_count());
    for (int v : pairs_) {
      change(v, 0.0);
      push(0.0, EventType::kBroadcast, v);
      const double first = next_change(0.0);
      if (first < end_ms_) push(first, EventType::kChange, v);
    }
    for (int k = 1; k <= cfg_.slots; ++k) push(k * cfg_.system.slot_ms, EventType::kSlot, k);

    while (!queue_.empty()) {
      Event e = queue_.top();
      queue_.pop();
      switch (e.type) {
        case EventType::kBroadcast: on_broadcast(e); break;
        case EventType::kChange: on_change(e); break;
        case EventType::kSlot: on_slot(e); break;
      }
    }
    finish();
    return std::move(result_);
  }

 private:
  void push(double t, EventType type, int pair) { queue_.push({t, seq_++, type, pair}); }

  double next_change(double t) {
    std::exponential_distribution<double> gap(cfg_.change_rate_per_min / 60000.0);
    return t + gap(rng_);
  }

  bool alive(int v) const { return !result_.system->actor(v).removed; }

  void on_broadcast(const Event& e) {
    if (!alive(e.pair)) return;
    PseudonymSystem& sys = *result_.system;
    sys.emit_broadcast(e.pair, e.time_ms);
    ++result_.counters.broadcasts;
    if (cfg_.log_broadcasts) {
      sys.log_event(e.time_ms, sys.label(e.pair), "broadcast", "");
    }
    const double next = e.time_ms + cfg_.system.broadcast_period_ms;
    if (next < end_ms_) push(next, EventType::kBroadcast, e.pair);
  }

  void on_change(const Event& e) {
    if (!alive(e.pair)) return;
    change(e.pair, e.time_ms);
    const double next = next_change(e.time_ms);
    if (next < end_ms_) push(next, EventType::kChange, e.pair);
  }

  void change(int v, double t) {
    PseudonymSystem& sys = *result_.system;
    if (sys.actor(v).unused() == 0 || sys.actor(*sys.actor(v).partner).unused() == 0) {
      if (sys.actor(v).active_pid()) {
        DistributionResult r = sys.request_pseudonyms(v, t);
        record(r);
        if (!r.replied) return;
      }
    }
    sys.synchronous_change(v, t);
    ++result_.counters.changes;
    std::uniform_real_distribution<double> p(cfg_.bounds.a, cfg_.bounds.b);
    dope_[v].push_back({t / 60000.0, p(rng_)});
    check_atomic(v);
  }

  void record(const DistributionResult& r) {
    if (!r.replied) {
      ++result_.counters.dropped_requests;
      if (r.abnormal) ++result_.counters.abnormal_origins;
      return;
    }
    double legs = 0.0;
    for (const auto& l : r.legs) legs += l.ms;
    if (std::abs(legs - r.delay.total_ms()) > 1e-9 * std::max(1.0, legs)) {
      ++result_.audit.delay_additivity_failures;
    }
    if (r.path == DistributionPath::kLocal) {
      ++result_.counters.local_requests;
      result_.local_delays.push_back(r.delay);
    } else {
      ++result_.counters.cross_requests;
      result_.cross_delays.push_back(r.delay);
    }
  }

  void check_atomic(int v) {
    const PseudonymSystem& sys = *result_.system;
    const Actor& a = sys.actor(v);
    if (a.cursor != sys.actor(*a.partner).cursor) ++result_.audit.atomic_violations;
  }

  std::vector<int> live_pairs(std::optional<int> in_metaverse = std::nullopt) const {
    std::vector<int> out;
    for (int v : pairs_) {
      const Actor& a = result_.system->actor(v);
      if (a.removed || !a.active_pid()) continue;
      if (in_metaverse && a.location != *in_metaverse) continue;
      out.push_back(v);
    }
    return out;
  }

  template <typename T>
  std::optional<T> pick(const std::vector<T>& xs) {
    if (xs.empty()) return std::nullopt;
    return xs[std::uniform_int_distribution<std::size_t>(0, xs.size() - 1)(rng_)];
  }

  bool chance(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }

  void on_slot(const Event& e) {
    PseudonymSystem& sys = *result_.system;
    const int slot = e.pair;  // slot index k, boundary at k * slot_ms
    const double t = e.time_ms;
    const int J = cfg_.system.metaverses;

    std::vector<int> demand(J);
    for (int j = 0; j < J; ++j) demand[j] = sys.aggregate_demand(j, slot - 1);
    result_.demand.push_back(demand);

    for (int v : pairs_) check_atomic(v);
    for (int j = 0; j < J; ++j) {
      auto s = sys.registry().issuance_stats(sys.lmm_id(j));
      ++result_.audit.conservation_checks;
      if (s.issued != s.unused + s.active + s.consumed + s.revoked) {
        ++result_.audit.conservation_failures;
      }
    }
    sys.log_event(t, "scheduler", "slot", fmt::format("slot={} demand={}", slot - 1,
                                                     fmt::join(demand, "/")));
    if (slot == cfg_.slots) return;

    if (J > 1) {
      for (int v : pairs_) {
        if (!alive(v) || !chance(cfg_.move_probability)) continue;
        const int from = sys.actor(v).location;
        const int to = chance(0.5) ? (from + 1) % J : (from + J - 1) % J;
        if (to == from) continue;
        sys.migrate(v, to, t);
        ++result_.counters.migrations;
      }
    }

    if (chance(cfg_.misbehavior_probability)) inject_misbehavior(t);
    if (chance(cfg_.false_report_probability)) inject_false_report(t);
    if (chance(cfg_.forged_request_probability)) {
      const int j = std::uniform_int_distribution<int>(0, J - 1)(rng_);
      const auto replies = sys.message_count(MessageKind::kPseuReply);
      const auto drops = sys.audit().size();
      DistributionResult r = sys.forged_request(j, t);
      ++result_.audit.forged_requests;
      if (r.replied || sys.message_count(MessageKind::kPseuReply) != replies) {
        ++result_.audit.forged_replies;
      }
      if (sys.audit().size() == drops + 1 && sys.audit().back().kind == "silent-drop") {
        ++result_.audit.forged_silent_drops;
      }
    }
    if (J > 2 && cfg_.system.mode == ChainMode::kCrossChain &&
        chance(cfg_.forged_origin_probability)) {
      if (auto v = pick(live_pairs())) {
        const Actor& a = sys.actor(*v);
        const int issued = sys.metaverse_of_lmm(sys.registry().credential(*a.active_pid()).issuer_lmm);
        for (int k = 0; k < J; ++k) {
          if (k != a.location && k != issued) {
            DistributionResult r = sys.cross_district_distribution(*v, t, k);
            record(r);
            break;
          }
        }
      }
    }
  }

  std::optional<int> reporter_for(int accused, int j) {
    std::vector<int> cands;
    for (int v : live_pairs(j)) {
      if (v != accused && !result_.system->is_restricted(result_.system->actor(v).identity.id)) {
        cands.push_back(v);
      }
    }
    return pick(cands);
  }

  void inject_misbehavior(double t) {
    PseudonymSystem& sys = *result_.system;
    auto accused = pick(live_pairs());
    if (!accused) return;
    auto reporter = reporter_for(*accused, sys.actor(*accused).location);
    if (!reporter) return;
    sys.actor(*accused).malicious = true;
    // Either member of the pair may be the one observed misbehaving.
    const int target = chance(0.5) ? *accused : *sys.actor(*accused).partner;
    const std::string pid = *sys.actor(target).active_pid();
    ++result_.audit.injected_misbehaviors;
    RevocationResult r = sys.dual_revocation(*reporter, pid, "false-safety-message", t);
    if (r.confirmed) ++result_.counters.revocations;
  }

  void inject_false_report(double t) {
    PseudonymSystem& sys = *result_.system;
    auto accused = pick(live_pairs());
    if (!accused || sys.actor(*accused).malicious) return;
    auto reporter = reporter_for(*accused, sys.actor(*accused).location);
    if (!reporter) return;
    ++result_.audit.false_reports;
    RevocationResult r =
        sys.dual_revocation(*reporter, *sys.actor(*accused).active_pid(), "unfounded", t);
    if (r.confirmed) ++result_.audit.false_reports_confirmed;
  }

  void finish() {
    PseudonymSystem& sys = *result_.system;
    PropertyAudit& audit = result_.audit;
    audit.blacklist_size = sys.blacklist().size();
    audit.anonymity_leaks = sys.cleartext_leaks();
    for (const ChainState* chain : sys.network().all_chains()) {
      if (!chain->verify()) audit.chains_valid = false;
      for (const Block& b : chain->blocks()) {
        for (const Transaction& tx : b.payload) {
          if (leaks(tx.submitter) || leaks(tx.tag)) ++audit.anonymity_leaks;
          for (const auto& k : tx.keys) {
            if (leaks(k)) ++audit.anonymity_leaks;
          }
        }
      }
    }
    for (const EventRecord& ev : sys.events()) {
      if (leaks(ev.actor) || leaks(ev.detail)) ++audit.anonymity_leaks;
    }
    for (const AuditEvent& ev : sys.audit()) {
      if (leaks(ev.actor) || leaks(ev.detail)) ++audit.anonymity_leaks;
    }

    // Conditional traceability over a sample of distributed pseudonyms.
    std::vector<std::pair<std::string, std::string>> issued;  // pid, owner
    for (std::size_t h = 0; h < sys.actor_count(); ++h) {
      const Actor& a = sys.actor(static_cast<int>(h));
      for (const auto& pid : a.credentials) issued.push_back({pid, a.identity.id});
    }
    std::vector<ActorView> others;
    for (int j = 0; j < cfg_.system.metaverses; ++j) {
      others.push_back(sys.lmm_view(j));
      others.push_back(sys.es_view(j));
    }
    for (int i = 0; i < 4 && !pairs_.empty(); ++i) {
      const int v = *pick(pairs_);
      others.push_back(sys.actor_view(v));
      others.push_back(sys.actor_view(*sys.actor(v).partner));
    }
    const ActorView ta = sys.ta_view();
    for (int s = 0; s < cfg_.traceability_samples && !issued.empty(); ++s) {
      const auto [pid, owner] = *pick(issued);
      ++audit.traceability_checks;
      if (sys.resolve_true_id(ta, pid) != owner) ++audit.traceability_failures;
      const bool revealed = sys.blacklist().contains_pid(pid);
      for (const ActorView& view : others) {
        // Edge servers legitimately learn revoked identities from the TA.
        if (revealed && view.kind == ViewKind::kEdgeServer) continue;
        if (sys.resolve_true_id(view, pid)) ++audit.traceability_failures;
      }
    }

    const double horizon_min = end_ms_ / 60000.0;
    double sum = 0.0;
    int n = 0;
    for (int v : pairs_) {
      if (!alive(v) || dope_[v].empty()) continue;
      sum += average_dope_area(dope_[v], horizon_min);
      ++n;
    }
    result_.realized_dope = n > 0 ? sum / n : 0.0;
    sys.log_audit(end_ms_, "property-audit", "scheduler",
                  audit.passed() ? "passed" : "failed");
  }

  const ScenarioConfig& cfg_;
  Rng rng_;
  ScenarioResult result_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t seq_ = 0;
  double end_ms_ = 0.0;
  std::vector<int> pairs_;
  std::vector<std::vector<ChangeEvent>> dope_;
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config) {
  config.validate();
  return Driver(config).run();
}

void write_event_csv(std::ostream& os, const PseudonymSystem& system) {
  os << "time_ms,actor,event_kind,detail\n";
  for (const auto& e : system.events()) {
    os << fmt::format("{:.3f}", e.time_ms) << ',' << csv_field(e.actor) << ','
       << csv_field(e.kind) << ',' << csv_field(e.detail) << '\n';
  }
}

void write_audit_jsonl(std::ostream& os, const ScenarioResult& result) {
  for (const auto& a : result.system->audit()) {
    nlohmann::json line = {{"time_ms", a.time_ms}, {"kind", a.kind}, {"actor", a.actor},
                           {"detail", a.detail}};
    os << line.dump() << '\n';
  }
  const PropertyAudit& p = result.audit;
  nlohmann::json summary = {
      {"kind", "summary"},
      {"anonymity_leaks", p.anonymity_leaks},
      {"atomic_violations", p.atomic_violations},
      {"traceability_checks", p.traceability_checks},
      {"traceability_failures", p.traceability_failures},
      {"conservation_checks", p.conservation_checks},
      {"conservation_failures", p.conservation_failures},
      {"delay_additivity_failures", p.delay_additivity_failures},
      {"injected_misbehaviors", p.injected_misbehaviors},
      {"blacklist_size", p.blacklist_size},
      {"forged_requests", p.forged_requests},
      {"forged_replies", p.forged_replies},
      {"forged_silent_drops", p.forged_silent_drops},
      {"false_reports", p.false_reports},
      {"false_reports_confirmed", p.false_reports_confirmed},
      {"chains_valid", p.chains_valid},
      {"passed", p.passed()}};
  os << summary.dump() << '\n';
}

}  // namespace pseudochain
