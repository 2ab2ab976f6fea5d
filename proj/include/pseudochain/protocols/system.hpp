#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pseudochain/chain/cross_chain.hpp"
#include "pseudochain/crypto/registry.hpp"
#include "pseudochain/protocols/messages.hpp"

namespace pseudochain {

struct SystemConfig {
  int metaverses = 3;
  int batch_w = 10;  // VMU credentials per request
  int batch_u = 10;  // VT credentials per request
  double slot_ms = 60000.0;
  double broadcast_period_ms = 300.0;
  ChainMode mode = ChainMode::kCrossChain;
  CryptoAccounting accounting = CryptoAccounting::kAggregate;
  CryptoAggregate aggregate;
  LatencyModel latency;
  ChainVerificationModel verification;
  CrossChainTiming cross_timing;
  ConsensusConfig subchain_consensus;
  ConsensusConfig relay_consensus;
  ConsensusConfig main_consensus;
  CryptoTimingModel crypto_timing;
  std::size_t pool_capacity = 1200;
  bool keep_broadcasts = false;  // retain broadcast messages in messages()
  std::uint64_t seed = 0;

  void validate() const;
};

struct Actor {
  int handle = -1;
  TrueIdentity identity;
  int location = 0;
  std::vector<std::string> credentials;  // owned pids in issue order
  std::size_t cursor = 0;                // credentials activated so far
  std::optional<int> partner;            // VMU <-> VT
  bool malicious = false;                // ground truth for report confirmation
  bool removed = false;
  std::deque<ProtocolMessage> inbox;

  std::size_t unused() const { return credentials.size() - cursor; }
  const std::string* active_pid() const {
    return cursor == 0 ? nullptr : &credentials[cursor - 1];
  }
};

struct BlacklistEntry {
  std::string true_id;
  std::string partner_true_id;
  double revealed_at_ms = 0.0;
  std::string reason;
  std::set<std::string> pids;
};

// Membership is permanent for the run.
class Blacklist {
 public:
  void add(BlacklistEntry entry);
  bool contains(const std::string& true_id) const;
  bool contains_pid(const std::string& pid) const;
  std::size_t size() const { return entries_.size(); }
  const std::vector<BlacklistEntry>& entries() const { return entries_; }

 private:
  std::vector<BlacklistEntry> entries_;
  std::set<std::string> ids_;
  std::set<std::string> pids_;
};

// Simulator-side log line; actors appear as handles or pids, never true ids.
struct EventRecord {
  double time_ms = 0.0;
  std::string actor;
  std::string kind;
  std::string detail;
};

struct AuditEvent {
  double time_ms = 0.0;
  std::string kind;  // silent-drop, abnormal-origin, revocation, restriction, ...
  std::string actor;
  std::string detail;
};

struct BootstrapResult {
  int vt = -1;
  std::vector<std::string> vmu_pids;
  std::vector<std::string> vt_pids;
  Digest record_tx{};
  std::optional<Digest> tracking_tx;
};

struct PseudonymChange {
  double time_ms = 0.0;
  int vmu = -1;
  std::string old_vmu_pid;  // empty on first activation
  std::string new_vmu_pid;
  std::string old_vt_pid;
  std::string new_vt_pid;
  int location = 0;
};

enum class DistributionPath { kLocal, kCrossDistrict };

struct DelayLeg {
  std::string component;  // crypto | communication | chain
  std::string label;
  double ms = 0.0;
};

struct DistributionResult {
  DistributionPath path = DistributionPath::kLocal;
  bool replied = false;
  bool abnormal = false;  // origin answered false
  std::string drop_reason;
  DelayBreakdown delay;
  std::vector<DelayLeg> legs;
  int vmu_received = 0;
  int vt_received = 0;
  int serving_metaverse = 0;
  int minted_on_demand = 0;
  std::optional<CrossChainOutcome> verify;
};

struct RevocationResult {
  bool delivered = false;  // reached the TA
  bool confirmed = false;
  std::string drop_reason;
  std::size_t revoked_credentials = 0;
};

enum class ViewKind { kTa, kLmm, kEdgeServer, kVmu, kVt };

std::string_view to_string(ViewKind kind);

// What an actor can read: chains it has access to, private keys it holds,
// and off-chain ciphertexts it has received.
struct ActorView {
  ViewKind kind = ViewKind::kTa;
  std::string holder;
  std::vector<const ChainState*> chains;
  std::vector<Bytes> private_keys;
  std::vector<Bytes> documents;

  // Plaintexts of `documents` this view can open, filled on first lookup.
  mutable std::optional<std::vector<std::optional<Bytes>>> opened;
};

// VMUs, VTs, edge servers, LMMs and a TA over a cross-chain network, with the
// four pseudonym lifecycle protocols. Single-threaded; every operation runs
// to completion at the given simulated time.
class PseudonymSystem {
 public:
  explicit PseudonymSystem(SystemConfig config);

  const SystemConfig& config() const { return config_; }
  IdentityRegistry& registry() { return *registry_; }
  const IdentityRegistry& registry() const { return *registry_; }
  CryptoEngine& crypto() { return *crypto_; }
  CrossChainNetwork& network() { return *network_; }
  const CrossChainNetwork& network() const { return *network_; }

  const std::string& ta_id() const { return ta_id_; }
  const std::string& lmm_id(int j) const { return lmm_ids_.at(j); }
  const std::string& es_id(int j) const { return es_ids_.at(j); }
  int metaverse_of_lmm(const std::string& lmm) const;

  // New VMU with a TA-issued identity, not yet registered.
  int create_vmu(int location, std::optional<std::string> explicit_id = std::nullopt);

  // Initial registration: VT, keys, certificates, w/u credentials, subchain
  // record, main-chain tracking entry, tracking list to every LMM.
  // Throws AlreadyRegistered.
  BootstrapResult bootstrap_registration(int vmu, int j, double now_ms);

  // Emits and verifies (at the edge server) one signed broadcast.
  // Throws NoActivePseudonym.
  ProtocolMessage emit_broadcast(int vmu, double now_ms);
  // Every broadcast due before now_ms since the last tick, one per period.
  std::vector<ProtocolMessage> safety_broadcast_tick(int vmu, double now_ms);

  // Advances VMU and VT together. Throws Exhausted if either has no Unused
  // credential; nothing changes in that case.
  PseudonymChange synchronous_change(int vmu, double now_ms);

  // Picks local or cross-district distribution from the issuer of the
  // active credentials and the current district.
  DistributionResult request_pseudonyms(int vmu, double now_ms);
  DistributionResult local_distribution(int vmu, double now_ms);
  // claimed_origin overrides the origin district the request points to
  // (used to model forged origin claims).
  DistributionResult cross_district_distribution(
      int vmu, double now_ms, std::optional<int> claimed_origin = std::nullopt);

  // Request from a key pair with no on-chain record; must be dropped.
  DistributionResult forged_request(int j, double now_ms);

  RevocationResult dual_revocation(int reporter, const std::string& accused_pid,
                                   const std::string& misbehavior, double now_ms);

  // Sum of requested credential counts received by LMM_j during slot t.
  int aggregate_demand(int j, int slot) const;
  void record_demand(int j, int slot, int count);

  // Synchronized migration of a VMU and its VT.
  void migrate(int vmu, int to, double now_ms);

  const Actor& actor(int handle) const { return actors_.at(handle); }
  Actor& actor(int handle) { return actors_.at(handle); }
  std::size_t actor_count() const { return actors_.size(); }
  std::vector<int> vmus() const;
  std::vector<int> roster(int j) const;  // VTs present in metaverse j
  std::optional<int> actor_by_true_id(const std::string& id) const;
  std::string label(int handle) const;

  const Blacklist& blacklist() const { return blacklist_; }
  bool is_restricted(const std::string& true_id) const {
    return restricted_.count(true_id) > 0;
  }

  ActorView ta_view() const;
  ActorView lmm_view(int j) const;
  ActorView es_view(int j) const;
  ActorView actor_view(int handle) const;
  // pid -> true id using only what the view can read.
  std::optional<std::string> resolve_true_id(const ActorView& view,
                                             const std::string& pid) const;

  // LMM-held tracking-list ciphertexts (one per registration).
  const std::vector<Bytes>& tracking_lists(int j) const { return tracking_lists_.at(j); }

  const std::vector<ProtocolMessage>& messages() const { return messages_; }
  std::uint64_t message_count(MessageKind kind) const;
  std::uint64_t broadcasts_verified() const { return broadcasts_verified_; }
  std::uint64_t broadcasts_rejected() const { return broadcasts_rejected_; }
  // Cleartext fields of emitted VMU/VT messages that contained a true id.
  std::uint64_t cleartext_leaks() const { return cleartext_leaks_; }
  std::uint64_t abnormal_reports() const { return abnormal_reports_; }

  const std::vector<EventRecord>& events() const { return events_; }
  const std::vector<AuditEvent>& audit() const { return audit_; }
  void log_event(double t, std::string actor, std::string kind, std::string detail);
  void log_audit(double t, std::string kind, std::string actor, std::string detail);

 private:
  struct RequestContext;

  ChainState& records_chain(int j);
  const ChainState& records_chain(int j) const;
  std::vector<Bytes> lmm_anchors() const;
  const Bytes& public_key_of(const std::string& entity_id) const;
  bool pid_on_chain(const ChainState& chain, const std::string& pid) const;
  void emit(ProtocolMessage msg, bool from_vehicle);
  Bytes seal(const std::string& recipient_entity, const std::string& plaintext);
  Bytes seal_to_key(const Bytes& public_key, const std::string& plaintext);

  std::optional<RequestContext> receive_request(int vmu, int serving, double now_ms,
                                                DistributionResult& out);
  void deliver(RequestContext& ctx, int serving, double now_ms, DistributionResult& out);
  void finish_delay(DistributionResult& out, double crypto_before) const;
  void drop(DistributionResult& out, double now_ms, const std::string& actor,
            std::string reason);

  SystemConfig config_;
  std::unique_ptr<CryptoEngine> crypto_;
  std::unique_ptr<IdentityRegistry> registry_;
  std::unique_ptr<CrossChainNetwork> network_;
  std::string ta_id_;
  std::vector<std::string> lmm_ids_;
  std::vector<std::string> es_ids_;
  std::vector<Actor> actors_;
  std::map<std::string, int> by_true_id_;
  std::vector<std::vector<Bytes>> tracking_lists_;
  std::vector<std::vector<Bytes>> es_notices_;
  std::map<std::pair<int, int>, int> demand_;
  std::map<int, double> next_broadcast_;
  Blacklist blacklist_;
  std::set<std::string> restricted_;
  std::vector<ProtocolMessage> messages_;
  std::map<MessageKind, std::uint64_t> message_counts_;
  std::uint64_t broadcasts_verified_ = 0;
  std::uint64_t broadcasts_rejected_ = 0;
  std::uint64_t cleartext_leaks_ = 0;
  std::uint64_t abnormal_reports_ = 0;
  std::uint64_t forged_counter_ = 0;
  std::vector<EventRecord> events_;
  std::vector<AuditEvent> audit_;
};

// Adversary model for synchronized changes: a change observed at time t in
// district j is confused with every other pair that changed in j within
// window_ms of t; the tracking probability is 1 / |candidates|.
struct ChangeObservation {
  double time_ms = 0.0;
  int location = 0;
  int pair = -1;
};

double adversary_tracking_probability(const std::vector<ChangeObservation>& observed,
                                      std::size_t target, double window_ms);

}  // namespace pseudochain
