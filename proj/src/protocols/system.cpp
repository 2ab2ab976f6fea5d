#include "pseudochain/protocols/system.hpp"

#include <algorithm>
#include <cstring>

#include <fmt/format.h>
#include "json.hpp"

#include "pseudochain/common/error.hpp"

namespace pseudochain {

using nlohmann::json;

std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::kSafetyBroadcast: return "SafetyBroadcast";
    case MessageKind::kPseuRequest: return "PseuRequest";
    case MessageKind::kPseuReply: return "PseuReply";
    case MessageKind::kCrossVerifyQuery: return "CrossVerifyQuery";
    case MessageKind::kCrossVerifyAnswer: return "CrossVerifyAnswer";
    case MessageKind::kReport: return "Report";
    case MessageKind::kRevocationNotice: return "RevocationNotice";
    case MessageKind::kTrackingListPush: return "TrackingListPush";
  }
  return "?";
}

std::string_view to_string(ViewKind kind) {
  switch (kind) {
    case ViewKind::kTa: return "TA";
    case ViewKind::kLmm: return "LMM";
    case ViewKind::kEdgeServer: return "ES";
    case ViewKind::kVmu: return "VMU";
    case ViewKind::kVt: return "VT";
  }
  return "?";
}

void LatencyModel::validate() const {
  if (!(vmu_to_es_ms >= 0.0 && es_to_lmm_ms >= 0.0 && es_to_ta_ms >= 0.0)) {
    throw Error(ErrorCode::kConfigError, "latencies must be >= 0");
  }
}

void ChainVerificationModel::validate() const {
  if (!(subchain_lookup_ms >= 0.0 && single_chain_lookup_ms >= 0.0)) {
    throw Error(ErrorCode::kConfigError, "chain lookup costs must be >= 0");
  }
}

void SystemConfig::validate() const {
  if (metaverses < 1) throw Error(ErrorCode::kConfigError, "need >= 1 metaverse");
  if (batch_w < 1 || batch_u < 1) throw Error(ErrorCode::kConfigError, "w, u must be >= 1");
  if (!(slot_ms > 0.0) || !(broadcast_period_ms > 0.0)) {
    throw Error(ErrorCode::kConfigError, "slot and broadcast period must be > 0");
  }
  if (!(aggregate.cross_chain_ms >= 0.0 && aggregate.single_chain_ms >= 0.0)) {
    throw Error(ErrorCode::kConfigError, "crypto aggregates must be >= 0");
  }
  latency.validate();
  verification.validate();
  cross_timing.validate();
  subchain_consensus.validate();
  relay_consensus.validate();
  main_consensus.validate();
  crypto_timing.validate();
}

void Blacklist::add(BlacklistEntry entry) {
  ids_.insert(entry.true_id);
  if (!entry.partner_true_id.empty()) ids_.insert(entry.partner_true_id);
  pids_.insert(entry.pids.begin(), entry.pids.end());
  entries_.push_back(std::move(entry));
}

bool Blacklist::contains(const std::string& true_id) const { return ids_.count(true_id) > 0; }

bool Blacklist::contains_pid(const std::string& pid) const { return pids_.count(pid) > 0; }

namespace {

Bytes as_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

bool contains_text(std::span<const std::uint8_t> hay, std::string_view needle) {
  if (needle.empty() || hay.size() < needle.size()) return false;
  auto it = std::search(hay.begin(), hay.end(), needle.begin(), needle.end(),
                        [](std::uint8_t a, char b) { return a == static_cast<std::uint8_t>(b); });
  return it != hay.end();
}

bool contains_text(std::string_view hay, std::string_view needle) {
  return !needle.empty() && hay.find(needle) != std::string_view::npos;
}

constexpr std::string_view kVmuPrefix = "ID-VMU";
constexpr std::string_view kVtPrefix = "ID-VT";

}  // namespace

struct PseudonymSystem::RequestContext {
  int vmu = -1;
  int vt = -1;
  std::string vmu_pid;
  std::string vt_pid;
  double crypto_before = 0.0;
};

PseudonymSystem::PseudonymSystem(SystemConfig config) : config_(std::move(config)) {
  config_.validate();
  crypto_ = std::make_unique<CryptoEngine>(
      std::make_unique<DeterministicCryptoProvider>(derive_seed(config_.seed, "crypto")),
      config_.crypto_timing);
  registry_ = std::make_unique<IdentityRegistry>(
      *crypto_, RegistryConfig{config_.pool_capacity, derive_seed(config_.seed, "registry")});
  ta_id_ = registry_->create_trusted_authority().identity.id;

  NetworkConfig net;
  net.subchains = config_.metaverses;
  net.subchain = config_.subchain_consensus;
  net.relay = config_.relay_consensus;
  net.main = config_.main_consensus;
  net.timing = config_.cross_timing;
  network_ = std::make_unique<CrossChainNetwork>(net);

  for (int j = 0; j < config_.metaverses; ++j) {
    lmm_ids_.push_back(registry_->provision_entity(Role::kLmm, ta_id_).identity.id);
    es_ids_.push_back(registry_->provision_entity(Role::kEdgeServer, ta_id_).identity.id);
    network_->assign_notary(j, lmm_ids_.back());
  }
  tracking_lists_.resize(config_.metaverses);
  es_notices_.resize(config_.metaverses);
}

int PseudonymSystem::metaverse_of_lmm(const std::string& lmm) const {
  auto it = std::find(lmm_ids_.begin(), lmm_ids_.end(), lmm);
  if (it == lmm_ids_.end()) throw Error(ErrorCode::kUnknownEntity, lmm);
  return static_cast<int>(it - lmm_ids_.begin());
}

ChainState& PseudonymSystem::records_chain(int j) {
  return config_.mode == ChainMode::kSingleChain ? network_->main_chain()
                                                 : network_->subchain(j);
}

const ChainState& PseudonymSystem::records_chain(int j) const {
  return config_.mode == ChainMode::kSingleChain ? network_->main_chain()
                                                 : network_->subchain(j);
}

std::vector<Bytes> PseudonymSystem::lmm_anchors() const {
  std::vector<Bytes> out;
  for (const auto& id : lmm_ids_) out.push_back(registry_->entity(id).keys.public_key);
  return out;
}

const Bytes& PseudonymSystem::public_key_of(const std::string& entity_id) const {
  return registry_->entity(entity_id).keys.public_key;
}

bool PseudonymSystem::pid_on_chain(const ChainState& chain, const std::string& pid) const {
  auto rec = chain.query_record(pid);
  return rec && rec->active();
}

Bytes PseudonymSystem::seal(const std::string& recipient_entity, const std::string& plaintext) {
  return seal_to_key(public_key_of(recipient_entity), plaintext);
}

Bytes PseudonymSystem::seal_to_key(const Bytes& public_key, const std::string& plaintext) {
  return crypto_->encrypt(public_key, as_bytes(plaintext)).value;
}

void PseudonymSystem::log_event(double t, std::string actor, std::string kind,
                                std::string detail) {
  events_.push_back({t, std::move(actor), std::move(kind), std::move(detail)});
}

void PseudonymSystem::log_audit(double t, std::string kind, std::string actor,
                                std::string detail) {
  audit_.push_back({t, std::move(kind), std::move(actor), std::move(detail)});
}

std::string PseudonymSystem::label(int handle) const {
  const Actor& a = actors_.at(handle);
  return fmt::format("{}#{}", a.identity.role == Role::kVt ? "vt" : "vmu", handle);
}

void PseudonymSystem::emit(ProtocolMessage msg, bool from_vehicle) {
  if (from_vehicle) {
    const bool leak = contains_text(msg.sender_pid, kVmuPrefix) ||
                      contains_text(msg.sender_pid, kVtPrefix) ||
                      by_true_id_.count(msg.sender_pid) > 0 ||
                      contains_text(msg.recipient, kVmuPrefix) ||
                      contains_text(msg.recipient, kVtPrefix) ||
                      (msg.body_is_cleartext && (contains_text(msg.body, kVmuPrefix) ||
                                                 contains_text(msg.body, kVtPrefix)));
    if (leak) ++cleartext_leaks_;
  }
  ++message_counts_[msg.kind];
  if (msg.kind != MessageKind::kSafetyBroadcast || config_.keep_broadcasts) {
    messages_.push_back(std::move(msg));
  }
}

std::uint64_t PseudonymSystem::message_count(MessageKind kind) const {
  auto it = message_counts_.find(kind);
  return it == message_counts_.end() ? 0 : it->second;
}

int PseudonymSystem::create_vmu(int location, std::optional<std::string> explicit_id) {
  if (location < 0 || location >= config_.metaverses) {
    throw Error(ErrorCode::kInvalidArgument, "location out of range");
  }
  const auto& ent = registry_->provision_entity(Role::kVmu, ta_id_, std::move(explicit_id));
  Actor a;
  a.handle = static_cast<int>(actors_.size());
  a.identity = ent.identity;
  a.location = location;
  by_true_id_[a.identity.id] = a.handle;
  actors_.push_back(std::move(a));
  return actors_.back().handle;
}

BootstrapResult PseudonymSystem::bootstrap_registration(int vmu, int j, double now_ms) {
  if (j < 0 || j >= config_.metaverses) throw Error(ErrorCode::kInvalidArgument, "bad metaverse");
  if (actors_.at(vmu).identity.role != Role::kVmu) {
    throw Error(ErrorCode::kInvalidArgument, "only a VMU registers");
  }
  if (actors_[vmu].partner) {
    throw Error(ErrorCode::kAlreadyRegistered, label(vmu) + " already registered");
  }
  const std::string& lmm = lmm_ids_[j];
  const auto& vt_entity = registry_->provision_entity(Role::kVt, lmm, std::nullopt, now_ms);

  Actor vt;
  vt.handle = static_cast<int>(actors_.size());
  vt.identity = vt_entity.identity;
  vt.location = j;
  vt.partner = vmu;
  by_true_id_[vt.identity.id] = vt.handle;
  actors_.push_back(std::move(vt));
  const int vt_handle = actors_.back().handle;
  Actor& a = actors_[vmu];
  a.partner = vt_handle;
  a.location = j;

  BootstrapResult out;
  out.vt = vt_handle;
  for (const auto& c : registry_->distribute(lmm, a.identity.id, config_.batch_w, now_ms)) {
    out.vmu_pids.push_back(c.pid);
  }
  for (const auto& c :
       registry_->distribute(lmm, actors_[vt_handle].identity.id, config_.batch_u, now_ms)) {
    out.vt_pids.push_back(c.pid);
  }
  a.credentials = out.vmu_pids;
  actors_[vt_handle].credentials = out.vt_pids;

  const auto& vmu_entity = registry_->entity(a.identity.id);
  json list = {{"issuer_lmm", lmm},
               {"vmu_pids", out.vmu_pids},
               {"vt_pids", out.vt_pids}};
  json entry = {{"true_id", a.identity.id},
                {"vt_true_id", vt_entity.identity.id},
                {"vmu_public_key", to_hex(vmu_entity.keys.public_key)},
                {"vt_public_key", to_hex(vt_entity.keys.public_key)},
                {"certificates",
                 {to_hex(vmu_entity.certificate.canonical_bytes()),
                  to_hex(vt_entity.certificate.canonical_bytes())}},
                {"issuer_lmm", lmm},
                {"vmu_pids", out.vmu_pids},
                {"vt_pids", out.vt_pids},
                {"timestamp_ms", now_ms}};

  std::vector<std::string> keys = out.vmu_pids;
  keys.insert(keys.end(), out.vt_pids.begin(), out.vt_pids.end());
  const Bytes sealed_entry = seal(ta_id_, entry.dump());

  if (config_.mode == ChainMode::kSingleChain) {
    Transaction tx = network_->make_tx(TxKind::kTrackingTableUpdate, es_ids_[j], keys,
                                       tx_tag::kTrackingTable, sealed_entry);
    out.record_tx = tx.id();
    out.tracking_tx = tx.id();
    network_->commit(network_->main_chain(), std::move(tx), now_ms);
  } else {
    Transaction tx = network_->make_tx(TxKind::kPseudonymRegistration, es_ids_[j], keys,
                                       tx_tag::kRecord, seal(lmm, list.dump()));
    out.record_tx = tx.id();
    network_->commit(network_->subchain(j), std::move(tx), now_ms);
    CrossChainRequest req{out.record_tx, keys, std::string(tx_tag::kTrackingTable),
                          sealed_entry, lmm};
    auto outcome = network_->cross_chain_transaction(CrossChainKind::kRegister, j,
                                                     ChainRef::main(), req, now_ms);
    out.tracking_tx = outcome.target_tx;
  }

  for (int k = 0; k < config_.metaverses; ++k) {
    ProtocolMessage push;
    push.kind = MessageKind::kTrackingListPush;
    push.sender_pid = ta_id_;
    push.recipient = lmm_ids_[k];
    push.body = seal(lmm_ids_[k], list.dump());
    push.timestamp_ms = now_ms;
    tracking_lists_[k].push_back(push.body);
    emit(std::move(push), false);
  }
  next_broadcast_[vmu] = now_ms;
  log_event(now_ms, label(vmu), "registration",
            fmt::format("metaverse={} vt={} w={} u={}", j, label(vt_handle),
                        config_.batch_w, config_.batch_u));
  return out;
}

ProtocolMessage PseudonymSystem::emit_broadcast(int vmu, double now_ms) {
  const Actor& a = actors_.at(vmu);
  const std::string* pid = a.active_pid();
  if (pid == nullptr) {
    throw Error(ErrorCode::kNoActivePseudonym, label(vmu) + " has no active pseudonym");
  }
  const PseudonymCredential& cred = registry_->credential(*pid);
  ProtocolMessage msg;
  msg.kind = MessageKind::kSafetyBroadcast;
  msg.sender_pid = *pid;
  msg.recipient = es_ids_[a.location];
  msg.body_is_cleartext = true;
  msg.timestamp_ms = now_ms;
  ByteWriter w;
  w.field(std::string_view(*pid)).f64(now_ms).i64(a.location);
  w.field(std::span<const std::uint8_t>(cred.certificate.canonical_bytes()));
  msg.body = w.bytes();
  msg.signature = crypto_->sign(cred.key_pair.private_key, msg.body).value;

  // Edge server check: signature under the pseudonym key, then the
  // pseudonym certificate under its issuer.
  const bool ok =
      crypto_->verify_signature(cred.certificate.subject_public_key, msg.body, msg.signature)
          .value &&
      crypto_->verify_certificate(cred.certificate, public_key_of(cred.certificate.issuer_id))
          .value;
  ok ? ++broadcasts_verified_ : ++broadcasts_rejected_;
  next_broadcast_[vmu] = now_ms + config_.broadcast_period_ms;
  ProtocolMessage copy = msg;
  emit(std::move(msg), true);
  return copy;
}

std::vector<ProtocolMessage> PseudonymSystem::safety_broadcast_tick(int vmu, double now_ms) {
  std::vector<ProtocolMessage> out;
  auto it = next_broadcast_.find(vmu);
  for (double t = it == next_broadcast_.end() ? 0.0 : it->second; t < now_ms;
       t += config_.broadcast_period_ms) {
    out.push_back(emit_broadcast(vmu, t));
  }
  return out;
}

PseudonymChange PseudonymSystem::synchronous_change(int vmu, double now_ms) {
  Actor& a = actors_.at(vmu);
  if (!a.partner) throw Error(ErrorCode::kInvalidArgument, label(vmu) + " is not registered");
  Actor& v = actors_.at(*a.partner);
  if (a.unused() == 0 || v.unused() == 0) {
    throw Error(ErrorCode::kExhausted,
                fmt::format("{} unused={} {} unused={}", label(vmu), a.unused(),
                            label(v.handle), v.unused()));
  }
  PseudonymChange ch;
  ch.time_ms = now_ms;
  ch.vmu = vmu;
  ch.location = a.location;
  auto advance = [&](Actor& x, std::string& old_pid, std::string& new_pid) {
    if (const std::string* cur = x.active_pid()) {
      old_pid = *cur;
      if (registry_->credential(*cur).status == CredentialStatus::kActive) {
        registry_->set_status(*cur, CredentialStatus::kConsumed);
      }
    }
    new_pid = x.credentials[x.cursor];
    registry_->set_status(new_pid, CredentialStatus::kActive);
  };
  advance(a, ch.old_vmu_pid, ch.new_vmu_pid);
  advance(v, ch.old_vt_pid, ch.new_vt_pid);
  ++a.cursor;
  ++v.cursor;
  log_event(now_ms, label(vmu), "change",
            fmt::format("{} -> {} (vt {} -> {})", ch.old_vmu_pid, ch.new_vmu_pid,
                        ch.old_vt_pid, ch.new_vt_pid));
  return ch;
}

void PseudonymSystem::drop(DistributionResult& out, double now_ms, const std::string& actor,
                           std::string reason) {
  out.replied = false;
  out.drop_reason = reason;
  log_audit(now_ms, "silent-drop", actor, std::move(reason));
}

void PseudonymSystem::finish_delay(DistributionResult& out, double crypto_before) const {
  DelayLeg crypto{"crypto", "aggregate", 0.0};
  if (config_.accounting == CryptoAccounting::kPerOperation) {
    crypto.label = "per-operation";
    crypto.ms = crypto_->meter().total_ms - crypto_before;
  } else {
    crypto.ms = config_.mode == ChainMode::kSingleChain ? config_.aggregate.single_chain_ms
                                                        : config_.aggregate.cross_chain_ms;
  }
  out.legs.insert(out.legs.begin(), crypto);
  out.delay = {};
  for (const auto& leg : out.legs) {
    if (leg.component == "crypto") out.delay.crypto_ms += leg.ms;
    if (leg.component == "communication") out.delay.communication_ms += leg.ms;
    if (leg.component == "chain") out.delay.chain_ms += leg.ms;
  }
}

std::optional<PseudonymSystem::RequestContext> PseudonymSystem::receive_request(
    int vmu, int serving, double now_ms, DistributionResult& out) {
  const Actor& a = actors_.at(vmu);
  if (!a.partner) throw Error(ErrorCode::kInvalidArgument, label(vmu) + " is not registered");
  const Actor& v = actors_.at(*a.partner);
  if (!a.active_pid() || !v.active_pid()) {
    throw Error(ErrorCode::kNoActivePseudonym, label(vmu) + " has no active pseudonym");
  }
  RequestContext ctx{vmu, v.handle, *a.active_pid(), *v.active_pid(),
                     crypto_->meter().total_ms};
  const bool single = config_.mode == ChainMode::kSingleChain;
  const std::string& server = single ? ta_id_ : lmm_ids_[serving];

  json request = {{"vmu_pid", ctx.vmu_pid},
                  {"vt_pid", ctx.vt_pid},
                  {"demand_vmu", config_.batch_w},
                  {"demand_vt", config_.batch_u},
                  {"timestamp_ms", now_ms}};
  const Bytes plain = as_bytes(request.dump());
  const auto& vmu_cred = registry_->credential(ctx.vmu_pid);
  const auto& vt_cred = registry_->credential(ctx.vt_pid);
  const Bytes sig_vmu = crypto_->sign(vmu_cred.key_pair.private_key, plain).value;
  const Bytes sig_vt = crypto_->sign(vt_cred.key_pair.private_key, plain).value;

  ProtocolMessage msg;
  msg.kind = MessageKind::kPseuRequest;
  msg.sender_pid = ctx.vmu_pid;
  msg.recipient = es_ids_[a.location];
  msg.body = crypto_->encrypt(public_key_of(server), plain).value;
  msg.timestamp_ms = now_ms;
  msg.signature = sig_vmu;
  const Bytes body = msg.body;
  emit(std::move(msg), true);
  out.legs.push_back({"communication", "vmu->es", config_.latency.vmu_to_es_ms});
  out.legs.push_back({"communication", single ? "es->ta" : "es->lmm",
                      single ? config_.latency.es_to_ta_ms : config_.latency.es_to_lmm_ms});
  record_demand(serving, static_cast<int>(now_ms / config_.slot_ms),
                config_.batch_w + config_.batch_u);

  auto opened = crypto_->decrypt(registry_->entity(server).keys.private_key, body).value;
  if (!opened) {
    drop(out, now_ms, server, "request not decryptable");
    return std::nullopt;
  }
  if (blacklist_.contains_pid(ctx.vmu_pid) || blacklist_.contains_pid(ctx.vt_pid)) {
    drop(out, now_ms, server, "requester blacklisted");
    return std::nullopt;
  }
  const bool sigs_ok =
      crypto_->verify_signature(vmu_cred.certificate.subject_public_key, *opened, sig_vmu)
          .value &&
      crypto_->verify_signature(vt_cred.certificate.subject_public_key, *opened, sig_vt).value;
  const auto anchors = lmm_anchors();
  if (!sigs_ok || !verify_credential(*crypto_, vmu_cred, anchors) ||
      !verify_credential(*crypto_, vt_cred, anchors)) {
    drop(out, now_ms, server, "signature or credential verification failed");
    return std::nullopt;
  }
  return ctx;
}

void PseudonymSystem::deliver(RequestContext& ctx, int serving, double now_ms,
                              DistributionResult& out) {
  const std::string& lmm = lmm_ids_[serving];
  Actor& a = actors_[ctx.vmu];
  Actor& v = actors_[ctx.vt];
  int minted_vmu = 0;
  int minted_vt = 0;
  auto vmu_new = registry_->distribute(lmm, a.identity.id, config_.batch_w, now_ms, &minted_vmu);
  auto vt_new = registry_->distribute(lmm, v.identity.id, config_.batch_u, now_ms, &minted_vt);
  out.minted_on_demand = minted_vmu + minted_vt;

  std::vector<std::string> vmu_pids, vt_pids;
  for (const auto& c : vmu_new) vmu_pids.push_back(c.pid);
  for (const auto& c : vt_new) vt_pids.push_back(c.pid);

  // Replies are sealed to the requesting pseudonym keys.
  auto reply = [&](const std::string& to_pid, const std::vector<std::string>& pids) {
    const auto& cred = registry_->credential(to_pid);
    ProtocolMessage msg;
    msg.kind = MessageKind::kPseuReply;
    msg.sender_pid = lmm;
    msg.recipient = to_pid;
    msg.body = seal_to_key(cred.key_pair.public_key, json{{"pids", pids}}.dump());
    msg.timestamp_ms = now_ms;
    msg.signature = crypto_->sign(registry_->entity(lmm).keys.private_key, msg.body).value;
    auto opened = crypto_->decrypt(cred.key_pair.private_key, msg.body).value;
    if (!opened) throw Error(ErrorCode::kInvalidArgument, "reply not decryptable");
    emit(std::move(msg), false);
  };
  reply(ctx.vmu_pid, vmu_pids);
  reply(ctx.vt_pid, vt_pids);
  out.legs.push_back({"communication", config_.mode == ChainMode::kSingleChain ? "ta->es" : "lmm->es",
                      config_.mode == ChainMode::kSingleChain ? config_.latency.es_to_ta_ms
                                                              : config_.latency.es_to_lmm_ms});
  out.legs.push_back({"communication", "es->vmu", config_.latency.vmu_to_es_ms});
  finish_delay(out, ctx.crypto_before);
  out.replied = true;
  out.vmu_received = static_cast<int>(vmu_pids.size());
  out.vt_received = static_cast<int>(vt_pids.size());
  out.serving_metaverse = serving;

  a.credentials.insert(a.credentials.end(), vmu_pids.begin(), vmu_pids.end());
  v.credentials.insert(v.credentials.end(), vt_pids.begin(), vt_pids.end());

  // Ledger bookkeeping after the reply.
  const double at = now_ms + out.delay.total_ms();
  std::vector<std::string> keys = vmu_pids;
  keys.insert(keys.end(), vt_pids.begin(), vt_pids.end());
  json entry = {{"prev_vmu_pid", ctx.vmu_pid},
                {"prev_vt_pid", ctx.vt_pid},
                {"issuer_lmm", lmm},
                {"vmu_pids", vmu_pids},
                {"vt_pids", vt_pids},
                {"timestamp_ms", at}};
  const Bytes sealed_entry = seal(ta_id_, entry.dump());
  if (config_.mode == ChainMode::kSingleChain) {
    Transaction tx = network_->make_tx(TxKind::kTrackingTableUpdate, es_ids_[serving], keys,
                                       tx_tag::kTrackingTable, sealed_entry);
    network_->commit(network_->main_chain(), std::move(tx), at);
  } else {
    json list = {{"issuer_lmm", lmm}, {"vmu_pids", vmu_pids}, {"vt_pids", vt_pids}};
    Transaction tx = network_->make_tx(TxKind::kPseudonymRegistration, es_ids_[serving], keys,
                                       tx_tag::kRecord, seal(lmm, list.dump()));
    const Digest record = tx.id();
    network_->commit(network_->subchain(serving), std::move(tx), at);
    CrossChainRequest req{record, keys, std::string(tx_tag::kTrackingTable), sealed_entry, lmm};
    network_->cross_chain_transaction(CrossChainKind::kRegister, serving, ChainRef::main(), req,
                                      at);
  }
}

DistributionResult PseudonymSystem::request_pseudonyms(int vmu, double now_ms) {
  const Actor& a = actors_.at(vmu);
  if (config_.mode == ChainMode::kCrossChain && a.active_pid()) {
    const auto& issuer = registry_->credential(*a.active_pid()).issuer_lmm;
    if (metaverse_of_lmm(issuer) != a.location) return cross_district_distribution(vmu, now_ms);
  }
  return local_distribution(vmu, now_ms);
}

DistributionResult PseudonymSystem::local_distribution(int vmu, double now_ms) {
  DistributionResult out;
  out.path = DistributionPath::kLocal;
  const int j = actors_.at(vmu).location;
  out.serving_metaverse = j;
  auto ctx = receive_request(vmu, j, now_ms, out);
  if (!ctx) return out;
  const std::string& server =
      config_.mode == ChainMode::kSingleChain ? ta_id_ : lmm_ids_[j];
  if (!pid_on_chain(records_chain(j), ctx->vmu_pid) ||
      !pid_on_chain(records_chain(j), ctx->vt_pid)) {
    drop(out, now_ms, server, "identity not recorded on " + records_chain(j).id());
    return out;
  }
  out.legs.push_back({"chain",
                      config_.mode == ChainMode::kSingleChain ? "single-chain lookup"
                                                              : "subchain lookup",
                      config_.mode == ChainMode::kSingleChain
                          ? config_.verification.single_chain_lookup_ms
                          : config_.verification.subchain_lookup_ms});
  deliver(*ctx, j, now_ms, out);
  log_event(now_ms, label(vmu), "local-distribution",
            fmt::format("lmm={} delay_ms={:.3f}", j, out.delay.total_ms()));
  return out;
}

DistributionResult PseudonymSystem::cross_district_distribution(int vmu, double now_ms,
                                                                std::optional<int> claimed_origin) {
  if (config_.mode != ChainMode::kCrossChain) {
    throw Error(ErrorCode::kInvalidArgument, "cross-district distribution needs subchains");
  }
  DistributionResult out;
  out.path = DistributionPath::kCrossDistrict;
  const Actor& a = actors_.at(vmu);
  const int m = a.location;
  out.serving_metaverse = m;
  if (!a.active_pid()) {
    throw Error(ErrorCode::kNoActivePseudonym, label(vmu) + " has no active pseudonym");
  }
  const int origin = claimed_origin.value_or(
      metaverse_of_lmm(registry_->credential(*a.active_pid()).issuer_lmm));
  if (origin == m) {
    throw Error(ErrorCode::kInvalidArgument, "origin equals the serving metaverse");
  }
  auto ctx = receive_request(vmu, m, now_ms, out);
  if (!ctx) return out;
  const std::string& lmm_m = lmm_ids_[m];
  const ChainState& local = network_->subchain(m);
  if (local.query_record(ctx->vmu_pid) || local.query_record(ctx->vt_pid)) {
    drop(out, now_ms, lmm_m, "identities already present on " + local.id());
    return out;
  }

  // Source transaction on SC_m for the notary; pids travel in the body only
  // so the local lookup above stays meaningful for later requests.
  json query = {{"vmu_pid", ctx->vmu_pid}, {"vt_pid", ctx->vt_pid}, {"origin", origin}};
  Transaction src = network_->make_tx(TxKind::kCrossChainRequest, lmm_m, {}, "verify-request",
                                      as_bytes(query.dump()));
  const Digest src_id = src.id();
  network_->commit(network_->subchain(m), std::move(src), now_ms);

  ProtocolMessage q;
  q.kind = MessageKind::kCrossVerifyQuery;
  q.sender_pid = lmm_m;
  q.recipient = lmm_ids_[origin];
  q.body = seal(lmm_ids_[origin], query.dump());
  q.timestamp_ms = now_ms;
  emit(std::move(q), false);

  CrossChainRequest req{src_id, {ctx->vmu_pid, ctx->vt_pid}, "verify", {}, lmm_m};
  CrossChainOutcome outcome = network_->cross_chain_transaction(
      CrossChainKind::kVerify, m, ChainRef::subchain(origin), req, now_ms);
  out.verify = outcome;
  out.legs.push_back({"chain", "notary", outcome.notary_ms});
  out.legs.push_back({"chain", "relay consensus", outcome.relay_ms});
  out.legs.push_back({"chain", "origin lookup", outcome.target_ms});
  out.legs.push_back({"chain", "inter-chain links", outcome.link_ms});

  ProtocolMessage ans;
  ans.kind = MessageKind::kCrossVerifyAnswer;
  ans.sender_pid = lmm_ids_[origin];
  ans.recipient = lmm_m;
  ans.body = seal(lmm_m, json{{"answer", outcome.answer}}.dump());
  ans.timestamp_ms = now_ms + outcome.elapsed_ms();
  emit(std::move(ans), false);

  if (!outcome.answer) {
    out.abnormal = true;
    ++abnormal_reports_;
    ProtocolMessage report;
    report.kind = MessageKind::kReport;
    report.sender_pid = lmm_m;
    report.recipient = ta_id_;
    report.body = seal(ta_id_, json{{"abnormal", query}}.dump());
    report.timestamp_ms = now_ms;
    emit(std::move(report), false);
    finish_delay(out, ctx->crypto_before);
    drop(out, now_ms, lmm_m, fmt::format("origin SC{} answered false", origin));
    log_audit(now_ms, "abnormal-origin", lmm_m,
              fmt::format("{} claimed origin SC{}", ctx->vmu_pid, origin));
    return out;
  }

  // Origin stops updating the migrants' records.
  std::vector<std::string> frozen;
  for (int h : {ctx->vmu, ctx->vt}) {
    for (const auto& pid : actors_[h].credentials) {
      if (registry_->credential(pid).issuer_lmm == lmm_ids_[origin]) frozen.push_back(pid);
    }
  }
  Transaction freeze = network_->make_tx(TxKind::kTrackingTableUpdate, lmm_ids_[origin], frozen,
                                         tx_tag::kFreeze, {});
  network_->commit(network_->subchain(origin), std::move(freeze), now_ms + outcome.elapsed_ms());

  deliver(*ctx, m, now_ms, out);
  log_event(now_ms, label(vmu), "cross-district-distribution",
            fmt::format("origin={} lmm={} delay_ms={:.3f}", origin, m, out.delay.total_ms()));
  return out;
}

DistributionResult PseudonymSystem::forged_request(int j, double now_ms) {
  DistributionResult out;
  out.path = DistributionPath::kLocal;
  out.serving_metaverse = j;
  const bool single = config_.mode == ChainMode::kSingleChain;
  const std::string& server = single ? ta_id_ : lmm_ids_.at(j);
  KeyPair forged = crypto_->generate_key_pair();
  const std::string pid = fmt::format("pid-forged{:06d}", forged_counter_++);
  json request = {{"vmu_pid", pid}, {"vt_pid", pid}, {"timestamp_ms", now_ms}};
  const Bytes plain = as_bytes(request.dump());
  ProtocolMessage msg;
  msg.kind = MessageKind::kPseuRequest;
  msg.sender_pid = pid;
  msg.recipient = es_ids_[j];
  msg.body = crypto_->encrypt(public_key_of(server), plain).value;
  msg.signature = crypto_->sign(forged.private_key, plain).value;
  msg.timestamp_ms = now_ms;
  const Bytes body = msg.body;
  const Bytes sig = msg.signature;
  emit(std::move(msg), true);
  out.legs.push_back({"communication", "vmu->es", config_.latency.vmu_to_es_ms});

  auto opened = crypto_->decrypt(registry_->entity(server).keys.private_key, body).value;
  if (!opened || !crypto_->verify_signature(forged.public_key, *opened, sig).value) {
    drop(out, now_ms, server, "forged request malformed");
    return out;
  }
  if (!pid_on_chain(records_chain(j), pid)) {
    drop(out, now_ms, server, "identity not recorded on " + records_chain(j).id());
    return out;
  }
  throw Error(ErrorCode::kInvalidArgument, "forged identity unexpectedly on chain");
}

RevocationResult PseudonymSystem::dual_revocation(int reporter, const std::string& accused_pid,
                                                  const std::string& misbehavior, double now_ms) {
  RevocationResult out;
  const Actor& r = actors_.at(reporter);
  const std::string* rpid = r.active_pid();
  if (!rpid) throw Error(ErrorCode::kNoActivePseudonym, label(reporter) + " cannot report");
  const std::string reporter_pid = *rpid;
  const int j = r.location;
  const std::string& lmm = lmm_ids_[j];
  auto silent = [&](const std::string& who, std::string reason) {
    out.drop_reason = reason;
    log_audit(now_ms, "silent-drop", who, std::move(reason));
    return out;
  };

  json report = {{"accused_pid", accused_pid},
                 {"misbehavior", misbehavior},
                 {"reporter_pid", reporter_pid},
                 {"timestamp_ms", now_ms}};
  const Bytes plain = as_bytes(report.dump());
  const auto& rcred = registry_->credential(reporter_pid);
  ProtocolMessage msg;
  msg.kind = MessageKind::kReport;
  msg.sender_pid = reporter_pid;
  msg.recipient = es_ids_[j];
  msg.body = seal(lmm, report.dump());
  msg.signature = crypto_->sign(rcred.key_pair.private_key, plain).value;
  msg.timestamp_ms = now_ms;
  const Bytes body = msg.body;
  const Bytes sig = msg.signature;
  emit(std::move(msg), true);

  auto opened = crypto_->decrypt(registry_->entity(lmm).keys.private_key, body).value;
  if (!opened) return silent(lmm, "report not decryptable");
  if (blacklist_.contains_pid(reporter_pid)) return silent(lmm, "reporter blacklisted");
  if (!crypto_->verify_signature(rcred.certificate.subject_public_key, *opened, sig).value ||
      !verify_credential(*crypto_, rcred, lmm_anchors())) {
    return silent(lmm, "reporter credential invalid");
  }

  const Bytes sealed = seal(ta_id_, report.dump());
  Transaction tx = network_->make_tx(TxKind::kReport, es_ids_[j], {accused_pid},
                                     tx_tag::kReport, sealed);
  const Digest report_tx = tx.id();
  network_->commit(records_chain(j), std::move(tx), now_ms);
  Bytes at_ta = sealed;
  if (config_.mode == ChainMode::kCrossChain) {
    CrossChainRequest req{report_tx, {accused_pid}, std::string(tx_tag::kReport), sealed, lmm};
    auto outcome = network_->cross_chain_transaction(CrossChainKind::kRevoke, j,
                                                     ChainRef::main(), req, now_ms);
    if (outcome.target_tx) {
      auto loc = network_->main_chain().find_tx(*outcome.target_tx);
      at_ta = network_->main_chain().tx_at(*loc).body;
    }
  }
  out.delivered = true;

  auto ta_plain = crypto_->decrypt(registry_->entity(ta_id_).keys.private_key, at_ta).value;
  if (!ta_plain) return silent(ta_id_, "report not decryptable by TA");
  const json got = json::parse(ta_plain->begin(), ta_plain->end());
  const ActorView ta = ta_view();
  auto reporter_id = resolve_true_id(ta, got.at("reporter_pid").get<std::string>());
  if (!reporter_id) return silent(ta_id_, "reporter not in tracking table");
  if (is_restricted(*reporter_id)) return silent(ta_id_, "reporting right restricted");
  auto accused_id = resolve_true_id(ta, got.at("accused_pid").get<std::string>());
  if (!accused_id) return silent(ta_id_, "accused pseudonym not in tracking table");

  int accused = by_true_id_.at(*accused_id);
  if (actors_[accused].identity.role == Role::kVt) accused = *actors_[accused].partner;
  Actor& av = actors_[accused];
  Actor& at = actors_[*av.partner];

  if (!av.malicious) {
    const int rvmu = r.identity.role == Role::kVt ? *r.partner : reporter;
    restricted_.insert(actors_[rvmu].identity.id);
    restricted_.insert(actors_[*actors_[rvmu].partner].identity.id);
    log_audit(now_ms, "restriction", ta_id_,
              fmt::format("{} reported {} without confirmation", label(rvmu), accused_pid));
    return out;
  }

  out.confirmed = true;
  BlacklistEntry entry{av.identity.id, at.identity.id, now_ms, misbehavior, {}};
  for (Actor* x : {&av, &at}) {
    for (const auto& pid : x->credentials) {
      entry.pids.insert(pid);
      if (registry_->credential(pid).status != CredentialStatus::kRevoked) {
        registry_->set_status(pid, CredentialStatus::kRevoked);
        ++out.revoked_credentials;
      }
    }
    x->removed = true;
  }
  std::vector<std::string> pids(entry.pids.begin(), entry.pids.end());
  std::vector<ChainState*> targets{&network_->main_chain()};
  if (config_.mode == ChainMode::kCrossChain) {
    for (int k = 0; k < config_.metaverses; ++k) targets.push_back(&network_->subchain(k));
  }
  for (ChainState* chain : targets) {
    std::vector<std::string> here;
    for (const auto& pid : pids) {
      if (!chain->locations_with_key(pid).empty()) here.push_back(pid);
    }
    if (here.empty()) continue;
    Transaction marker = network_->make_tx(TxKind::kTrackingTableUpdate, ta_id_, here,
                                           tx_tag::kRevoke, {});
    network_->commit(*chain, std::move(marker), now_ms);
  }
  json notice = {{"true_id", av.identity.id},
                 {"vt_true_id", at.identity.id},
                 {"vmu_pids", av.credentials},
                 {"vt_pids", at.credentials},
                 {"reason", misbehavior}};
  for (int k = 0; k < config_.metaverses; ++k) {
    ProtocolMessage n;
    n.kind = MessageKind::kRevocationNotice;
    n.sender_pid = ta_id_;
    n.recipient = es_ids_[k];
    n.body = seal(es_ids_[k], notice.dump());
    n.timestamp_ms = now_ms;
    es_notices_[k].push_back(n.body);
    emit(std::move(n), false);
  }
  blacklist_.add(std::move(entry));
  log_audit(now_ms, "revocation", ta_id_,
            fmt::format("{} and {} blacklisted ({}), {} credentials revoked", label(av.handle),
                        label(at.handle), misbehavior, out.revoked_credentials));
  return out;
}

int PseudonymSystem::aggregate_demand(int j, int slot) const {
  auto it = demand_.find({j, slot});
  return it == demand_.end() ? 0 : it->second;
}

void PseudonymSystem::record_demand(int j, int slot, int count) {
  if (count < 0) throw Error(ErrorCode::kInvalidArgument, "demand must be >= 0");
  demand_[{j, slot}] += count;
}

void PseudonymSystem::migrate(int vmu, int to, double now_ms) {
  if (to < 0 || to >= config_.metaverses) throw Error(ErrorCode::kInvalidArgument, "bad target");
  Actor& a = actors_.at(vmu);
  const int from = a.location;
  a.location = to;
  if (a.partner) actors_[*a.partner].location = to;
  log_event(now_ms, label(vmu), "migration", fmt::format("{} -> {}", from, to));
}

std::vector<int> PseudonymSystem::vmus() const {
  std::vector<int> out;
  for (const Actor& a : actors_) {
    if (a.identity.role == Role::kVmu) out.push_back(a.handle);
  }
  return out;
}

std::vector<int> PseudonymSystem::roster(int j) const {
  std::vector<int> out;
  for (const Actor& a : actors_) {
    if (a.identity.role == Role::kVt && a.location == j && !a.removed) out.push_back(a.handle);
  }
  return out;
}

std::optional<int> PseudonymSystem::actor_by_true_id(const std::string& id) const {
  auto it = by_true_id_.find(id);
  if (it == by_true_id_.end()) return std::nullopt;
  return it->second;
}

ActorView PseudonymSystem::ta_view() const {
  ActorView v{ViewKind::kTa, ta_id_, network_->all_chains(),
              {registry_->entity(ta_id_).keys.private_key}, {}, {}};
  return v;
}

ActorView PseudonymSystem::lmm_view(int j) const {
  return {ViewKind::kLmm, lmm_ids_.at(j), network_->all_chains(),
          {registry_->entity(lmm_ids_[j]).keys.private_key}, tracking_lists_.at(j), {}};
}

ActorView PseudonymSystem::es_view(int j) const {
  return {ViewKind::kEdgeServer, es_ids_.at(j), network_->all_chains(),
          {registry_->entity(es_ids_[j]).keys.private_key}, es_notices_.at(j), {}};
}

ActorView PseudonymSystem::actor_view(int handle) const {
  const Actor& a = actors_.at(handle);
  ActorView v{a.identity.role == Role::kVt ? ViewKind::kVt : ViewKind::kVmu, label(handle),
              network_->all_chains(), {registry_->entity(a.identity.id).keys.private_key}, {}, {}};
  for (const auto& pid : a.credentials) {
    v.private_keys.push_back(registry_->credential(pid).key_pair.private_key);
  }
  return v;
}

std::optional<std::string> PseudonymSystem::resolve_true_id(const ActorView& view,
                                                            const std::string& pid) const {
  const CryptoProvider& provider = crypto_->provider();
  auto open_bytes = [&](const Bytes& ct) -> std::optional<Bytes> {
    for (const Bytes& key : view.private_keys) {
      if (auto pt = provider.decrypt(key, ct)) return pt;
    }
    return std::nullopt;
  };
  auto parse = [](const std::optional<Bytes>& pt) -> std::optional<json> {
    if (!pt) return std::nullopt;
    json doc = json::parse(pt->begin(), pt->end(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
    return doc;
  };
  if (!view.opened) {
    view.opened.emplace();
    for (const Bytes& doc : view.documents) view.opened->push_back(open_bytes(doc));
  }
  auto lists = [](const json& doc, const char* field, const std::string& p) {
    if (!doc.contains(field) || !doc[field].is_array()) return false;
    for (const auto& x : doc[field]) {
      if (x.is_string() && x.get<std::string>() == p) return true;
    }
    return false;
  };
  // Returns the true id, or the previous pid to follow, from one document.
  auto step = [&](const json& doc, const std::string& p,
                  std::optional<std::string>& prev) -> std::optional<std::string> {
    for (auto [side, id_field, prev_field] :
         {std::tuple{"vmu_pids", "true_id", "prev_vmu_pid"},
          std::tuple{"vt_pids", "vt_true_id", "prev_vt_pid"}}) {
      if (!lists(doc, side, p)) continue;
      if (doc.contains(id_field)) return doc[id_field].get<std::string>();
      if (doc.contains(prev_field)) prev = doc[prev_field].get<std::string>();
    }
    return std::nullopt;
  };

  std::string current = pid;
  std::set<std::string> seen;
  while (seen.insert(current).second) {
    std::optional<std::string> prev;
    for (const auto& pt : *view.opened) {
      if (!pt || pt->end() == std::search(pt->begin(), pt->end(), current.begin(),
                                          current.end())) {
        continue;
      }
      if (auto j = parse(pt)) {
        if (auto id = step(*j, current, prev)) return id;
      }
    }
    for (const ChainState* chain : view.chains) {
      for (const TxLocation& loc : chain->locations_with_key(current)) {
        if (auto j = parse(open_bytes(chain->tx_at(loc).body))) {
          if (auto id = step(*j, current, prev)) return id;
        }
      }
    }
    if (!prev) return std::nullopt;
    current = *prev;
  }
  return std::nullopt;
}

double adversary_tracking_probability(const std::vector<ChangeObservation>& observed,
                                      std::size_t target, double window_ms) {
  if (target >= observed.size()) throw Error(ErrorCode::kInvalidArgument, "bad target");
  const ChangeObservation& t = observed[target];
  std::set<int> candidates;
  for (const auto& o : observed) {
    if (o.location == t.location && std::abs(o.time_ms - t.time_ms) <= window_ms) {
      candidates.insert(o.pair);
    }
  }
  return 1.0 / static_cast<double>(candidates.size());
}

}  // namespace pseudochain
