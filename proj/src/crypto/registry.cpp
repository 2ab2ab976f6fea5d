#include "pseudochain/crypto/registry.hpp"

#include <algorithm>
#include <cstdio>

#include "pseudochain/common/error.hpp"

namespace pseudochain {

IdentityRegistry::IdentityRegistry(CryptoEngine& crypto, RegistryConfig config)
    : crypto_(crypto),
      config_(config),
      rng_(make_rng(config.seed, "identity-registry")) {}

Certificate IdentityRegistry::issue_certificate(const ProvisionedEntity& issuer,
                                                const Bytes& subject_key,
                                                double now_ms) {
  Certificate cert;
  cert.subject_public_key = subject_key;
  cert.issuer_id = issuer.identity.id;
  cert.issued_at_ms = now_ms;
  cert.issuer_signature =
      crypto_.provider().sign(issuer.keys.private_key, cert.signed_payload());
  return cert;
}

std::string IdentityRegistry::fresh_id(Role role) {
  for (;;) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "ID-%s-%06llu",
                  std::string(to_string(role)).c_str(),
                  static_cast<unsigned long long>(++role_counters_[role]));
    if (!entities_.count(buf)) return buf;
  }
}

std::string IdentityRegistry::fresh_pid() {
  for (;;) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "pid-%016llx",
                  static_cast<unsigned long long>(rng_()));
    if (!credentials_.count(buf) && !entities_.count(buf)) return buf;
  }
}

const ProvisionedEntity& IdentityRegistry::create_trusted_authority(
    std::string id) {
  if (entities_.count(id)) {
    throw Error(ErrorCode::kDuplicateIdentity, id);
  }
  ProvisionedEntity ta;
  ta.identity = {id, Role::kTa};
  ta.keys = crypto_.generate_key_pair();
  ta.certificate = issue_certificate(ta, ta.keys.public_key, 0.0);
  return entities_.emplace(id, std::move(ta)).first->second;
}

const ProvisionedEntity& IdentityRegistry::provision_entity(
    Role role, const std::string& authority_id,
    std::optional<std::string> explicit_id, double now_ms) {
  auto auth = entities_.find(authority_id);
  if (auth == entities_.end()) {
    throw Error(ErrorCode::kUnknownEntity, authority_id);
  }
  const Role issuer_role = auth->second.identity.role;
  const bool authorized =
      (issuer_role == Role::kTa && role != Role::kTa) ||
      (issuer_role == Role::kLmm && role == Role::kVt);
  if (!authorized) {
    throw Error(ErrorCode::kUnauthorizedIssuer,
                std::string(to_string(issuer_role)) + " cannot provision " +
                    std::string(to_string(role)));
  }
  std::string id = explicit_id ? *explicit_id : fresh_id(role);
  if (entities_.count(id)) {
    throw Error(ErrorCode::kDuplicateIdentity, id);
  }
  ProvisionedEntity entity;
  entity.identity = {id, role};
  entity.keys = crypto_.generate_key_pair();
  entity.certificate =
      issue_certificate(auth->second, entity.keys.public_key, now_ms);
  return entities_.emplace(id, std::move(entity)).first->second;
}

std::vector<PseudonymCredential> IdentityRegistry::mint_pseudonym_batch(
    const std::string& issuer_id, const std::optional<std::string>& owner,
    int count, double now_ms) {
  auto issuer = entities_.find(issuer_id);
  if (issuer == entities_.end()) {
    throw Error(ErrorCode::kUnknownEntity, issuer_id);
  }
  if (issuer->second.identity.role != Role::kLmm) {
    throw Error(ErrorCode::kUnauthorizedIssuer,
                "only an LMM mints pseudonyms: " + issuer_id);
  }
  if (count < 1) {
    throw Error(ErrorCode::kInvalidArgument, "mint count must be >= 1");
  }
  auto& pool = pools_[issuer_id];
  if (pool.size() + static_cast<std::size_t>(count) > config_.pool_capacity) {
    throw Error(ErrorCode::kPoolCapacityExceeded,
                issuer_id + " pool " + std::to_string(pool.size()) + " + " +
                    std::to_string(count) + " > " +
                    std::to_string(config_.pool_capacity));
  }
  std::vector<PseudonymCredential> minted;
  minted.reserve(count);
  for (int i = 0; i < count; ++i) {
    PseudonymCredential cred;
    cred.pid = fresh_pid();
    cred.key_pair = crypto_.generate_key_pair();
    cred.certificate =
        issue_certificate(issuer->second, cred.key_pair.public_key, now_ms);
    cred.issuer_lmm = issuer_id;
    cred.owner = owner;
    pool.push_back(cred.pid);
    credentials_.emplace(cred.pid, CredentialRecord{cred, false});
    minted.push_back(std::move(cred));
  }
  return minted;
}

std::vector<PseudonymCredential> IdentityRegistry::distribute(
    const std::string& issuer_id, const std::string& owner, int count,
    double now_ms, int* minted_on_demand) {
  auto& pool = pools_[issuer_id];
  int shortfall = std::max(0, count - static_cast<int>(pool.size()));
  if (shortfall > 0) {
    // Room is guaranteed: the pool holds fewer than `count` entries.
    mint_pseudonym_batch(issuer_id, std::nullopt, shortfall, now_ms);
  }
  if (minted_on_demand) *minted_on_demand = shortfall;
  std::vector<PseudonymCredential> out;
  out.reserve(count);
  auto& issued = issued_by_[issuer_id];
  for (int i = 0; i < count; ++i) {
    std::string pid = pool.front();
    pool.pop_front();
    auto& rec = credentials_.at(pid);
    rec.credential.owner = owner;
    rec.distributed = true;
    issued.push_back(pid);
    out.push_back(rec.credential);
  }
  return out;
}

void IdentityRegistry::set_status(const std::string& pid,
                                  CredentialStatus status) {
  auto it = credentials_.find(pid);
  if (it == credentials_.end()) {
    throw Error(ErrorCode::kUnknownEntity, pid);
  }
  it->second.credential.transition_to(status);
}

const ProvisionedEntity& IdentityRegistry::entity(const std::string& id) const {
  auto it = entities_.find(id);
  if (it == entities_.end()) throw Error(ErrorCode::kUnknownEntity, id);
  return it->second;
}

std::vector<std::string> IdentityRegistry::ids_with_role(Role role) const {
  std::vector<std::string> out;
  for (const auto& [id, e] : entities_) {
    if (e.identity.role == role) out.push_back(id);
  }
  return out;
}

const PseudonymCredential& IdentityRegistry::credential(
    const std::string& pid) const {
  auto it = credentials_.find(pid);
  if (it == credentials_.end()) throw Error(ErrorCode::kUnknownEntity, pid);
  return it->second.credential;
}

std::size_t IdentityRegistry::pool_size(const std::string& issuer_id) const {
  auto it = pools_.find(issuer_id);
  return it == pools_.end() ? 0 : it->second.size();
}

IssuanceStats IdentityRegistry::issuance_stats(
    const std::string& issuer_id) const {
  IssuanceStats stats;
  auto it = issued_by_.find(issuer_id);
  if (it == issued_by_.end()) return stats;
  for (const auto& pid : it->second) {
    ++stats.issued;
    switch (credentials_.at(pid).credential.status) {
      case CredentialStatus::kUnused: ++stats.unused; break;
      case CredentialStatus::kActive: ++stats.active; break;
      case CredentialStatus::kConsumed: ++stats.consumed; break;
      case CredentialStatus::kRevoked: ++stats.revoked; break;
    }
  }
  return stats;
}

bool verify_credential(CryptoEngine& crypto,
                       const PseudonymCredential& credential,
                       std::span<const Bytes> trust_anchors) {
  if (credential.status == CredentialStatus::kRevoked) return false;
  if (credential.certificate.subject_public_key !=
      credential.key_pair.public_key) {
    return false;
  }
  for (const Bytes& anchor : trust_anchors) {
    if (crypto.verify_certificate(credential.certificate, anchor).value) {
      return true;
    }
  }
  return false;
}

}  // namespace pseudochain
