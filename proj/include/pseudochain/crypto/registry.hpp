#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pseudochain/common/rng.hpp"
#include "pseudochain/crypto/engine.hpp"
#include "pseudochain/crypto/identity.hpp"

namespace pseudochain {

struct ProvisionedEntity {
  TrueIdentity identity;
  KeyPair keys;
  Certificate certificate;
};

struct RegistryConfig {
  // Default is 10 * G_max with G_max = 120.
  std::size_t pool_capacity = 1200;
  std::uint64_t seed = 0;
};

// Per-LMM credential accounting used by the conservation audit.
struct IssuanceStats {
  std::size_t issued = 0;
  std::size_t unused = 0;
  std::size_t active = 0;
  std::size_t consumed = 0;
  std::size_t revoked = 0;
};

// Simulation registry of identities, certificates and pseudonym credentials.
// Owned by the event loop; mutation is single-threaded.
class IdentityRegistry {
 public:
  IdentityRegistry(CryptoEngine& crypto, RegistryConfig config = {});

  // Root of trust with a self-signed certificate.
  const ProvisionedEntity& create_trusted_authority(std::string id = "ID-TA");

  // TA may provision any non-TA role; an LMM may provision a VT only.
  // Throws DuplicateIdentity, UnauthorizedIssuer, UnknownEntity.
  const ProvisionedEntity& provision_entity(
      Role role, const std::string& authority_id,
      std::optional<std::string> explicit_id = std::nullopt,
      double now_ms = 0.0);

  // Mints `count` Unused credentials into the issuer's pool and returns
  // copies. Throws UnauthorizedIssuer, InvalidArgument (count < 1),
  // PoolCapacityExceeded.
  std::vector<PseudonymCredential> mint_pseudonym_batch(
      const std::string& issuer_id, const std::optional<std::string>& owner,
      int count, double now_ms = 0.0);

  // Moves `count` credentials from the issuer's pool to `owner`; shortfall
  // is minted on the spot and reported via `minted_on_demand`.
  std::vector<PseudonymCredential> distribute(const std::string& issuer_id,
                                              const std::string& owner,
                                              int count, double now_ms,
                                              int* minted_on_demand = nullptr);

  void set_status(const std::string& pid, CredentialStatus status);

  bool contains(const std::string& id) const { return entities_.count(id) > 0; }
  const ProvisionedEntity& entity(const std::string& id) const;
  std::size_t size() const { return entities_.size(); }
  std::vector<std::string> ids_with_role(Role role) const;

  bool has_credential(const std::string& pid) const {
    return credentials_.count(pid) > 0;
  }
  const PseudonymCredential& credential(const std::string& pid) const;
  std::size_t pool_size(const std::string& issuer_id) const;
  std::size_t pool_capacity() const { return config_.pool_capacity; }

  IssuanceStats issuance_stats(const std::string& issuer_id) const;

  CryptoEngine& crypto() { return crypto_; }

 private:
  struct CredentialRecord {
    PseudonymCredential credential;
    bool distributed = false;
  };

  Certificate issue_certificate(const ProvisionedEntity& issuer,
                                const Bytes& subject_key, double now_ms);
  std::string fresh_pid();
  std::string fresh_id(Role role);

  CryptoEngine& crypto_;
  RegistryConfig config_;
  Rng rng_;
  std::map<std::string, ProvisionedEntity> entities_;
  std::map<Role, std::uint64_t> role_counters_;
  std::unordered_map<std::string, CredentialRecord> credentials_;
  std::map<std::string, std::deque<std::string>> pools_;
  std::map<std::string, std::vector<std::string>> issued_by_;
};

// True iff the certificate binds the credential's public key, verifies under
// one of the anchors, and the credential is not revoked. Charged as one
// certificate verification.
bool verify_credential(CryptoEngine& crypto,
                       const PseudonymCredential& credential,
                       std::span<const Bytes> trust_anchors);

}  // namespace pseudochain
