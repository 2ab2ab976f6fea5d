#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "pseudochain/common/bytes.hpp"

namespace pseudochain {

enum class Role { kVmu, kVt, kEdgeServer, kLmm, kTa };

std::string_view to_string(Role role);

struct TrueIdentity {
  std::string id;
  Role role = Role::kVmu;

  friend bool operator==(const TrueIdentity&, const TrueIdentity&) = default;
};

struct KeyPair {
  Bytes public_key;
  Bytes private_key;
};

struct Certificate {
  Bytes subject_public_key;
  std::string issuer_id;
  Bytes issuer_signature;
  double issued_at_ms = 0.0;

  // Bytes covered by issuer_signature.
  Bytes signed_payload() const;
  Bytes canonical_bytes() const;
};

enum class CredentialStatus { kUnused, kActive, kConsumed, kRevoked };

std::string_view to_string(CredentialStatus status);

// Unused -> Active -> Consumed, and any state -> Revoked.
bool is_allowed_transition(CredentialStatus from, CredentialStatus to);

struct PseudonymCredential {
  std::string pid;
  KeyPair key_pair;
  Certificate certificate;
  std::string issuer_lmm;
  // Visible to the issuer and the TA only.
  std::optional<std::string> owner;
  CredentialStatus status = CredentialStatus::kUnused;

  // Throws Error(kInvalidStatusTransition) for edges outside the status graph.
  void transition_to(CredentialStatus next);
};

}  // namespace pseudochain
