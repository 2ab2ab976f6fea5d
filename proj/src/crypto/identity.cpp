#include "pseudochain/crypto/identity.hpp"

#include "pseudochain/common/error.hpp"

namespace pseudochain {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kVmu: return "VMU";
    case Role::kVt: return "VT";
    case Role::kEdgeServer: return "ES";
    case Role::kLmm: return "LMM";
    case Role::kTa: return "TA";
  }
  return "?";
}

std::string_view to_string(CredentialStatus status) {
  switch (status) {
    case CredentialStatus::kUnused: return "Unused";
    case CredentialStatus::kActive: return "Active";
    case CredentialStatus::kConsumed: return "Consumed";
    case CredentialStatus::kRevoked: return "Revoked";
  }
  return "?";
}

Bytes Certificate::signed_payload() const {
  return ByteWriter()
      .field("certificate")
      .field(subject_public_key)
      .field(issuer_id)
      .f64(issued_at_ms)
      .bytes();
}

Bytes Certificate::canonical_bytes() const {
  return ByteWriter()
      .field(subject_public_key)
      .field(issuer_id)
      .field(issuer_signature)
      .f64(issued_at_ms)
      .bytes();
}

bool is_allowed_transition(CredentialStatus from, CredentialStatus to) {
  if (to == CredentialStatus::kRevoked) return true;
  return (from == CredentialStatus::kUnused && to == CredentialStatus::kActive) ||
         (from == CredentialStatus::kActive && to == CredentialStatus::kConsumed);
}

void PseudonymCredential::transition_to(CredentialStatus next) {
  if (!is_allowed_transition(status, next)) {
    throw Error(ErrorCode::kInvalidStatusTransition,
                pid + ": " + std::string(to_string(status)) + " -> " +
                    std::string(to_string(next)));
  }
  status = next;
}

}  // namespace pseudochain
