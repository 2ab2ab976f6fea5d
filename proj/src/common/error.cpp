#include "pseudochain/common/error.hpp"

namespace pseudochain {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDuplicateIdentity: return "DuplicateIdentity";
    case ErrorCode::kUnauthorizedIssuer: return "UnauthorizedIssuer";
    case ErrorCode::kUnknownEntity: return "UnknownEntity";
    case ErrorCode::kMalformedKey: return "MalformedKey";
    case ErrorCode::kPoolCapacityExceeded: return "PoolCapacityExceeded";
    case ErrorCode::kInvalidStatusTransition: return "InvalidStatusTransition";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kCapacityExceeded: return "CapacityExceeded";
    case ErrorCode::kNotaryRejection: return "NotaryRejection";
    case ErrorCode::kUnknownTargetChain: return "UnknownTargetChain";
    case ErrorCode::kAlreadyRegistered: return "AlreadyRegistered";
    case ErrorCode::kNoActivePseudonym: return "NoActivePseudonym";
    case ErrorCode::kExhausted: return "Exhausted";
    case ErrorCode::kDomainError: return "DomainError";
    case ErrorCode::kCapViolation: return "CapViolation";
    case ErrorCode::kDegenerateRatio: return "DegenerateRatio";
    case ErrorCode::kInvalidAction: return "InvalidAction";
    case ErrorCode::kNaNGuard: return "NaNGuard";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace pseudochain
