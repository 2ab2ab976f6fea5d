#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pseudochain/common/bytes.hpp"

namespace pseudochain {

enum class TxKind {
  kPseudonymRegistration,
  kTrackingTableUpdate,
  kReport,
  kCrossChainRequest,
};

std::string_view to_string(TxKind kind);

// Record markers carried in Transaction::tag.
namespace tx_tag {
inline constexpr std::string_view kRecord = "record";
inline constexpr std::string_view kFreeze = "freeze";
inline constexpr std::string_view kRevoke = "revoke";
inline constexpr std::string_view kAnchor = "anchor";
inline constexpr std::string_view kTrackingList = "tracking-list";
inline constexpr std::string_view kTrackingTable = "tracking-table";
inline constexpr std::string_view kReport = "report";
inline constexpr std::string_view kWorkload = "workload";
}  // namespace tx_tag

struct Transaction {
  TxKind kind = TxKind::kPseudonymRegistration;
  std::string submitter;
  // Plaintext lookup keys (pseudonym ids, hex public keys). Never true ids.
  std::vector<std::string> keys;
  std::string tag;
  Bytes body;
  double size_kb = 1.0;
  // Submitter-assigned sequence; makes identical payloads distinct.
  std::uint64_t sequence = 0;

  Bytes canonical_bytes() const;
  Digest id() const;
};

struct Block {
  std::uint64_t height = 0;
  Digest parent_hash{};
  std::vector<Transaction> payload;
  std::string proposer;
  double timestamp_ms = 0.0;
  Digest hash{};

  // H(height || parent_hash || payload || proposer || timestamp).
  Digest compute_hash() const;
  bool hash_is_valid() const { return compute_hash() == hash; }
};

}  // namespace pseudochain
