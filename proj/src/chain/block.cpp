#include "pseudochain/chain/block.hpp"

namespace pseudochain {

std::string_view to_string(TxKind kind) {
  switch (kind) {
    case TxKind::kPseudonymRegistration: return "PseudonymRegistration";
    case TxKind::kTrackingTableUpdate: return "TrackingTableUpdate";
    case TxKind::kReport: return "Report";
    case TxKind::kCrossChainRequest: return "CrossChainRequest";
  }
  return "?";
}

Bytes Transaction::canonical_bytes() const {
  ByteWriter w;
  w.u64(static_cast<std::uint64_t>(kind)).field(submitter).u64(keys.size());
  for (const auto& k : keys) w.field(k);
  w.field(tag).field(body).f64(size_kb).u64(sequence);
  return std::move(w).bytes();
}

Digest Transaction::id() const { return sha256(canonical_bytes()); }

Digest Block::compute_hash() const {
  ByteWriter w;
  w.u64(height).field(parent_hash).u64(payload.size());
  for (const auto& tx : payload) w.field(tx.canonical_bytes());
  w.field(proposer).f64(timestamp_ms);
  return sha256(w.bytes());
}

}  // namespace pseudochain
