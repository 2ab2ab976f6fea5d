#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "pseudochain/chain/block.hpp"

namespace pseudochain {

enum class ChainTier { kSubchain, kRelayChain, kMainChain };

std::string_view to_string(ChainTier tier);

// Three-phase PBFT message-count timing model:
//   block time = 3 * base_round_ms
//              + per_message_ms * (n + n(n-1) + n(n-1))
// for pre-prepare, prepare and commit with n = n_miners.
struct ConsensusConfig {
  int n_miners = 4;
  double per_message_ms = 0.05;
  double base_round_ms = 10.0;
  int block_capacity = 100;

  void validate() const;
  std::int64_t message_count() const;
  double block_time_ms() const;
};

struct TxLocation {
  std::uint64_t height = 0;
  std::size_t index = 0;
};

struct RecordView {
  Transaction tx;
  std::uint64_t height = 0;
  bool frozen = false;
  bool revoked = false;

  bool active() const { return !frozen && !revoked; }
};

// Append-only block sequence with a genesis block at height 0.
class ChainState {
 public:
  ChainState(std::string chain_id, ChainTier tier, ConsensusConfig consensus,
             std::vector<std::string> miners = {},
             std::optional<std::string> notary = std::nullopt);

  const std::string& id() const { return chain_id_; }
  ChainTier tier() const { return tier_; }
  const ConsensusConfig& consensus() const { return consensus_; }
  const std::vector<std::string>& miners() const { return miners_; }
  const std::optional<std::string>& notary() const { return notary_; }
  void set_notary(std::string lmm_id) { notary_ = std::move(lmm_id); }

  const std::vector<Block>& blocks() const { return blocks_; }
  std::uint64_t height() const { return blocks_.back().height; }
  const Block& tip() const { return blocks_.back(); }
  std::size_t transaction_count() const { return tx_index_.size(); }

  // Pending queue drained by commit_pending().
  void submit(Transaction tx) { pending_.push_back(std::move(tx)); }
  std::size_t pending_count() const { return pending_.size(); }

  struct CommitResult {
    std::uint64_t height;
    double elapsed_ms;
  };
  // Drains the pending queue into capacity-sized PBFT blocks, sequentially
  // from now_ms. Returns one entry per block.
  std::vector<CommitResult> commit_pending(double now_ms);

  // Appends a block assuming the caller validated the batch. Used by
  // append_block_pbft(); not a consensus step on its own.
  const Block& append(std::vector<Transaction> txs, double timestamp_ms);

  std::optional<std::uint64_t> first_invalid_height() const;
  bool verify() const { return !first_invalid_height().has_value(); }
  // Checks the block's own hash and its link to the parent.
  bool block_is_linked(std::uint64_t height) const;

  std::optional<TxLocation> find_tx(const Digest& tx_id) const;
  const Transaction& tx_at(const TxLocation& loc) const {
    return blocks_.at(loc.height).payload.at(loc.index);
  }

  // Latest committed record carrying `key`, with freeze/revoke markers
  // committed after it applied.
  std::optional<RecordView> query_record(const std::string& key) const;
  // Every committed transaction carrying `key`, oldest first.
  std::vector<TxLocation> locations_with_key(const std::string& key) const;

  // One JSON object per line, one line per block.
  void write_json_lines(std::ostream& os) const;

  // Fault injection for integrity tests; bypasses every invariant.
  std::vector<Block>& mutable_blocks_for_testing() { return blocks_; }

 private:
  void index_block(const Block& block);

  std::string chain_id_;
  ChainTier tier_;
  ConsensusConfig consensus_;
  std::vector<std::string> miners_;
  std::optional<std::string> notary_;
  std::vector<Block> blocks_;
  std::deque<Transaction> pending_;
  std::unordered_map<std::string, std::vector<TxLocation>> key_index_;
  std::unordered_map<std::string, TxLocation> tx_index_;
};

struct AppendResult {
  Block block;
  double elapsed_ms = 0.0;
};

// Appends one block after a simulated PBFT round.
// Throws EmptyBatch, CapacityExceeded.
AppendResult append_block_pbft(ChainState& chain, std::vector<Transaction> txs,
                               double now_ms);

}  // namespace pseudochain
