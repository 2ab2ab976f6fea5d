#include "pseudochain/chain/ledger.hpp"

#include <json.hpp>

#include "pseudochain/common/error.hpp"

namespace pseudochain {

std::string_view to_string(ChainTier tier) {
  switch (tier) {
    case ChainTier::kSubchain: return "Subchain";
    case ChainTier::kRelayChain: return "RelayChain";
    case ChainTier::kMainChain: return "MainChain";
  }
  return "?";
}

void ConsensusConfig::validate() const {
  if (n_miners < 4) {
    throw Error(ErrorCode::kConfigError,
                "PBFT needs n_miners >= 4, got " + std::to_string(n_miners));
  }
  if (!(per_message_ms >= 0.0) || !(base_round_ms >= 0.0)) {
    throw Error(ErrorCode::kConfigError, "consensus latencies must be >= 0");
  }
  if (block_capacity < 1) {
    throw Error(ErrorCode::kConfigError, "block_capacity must be >= 1");
  }
}

std::int64_t ConsensusConfig::message_count() const {
  const std::int64_t n = n_miners;
  return n + 2 * n * (n - 1);
}

double ConsensusConfig::block_time_ms() const {
  return 3.0 * base_round_ms + per_message_ms * static_cast<double>(message_count());
}

namespace {
std::string digest_key(const Digest& d) { return std::string(d.begin(), d.end()); }
}  // namespace

ChainState::ChainState(std::string chain_id, ChainTier tier,
                       ConsensusConfig consensus,
                       std::vector<std::string> miners,
                       std::optional<std::string> notary)
    : chain_id_(std::move(chain_id)),
      tier_(tier),
      consensus_(consensus),
      miners_(std::move(miners)),
      notary_(std::move(notary)) {
  consensus_.validate();
  if (miners_.empty()) {
    for (int i = 0; i < consensus_.n_miners; ++i) {
      miners_.push_back(chain_id_ + "-miner-" + std::to_string(i));
    }
  }
  Block genesis;
  genesis.height = 0;
  genesis.proposer = "genesis";
  genesis.hash = genesis.compute_hash();
  blocks_.push_back(std::move(genesis));
}

const Block& ChainState::append(std::vector<Transaction> txs,
                                double timestamp_ms) {
  Block block;
  block.height = height() + 1;
  block.parent_hash = tip().hash;
  block.payload = std::move(txs);
  block.proposer = miners_[block.height % miners_.size()];
  block.timestamp_ms = timestamp_ms;
  block.hash = block.compute_hash();
  blocks_.push_back(std::move(block));
  index_block(blocks_.back());
  return blocks_.back();
}

void ChainState::index_block(const Block& block) {
  for (std::size_t i = 0; i < block.payload.size(); ++i) {
    const TxLocation loc{block.height, i};
    const auto& tx = block.payload[i];
    tx_index_.emplace(digest_key(tx.id()), loc);
    for (const auto& key : tx.keys) key_index_[key].push_back(loc);
  }
}

std::vector<ChainState::CommitResult> ChainState::commit_pending(double now_ms) {
  std::vector<CommitResult> out;
  double t = now_ms;
  while (!pending_.empty()) {
    const std::size_t take =
        std::min(pending_.size(), static_cast<std::size_t>(consensus_.block_capacity));
    std::vector<Transaction> batch(std::make_move_iterator(pending_.begin()),
                                   std::make_move_iterator(pending_.begin() + take));
    pending_.erase(pending_.begin(), pending_.begin() + take);
    AppendResult r = append_block_pbft(*this, std::move(batch), t);
    t += r.elapsed_ms;
    out.push_back({r.block.height, r.elapsed_ms});
  }
  return out;
}

bool ChainState::block_is_linked(std::uint64_t h) const {
  if (h >= blocks_.size()) return false;
  const Block& b = blocks_[h];
  if (b.height != h || !b.hash_is_valid()) return false;
  if (h == 0) return b.parent_hash == Digest{};
  return b.parent_hash == blocks_[h - 1].hash;
}

std::optional<std::uint64_t> ChainState::first_invalid_height() const {
  for (std::uint64_t h = 0; h < blocks_.size(); ++h) {
    if (!block_is_linked(h)) return h;
  }
  return std::nullopt;
}

std::optional<TxLocation> ChainState::find_tx(const Digest& tx_id) const {
  auto it = tx_index_.find(digest_key(tx_id));
  if (it == tx_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RecordView> ChainState::query_record(const std::string& key) const {
  auto it = key_index_.find(key);
  if (it == key_index_.end()) return std::nullopt;
  std::optional<RecordView> view;
  for (const TxLocation& loc : it->second) {
    const Transaction& tx = tx_at(loc);
    if (tx.tag == tx_tag::kFreeze) {
      if (view) view->frozen = true;
    } else if (tx.tag == tx_tag::kRevoke) {
      if (view) view->revoked = true;
    } else {
      view = RecordView{tx, loc.height, false, false};
    }
  }
  return view;
}

std::vector<TxLocation> ChainState::locations_with_key(const std::string& key) const {
  auto it = key_index_.find(key);
  return it == key_index_.end() ? std::vector<TxLocation>{} : it->second;
}

void ChainState::write_json_lines(std::ostream& os) const {
  for (const Block& b : blocks_) {
    nlohmann::json payload = nlohmann::json::array();
    for (const auto& tx : b.payload) {
      payload.push_back({{"kind", to_string(tx.kind)},
                         {"submitter", tx.submitter},
                         {"keys", tx.keys},
                         {"tag", tx.tag},
                         {"body", to_hex(tx.body)},
                         {"size_kb", tx.size_kb},
                         {"sequence", tx.sequence}});
    }
    nlohmann::json line = {{"chain", chain_id_},
                           {"height", b.height},
                           {"parent_hash", to_hex(b.parent_hash)},
                           {"payload", std::move(payload)},
                           {"proposer", b.proposer},
                           {"timestamp_ms", b.timestamp_ms},
                           {"hash", to_hex(b.hash)}};
    os << line.dump() << '\n';
  }
}

AppendResult append_block_pbft(ChainState& chain, std::vector<Transaction> txs,
                               double now_ms) {
  if (txs.empty()) {
    throw Error(ErrorCode::kEmptyBatch, "block on " + chain.id());
  }
  if (txs.size() > static_cast<std::size_t>(chain.consensus().block_capacity)) {
    throw Error(ErrorCode::kCapacityExceeded,
                std::to_string(txs.size()) + " txs > capacity " +
                    std::to_string(chain.consensus().block_capacity));
  }
  for (const auto& tx : txs) {
    if (!(tx.size_kb > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "transaction size_kb must be > 0");
    }
  }
  const double elapsed = chain.consensus().block_time_ms();
  const Block& block = chain.append(std::move(txs), now_ms + elapsed);
  return {block, elapsed};
}

}  // namespace pseudochain
