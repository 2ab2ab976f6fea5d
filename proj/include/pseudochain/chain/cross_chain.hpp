#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pseudochain/chain/ledger.hpp"

namespace pseudochain {

// Notary, origin-lookup and inter-chain link components of a cross-chain
// transaction. Defaults are calibrated so that a Verify round trip over
// default subchain/relay settings totals 806 ms:
//   21 (notary) + 31.4 (relay PBFT) + 21 (origin lookup) + 732.6 (links).
struct CrossChainTiming {
  double notary_ms = 21.0;
  double origin_lookup_ms = 21.0;
  double link_latency_ms = 732.6;

  void validate() const;
};

struct NetworkConfig {
  int subchains = 3;
  ConsensusConfig subchain;
  ConsensusConfig relay;
  ConsensusConfig main;
  CrossChainTiming timing;
};

enum class CrossChainKind { kRegister, kVerify, kRevoke };

std::string_view to_string(CrossChainKind kind);

struct ChainRef {
  ChainTier tier = ChainTier::kMainChain;
  int index = 0;  // subchain index; ignored for relay/main

  static ChainRef main() { return {ChainTier::kMainChain, 0}; }
  static ChainRef relay() { return {ChainTier::kRelayChain, 0}; }
  static ChainRef subchain(int j) { return {ChainTier::kSubchain, j}; }
};

struct CrossChainRequest {
  Digest source_tx{};             // must already be committed on the source
  std::vector<std::string> keys;  // lookup keys carried across
  std::string tag;                // tag of the transaction committed at target
  Bytes payload;                  // ciphertext forwarded to the target
  std::string submitter;
};

struct CrossChainOutcome {
  bool answer = false;    // Verify: identities recorded and active on origin
  bool abnormal = false;  // Verify answered false
  std::optional<Digest> relay_tx;
  std::optional<Digest> target_tx;  // Register/Revoke commit on the target
  double notary_ms = 0.0;
  double relay_ms = 0.0;
  double target_ms = 0.0;
  double link_ms = 0.0;

  double elapsed_ms() const { return notary_ms + relay_ms + target_ms + link_ms; }
};

// Main chain, relay chain and one subchain per local metaverse. Subchains
// are notarized by their LMM.
class CrossChainNetwork {
 public:
  explicit CrossChainNetwork(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }
  ChainState& main_chain() { return *main_; }
  const ChainState& main_chain() const { return *main_; }
  ChainState& relay_chain() { return *relay_; }
  const ChainState& relay_chain() const { return *relay_; }
  int subchain_count() const { return static_cast<int>(subchains_.size()); }
  bool has_subchain(int j) const;
  ChainState& subchain(int j);
  const ChainState& subchain(int j) const;
  ChainState& chain(const ChainRef& ref);

  void assign_notary(int j, std::string lmm_id);

  // Stamps a fresh sequence number and records the transaction as submitted.
  Transaction make_tx(TxKind kind, std::string submitter,
                      std::vector<std::string> keys, std::string_view tag,
                      Bytes body);

  // Commits a single-transaction PBFT block.
  AppendResult commit(ChainState& chain, Transaction tx, double now_ms);

  // Throws NotaryRejection (source notary missing or source block fails
  // verification), UnknownTargetChain.
  CrossChainOutcome cross_chain_transaction(CrossChainKind kind, int source,
                                            const ChainRef& target,
                                            const CrossChainRequest& request,
                                            double now_ms);

  // Drops a subchain's state entirely (crash / disaster model).
  void remove_subchain(int j);

  // Every transaction created through make_tx, in order.
  const std::vector<Digest>& submitted() const { return submitted_; }
  std::vector<const ChainState*> all_chains() const;

 private:
  NetworkConfig config_;
  std::unique_ptr<ChainState> main_;
  std::unique_ptr<ChainState> relay_;
  std::vector<std::unique_ptr<ChainState>> subchains_;
  std::uint64_t next_sequence_ = 0;
  std::vector<Digest> submitted_;
};

// For each submitted id, the number of chains/positions it appears at.
// Conservation holds iff every count is exactly 1.
std::vector<int> commit_multiplicity(const CrossChainNetwork& network);

}  // namespace pseudochain
