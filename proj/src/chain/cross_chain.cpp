#include "pseudochain/chain/cross_chain.hpp"

#include <unordered_map>

#include "pseudochain/common/error.hpp"

namespace pseudochain {

std::string_view to_string(CrossChainKind kind) {
  switch (kind) {
    case CrossChainKind::kRegister: return "Register";
    case CrossChainKind::kVerify: return "Verify";
    case CrossChainKind::kRevoke: return "Revoke";
  }
  return "?";
}

void CrossChainTiming::validate() const {
  if (!(notary_ms >= 0.0) || !(origin_lookup_ms >= 0.0) ||
      !(link_latency_ms >= 0.0)) {
    throw Error(ErrorCode::kConfigError, "cross-chain timings must be >= 0");
  }
}

CrossChainNetwork::CrossChainNetwork(NetworkConfig config)
    : config_(std::move(config)) {
  if (config_.subchains < 1) {
    throw Error(ErrorCode::kConfigError, "need at least one subchain");
  }
  config_.timing.validate();
  main_ = std::make_unique<ChainState>("MC", ChainTier::kMainChain, config_.main);
  relay_ = std::make_unique<ChainState>("RC", ChainTier::kRelayChain, config_.relay);
  for (int j = 0; j < config_.subchains; ++j) {
    subchains_.push_back(std::make_unique<ChainState>(
        "SC" + std::to_string(j), ChainTier::kSubchain, config_.subchain));
  }
}

bool CrossChainNetwork::has_subchain(int j) const {
  return j >= 0 && j < subchain_count() && subchains_[j] != nullptr;
}

ChainState& CrossChainNetwork::subchain(int j) {
  if (!has_subchain(j)) {
    throw Error(ErrorCode::kUnknownTargetChain, "subchain " + std::to_string(j));
  }
  return *subchains_[j];
}

const ChainState& CrossChainNetwork::subchain(int j) const {
  if (!has_subchain(j)) {
    throw Error(ErrorCode::kUnknownTargetChain, "subchain " + std::to_string(j));
  }
  return *subchains_[j];
}

ChainState& CrossChainNetwork::chain(const ChainRef& ref) {
  switch (ref.tier) {
    case ChainTier::kMainChain: return *main_;
    case ChainTier::kRelayChain: return *relay_;
    case ChainTier::kSubchain: return subchain(ref.index);
  }
  throw Error(ErrorCode::kUnknownTargetChain, "bad chain tier");
}

void CrossChainNetwork::assign_notary(int j, std::string lmm_id) {
  subchain(j).set_notary(std::move(lmm_id));
}

Transaction CrossChainNetwork::make_tx(TxKind kind, std::string submitter,
                                       std::vector<std::string> keys,
                                       std::string_view tag, Bytes body) {
  Transaction tx;
  tx.kind = kind;
  tx.submitter = std::move(submitter);
  tx.keys = std::move(keys);
  tx.tag = std::string(tag);
  tx.body = std::move(body);
  tx.sequence = next_sequence_++;
  submitted_.push_back(tx.id());
  return tx;
}

AppendResult CrossChainNetwork::commit(ChainState& chain, Transaction tx,
                                       double now_ms) {
  return append_block_pbft(chain, {std::move(tx)}, now_ms);
}

CrossChainOutcome CrossChainNetwork::cross_chain_transaction(
    CrossChainKind kind, int source, const ChainRef& target,
    const CrossChainRequest& request, double now_ms) {
  if (!has_subchain(source)) {
    throw Error(ErrorCode::kUnknownTargetChain,
                "source subchain " + std::to_string(source));
  }
  if (target.tier == ChainTier::kSubchain && !has_subchain(target.index)) {
    throw Error(ErrorCode::kUnknownTargetChain,
                "target subchain " + std::to_string(target.index));
  }
  if (kind == CrossChainKind::kVerify && target.tier != ChainTier::kSubchain) {
    throw Error(ErrorCode::kUnknownTargetChain,
                "verification targets an origin subchain");
  }
  ChainState& src = subchain(source);
  if (!src.notary()) {
    throw Error(ErrorCode::kNotaryRejection, src.id() + " has no notary");
  }
  // Notary check: the request block is committed and correctly linked.
  auto loc = src.find_tx(request.source_tx);
  if (!loc || !src.block_is_linked(loc->height)) {
    throw Error(ErrorCode::kNotaryRejection,
                *src.notary() + " could not verify the request block on " +
                    src.id());
  }

  CrossChainOutcome out;
  out.notary_ms = config_.timing.notary_ms;
  out.link_ms = config_.timing.link_latency_ms;

  // Relay chain authenticates the source and records the routed request.
  Transaction routed = make_tx(TxKind::kCrossChainRequest, src.id(),
                               request.keys, to_string(kind),
                               Bytes(request.source_tx.begin(), request.source_tx.end()));
  out.relay_tx = routed.id();
  AppendResult relay_block = commit(*relay_, std::move(routed), now_ms + out.notary_ms);
  out.relay_ms = relay_block.elapsed_ms;

  ChainState& dst = chain(target);
  const double at_target = now_ms + out.notary_ms + out.relay_ms;
  switch (kind) {
    case CrossChainKind::kVerify: {
      bool all_active = !request.keys.empty();
      for (const auto& key : request.keys) {
        auto rec = dst.query_record(key);
        if (!rec || !rec->active()) {
          all_active = false;
          break;
        }
      }
      out.answer = all_active;
      out.abnormal = !all_active;
      out.target_ms = config_.timing.origin_lookup_ms;
      break;
    }
    case CrossChainKind::kRegister:
    case CrossChainKind::kRevoke: {
      Transaction tx = make_tx(
          kind == CrossChainKind::kRegister ? TxKind::kTrackingTableUpdate
                                            : TxKind::kReport,
          src.id(), request.keys, request.tag, request.payload);
      out.target_tx = tx.id();
      AppendResult r = commit(dst, std::move(tx), at_target);
      out.target_ms = r.elapsed_ms;
      out.answer = true;
      break;
    }
  }
  return out;
}

void CrossChainNetwork::remove_subchain(int j) {
  if (!has_subchain(j)) {
    throw Error(ErrorCode::kUnknownTargetChain, "subchain " + std::to_string(j));
  }
  subchains_[j].reset();
}

std::vector<const ChainState*> CrossChainNetwork::all_chains() const {
  std::vector<const ChainState*> out{main_.get(), relay_.get()};
  for (const auto& sc : subchains_) {
    if (sc) out.push_back(sc.get());
  }
  return out;
}

std::vector<int> commit_multiplicity(const CrossChainNetwork& network) {
  std::unordered_map<std::string, int> seen;
  for (const ChainState* chain : network.all_chains()) {
    for (const Block& b : chain->blocks()) {
      for (const Transaction& tx : b.payload) {
        Digest id = tx.id();
        ++seen[std::string(id.begin(), id.end())];
      }
    }
  }
  std::vector<int> out;
  out.reserve(network.submitted().size());
  for (const Digest& id : network.submitted()) {
    auto it = seen.find(std::string(id.begin(), id.end()));
    out.push_back(it == seen.end() ? 0 : it->second);
  }
  return out;
}

}  // namespace pseudochain
