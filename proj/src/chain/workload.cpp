#include "pseudochain/chain/workload.hpp"

#include <algorithm>

#include "pseudochain/common/error.hpp"

namespace pseudochain {

namespace {

Transaction workload_tx(std::uint64_t sequence) {
  Transaction tx;
  tx.kind = TxKind::kPseudonymRegistration;
  tx.submitter = "workload";
  tx.tag = std::string(tx_tag::kWorkload);
  tx.body = ByteWriter().u64(sequence).bytes();
  tx.size_kb = 1.0;
  tx.sequence = sequence;
  return tx;
}

double drain(ChainState& chain, WorkloadTiming& timing) {
  auto commits = chain.commit_pending(0.0);
  double elapsed = 0.0;
  for (const auto& c : commits) elapsed += c.elapsed_ms;
  timing.blocks += commits.size();
  return elapsed;
}

}  // namespace

WorkloadTiming commit_workload_single(ChainState& chain, int n_txs) {
  if (n_txs < 1) throw Error(ErrorCode::kInvalidArgument, "n_txs must be >= 1");
  WorkloadTiming timing;
  for (int i = 0; i < n_txs; ++i) chain.submit(workload_tx(i));
  timing.transactions = n_txs;
  const double t = drain(chain, timing);
  timing.per_chain_ms.push_back(t);
  timing.total_ms = t;
  return timing;
}

WorkloadTiming commit_workload_cross(std::span<ChainState* const> subchains,
                                     ChainState& relay, int n_txs) {
  if (n_txs < 1) throw Error(ErrorCode::kInvalidArgument, "n_txs must be >= 1");
  if (subchains.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one subchain");
  }
  WorkloadTiming timing;
  for (int i = 0; i < n_txs; ++i) {
    subchains[i % subchains.size()]->submit(workload_tx(i));
  }
  timing.transactions = n_txs;
  double slowest = 0.0;
  for (ChainState* sc : subchains) {
    const double t = drain(*sc, timing);
    timing.per_chain_ms.push_back(t);
    slowest = std::max(slowest, t);
  }
  double anchoring = 0.0;
  for (std::size_t k = 0; k < subchains.size(); ++k) {
    Transaction anchor;
    anchor.kind = TxKind::kCrossChainRequest;
    anchor.submitter = subchains[k]->id();
    anchor.tag = std::string(tx_tag::kAnchor);
    anchor.body.assign(subchains[k]->tip().hash.begin(),
                       subchains[k]->tip().hash.end());
    anchor.sequence = static_cast<std::uint64_t>(n_txs) + k;
    AppendResult r = append_block_pbft(relay, {std::move(anchor)}, slowest + anchoring);
    anchoring += r.elapsed_ms;
    ++timing.blocks;
  }
  timing.anchoring_ms = anchoring;
  timing.total_ms = slowest + anchoring;
  return timing;
}

ChainCalibration ChainCalibration::shipped() {
  ChainCalibration c;
  c.single_chain = {.n_miners = 11, .per_message_ms = 0.05, .base_round_ms = 10.0,
                    .block_capacity = 10};
  c.subchain = {.n_miners = 4, .per_message_ms = 0.05, .base_round_ms = 10.0,
                .block_capacity = 10};
  c.relay_chain = {.n_miners = 4, .per_message_ms = 0.05, .base_round_ms = 10.0,
                   .block_capacity = 100};
  return c;
}

}  // namespace pseudochain
