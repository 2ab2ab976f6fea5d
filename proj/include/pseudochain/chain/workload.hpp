#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pseudochain/chain/ledger.hpp"

namespace pseudochain {

struct WorkloadTiming {
  std::vector<double> per_chain_ms;  // sequential block time on each chain
  double anchoring_ms = 0.0;         // relay-chain anchoring, cross-chain only
  double total_ms = 0.0;
  std::size_t blocks = 0;
  std::size_t transactions = 0;
};

// Single chain: all transactions committed sequentially in capacity-sized
// blocks; total is the sum of block times.
WorkloadTiming commit_workload_single(ChainState& chain, int n_txs);

// Cross-chain: transactions partitioned round-robin over the subchains, which
// commit in parallel; then one anchoring block per subchain on the relay
// chain. total = max subchain time + anchoring.
WorkloadTiming commit_workload_cross(std::span<ChainState* const> subchains,
                                     ChainState& relay, int n_txs);

// Consensus settings used by the chain benchmarks. shipped() is the default
// calibration: a single chain run by a larger consortium than each subchain,
// and small blocks.
struct ChainCalibration {
  ConsensusConfig single_chain;
  ConsensusConfig subchain;
  ConsensusConfig relay_chain;

  static ChainCalibration shipped();
};

}  // namespace pseudochain
