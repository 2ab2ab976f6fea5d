#pragma once

#include <string>
#include <string_view>

#include "pseudochain/common/bytes.hpp"

namespace pseudochain {

enum class MessageKind {
  kSafetyBroadcast,
  kPseuRequest,
  kPseuReply,
  kCrossVerifyQuery,
  kCrossVerifyAnswer,
  kReport,
  kRevocationNotice,
  kTrackingListPush,
};

std::string_view to_string(MessageKind kind);

// Wire message. Everything except `body` is cleartext; VMU/VT senders put
// a pseudonym id in sender_pid, never a true id.
struct ProtocolMessage {
  MessageKind kind = MessageKind::kSafetyBroadcast;
  std::string sender_pid;
  std::string recipient;
  Bytes body;          // ciphertext, or signed cleartext for broadcasts
  bool body_is_cleartext = false;
  double timestamp_ms = 0.0;
  Bytes signature;
};

// One-way link latencies.
struct LatencyModel {
  double vmu_to_es_ms = 20.0;
  double es_to_lmm_ms = 5.0;
  double es_to_ta_ms = 10.0;

  void validate() const;
};

// On-chain identity lookup cost charged to a distribution request.
struct ChainVerificationModel {
  double subchain_lookup_ms = 21.0;
  double single_chain_lookup_ms = 28.0;

  void validate() const;
};

// Where pseudonym records live.
enum class ChainMode { kCrossChain, kSingleChain };

// How the crypto component of a request delay is computed: the measured
// per-request aggregate (default) or the sum of charged primitives.
enum class CryptoAccounting { kAggregate, kPerOperation };

struct CryptoAggregate {
  double cross_chain_ms = 7.0;
  double single_chain_ms = 19.0;
};

struct DelayBreakdown {
  double crypto_ms = 0.0;
  double communication_ms = 0.0;
  double chain_ms = 0.0;

  double total_ms() const { return crypto_ms + communication_ms + chain_ms; }
};

}  // namespace pseudochain
