#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>

#include "pseudochain/common/bytes.hpp"
#include "pseudochain/crypto/identity.hpp"
#include "pseudochain/crypto/provider.hpp"

namespace pseudochain {

enum class CryptoOpKind { kEncrypt, kDecrypt, kSign, kVerifySig, kVerifyCert };

inline constexpr std::size_t kCryptoOpKinds = 5;

std::string_view to_string(CryptoOpKind kind);

// Simulated cost per primitive, in milliseconds.
struct CryptoTimingModel {
  double encrypt_ms = 1.86;
  double decrypt_ms = 0.94;
  double sign_ms = 0.93;
  double verify_sig_ms = 1.11;
  double verify_cert_ms = 5.42;

  double cost(CryptoOpKind kind) const;
  void validate() const;
};

// Running tally of charged operations.
struct CryptoMeter {
  std::array<std::uint64_t, kCryptoOpKinds> counts{};
  double total_ms = 0.0;

  std::uint64_t count(CryptoOpKind kind) const {
    return counts[static_cast<std::size_t>(kind)];
  }
};

template <typename T>
struct Timed {
  T value;
  double elapsed_ms = 0.0;
};

struct CryptoOpInputs {
  Bytes key;  // public key for Encrypt/VerifySig/VerifyCert, private otherwise
  Bytes message;
  Bytes signature;
  std::optional<Certificate> certificate;
};

struct CryptoOpResult {
  Bytes data;       // ciphertext, plaintext or signature
  bool ok = false;  // verification outcome, or decrypt success
  double elapsed_ms = 0.0;
};

// Provider plus timing model. Every call is charged to the meter with the
// model's constant for its kind, independent of the provider.
class CryptoEngine {
 public:
  CryptoEngine(std::unique_ptr<CryptoProvider> provider,
               CryptoTimingModel timing = {});

  KeyPair generate_key_pair() { return provider_->generate_key_pair(); }

  Timed<Bytes> encrypt(std::span<const std::uint8_t> public_key,
                       std::span<const std::uint8_t> plaintext);
  Timed<std::optional<Bytes>> decrypt(std::span<const std::uint8_t> private_key,
                                      std::span<const std::uint8_t> ciphertext);
  Timed<Bytes> sign(std::span<const std::uint8_t> private_key,
                    std::span<const std::uint8_t> message);
  Timed<bool> verify_signature(std::span<const std::uint8_t> public_key,
                               std::span<const std::uint8_t> message,
                               std::span<const std::uint8_t> signature);
  Timed<bool> verify_certificate(const Certificate& certificate,
                                 std::span<const std::uint8_t> issuer_key);

  CryptoOpResult crypto_op(CryptoOpKind kind, const CryptoOpInputs& inputs);

  // Uncharged primitives for simulator bookkeeping (not protocol steps).
  const CryptoProvider& provider() const { return *provider_; }
  CryptoProvider& provider() { return *provider_; }

  const CryptoTimingModel& timing() const { return timing_; }
  const CryptoMeter& meter() const { return meter_; }
  void reset_meter() { meter_ = {}; }

 private:
  double charge(CryptoOpKind kind);

  std::unique_ptr<CryptoProvider> provider_;
  CryptoTimingModel timing_;
  CryptoMeter meter_;
};

}  // namespace pseudochain
