#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>

#include "pseudochain/common/bytes.hpp"
#include "pseudochain/crypto/identity.hpp"

namespace pseudochain {

// Asymmetric primitive set used by the protocols. Implementations must
// satisfy decrypt(sk, encrypt(pk, m)) == m and verify(pk, m, sign(sk, m)).
class CryptoProvider {
 public:
  virtual ~CryptoProvider() = default;

  virtual KeyPair generate_key_pair() = 0;
  virtual Bytes encrypt(std::span<const std::uint8_t> public_key,
                        std::span<const std::uint8_t> plaintext) = 0;
  // nullopt when the key does not match the recipient or the tag fails.
  virtual std::optional<Bytes> decrypt(
      std::span<const std::uint8_t> private_key,
      std::span<const std::uint8_t> ciphertext) const = 0;
  virtual Bytes sign(std::span<const std::uint8_t> private_key,
                     std::span<const std::uint8_t> message) const = 0;
  virtual bool verify(std::span<const std::uint8_t> public_key,
                      std::span<const std::uint8_t> message,
                      std::span<const std::uint8_t> signature) const = 0;
};

// Deterministic simulation provider. Keys are 32-byte strings derived from a
// seeded PRF; the provider keeps a keyring from public to private key and
// uses it as the trapdoor for verification and encryption. Correct, fully
// reproducible, and NOT cryptographically secure.
class DeterministicCryptoProvider final : public CryptoProvider {
 public:
  static constexpr std::size_t kKeySize = 32;

  explicit DeterministicCryptoProvider(std::uint64_t seed);

  KeyPair generate_key_pair() override;
  Bytes encrypt(std::span<const std::uint8_t> public_key,
                std::span<const std::uint8_t> plaintext) override;
  std::optional<Bytes> decrypt(
      std::span<const std::uint8_t> private_key,
      std::span<const std::uint8_t> ciphertext) const override;
  Bytes sign(std::span<const std::uint8_t> private_key,
             std::span<const std::uint8_t> message) const override;
  bool verify(std::span<const std::uint8_t> public_key,
              std::span<const std::uint8_t> message,
              std::span<const std::uint8_t> signature) const override;

  std::size_t keyring_size() const { return keyring_.size(); }

 private:
  const Bytes* lookup_private(std::span<const std::uint8_t> public_key) const;

  Bytes seed_key_;
  std::uint64_t key_counter_ = 0;
  std::uint64_t nonce_counter_ = 0;
  std::unordered_map<std::string, Bytes> keyring_;
};

}  // namespace pseudochain
