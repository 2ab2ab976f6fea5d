#include "pseudochain/crypto/provider.hpp"

#include <algorithm>

#include "pseudochain/common/error.hpp"

namespace pseudochain {

namespace {

constexpr std::size_t kNonceSize = 16;
constexpr std::size_t kTagSize = 32;
constexpr std::size_t kHeaderSize =
    DeterministicCryptoProvider::kKeySize + kNonceSize + kTagSize;

Bytes derive_public(std::span<const std::uint8_t> private_key) {
  Bytes input = to_bytes("pseudochain/public-key");
  input.insert(input.end(), private_key.begin(), private_key.end());
  Digest d = sha256(input);
  return Bytes(d.begin(), d.end());
}

void require_key_size(std::span<const std::uint8_t> key, const char* what) {
  if (key.size() != DeterministicCryptoProvider::kKeySize) {
    throw Error(ErrorCode::kMalformedKey,
                std::string(what) + " must be " +
                    std::to_string(DeterministicCryptoProvider::kKeySize) +
                    " bytes");
  }
}

std::string key_string(std::span<const std::uint8_t> key) {
  return std::string(key.begin(), key.end());
}

// Keystream block k = HMAC(sk, "enc" || nonce || k).
void apply_keystream(std::span<const std::uint8_t> private_key,
                     std::span<const std::uint8_t> nonce,
                     std::span<std::uint8_t> data) {
  Bytes block_input = to_bytes("enc");
  block_input.insert(block_input.end(), nonce.begin(), nonce.end());
  const std::size_t counter_at = block_input.size();
  block_input.resize(counter_at + 8);
  const HmacSha256 prf(private_key);
  for (std::size_t offset = 0, k = 0; offset < data.size(); ++k) {
    for (int i = 0; i < 8; ++i) {
      block_input[counter_at + i] = static_cast<std::uint8_t>(k >> (8 * i));
    }
    Digest stream = prf.mac(block_input);
    for (std::size_t i = 0; i < stream.size() && offset < data.size();
         ++i, ++offset) {
      data[offset] ^= stream[i];
    }
  }
}

Digest ciphertext_tag(std::span<const std::uint8_t> private_key,
                      std::span<const std::uint8_t> nonce,
                      std::span<const std::uint8_t> body) {
  Bytes input = to_bytes("mac");
  input.insert(input.end(), nonce.begin(), nonce.end());
  input.insert(input.end(), body.begin(), body.end());
  return hmac_sha256(private_key, input);
}

}  // namespace

DeterministicCryptoProvider::DeterministicCryptoProvider(std::uint64_t seed) {
  seed_key_ = ByteWriter().field("pseudochain/provider-seed").u64(seed).bytes();
}

KeyPair DeterministicCryptoProvider::generate_key_pair() {
  Bytes label = ByteWriter().field("sk").u64(key_counter_++).bytes();
  Digest sk = hmac_sha256(seed_key_, label);
  KeyPair pair;
  pair.private_key.assign(sk.begin(), sk.end());
  pair.public_key = derive_public(pair.private_key);
  keyring_.emplace(key_string(pair.public_key), pair.private_key);
  return pair;
}

const Bytes* DeterministicCryptoProvider::lookup_private(
    std::span<const std::uint8_t> public_key) const {
  auto it = keyring_.find(key_string(public_key));
  return it == keyring_.end() ? nullptr : &it->second;
}

Bytes DeterministicCryptoProvider::encrypt(
    std::span<const std::uint8_t> public_key,
    std::span<const std::uint8_t> plaintext) {
  require_key_size(public_key, "public key");
  const Bytes* sk = lookup_private(public_key);
  if (sk == nullptr) {
    throw Error(ErrorCode::kMalformedKey, "public key not issued by provider");
  }
  Bytes nonce_label = ByteWriter().field("nonce").u64(nonce_counter_++).bytes();
  Digest nonce_full = hmac_sha256(seed_key_, nonce_label);
  std::span<const std::uint8_t> nonce(nonce_full.data(), kNonceSize);

  Bytes body(plaintext.begin(), plaintext.end());
  apply_keystream(*sk, nonce, body);
  Digest tag = ciphertext_tag(*sk, nonce, body);

  Bytes out;
  out.reserve(kHeaderSize + body.size());
  out.insert(out.end(), public_key.begin(), public_key.end());
  out.insert(out.end(), nonce.begin(), nonce.end());
  out.insert(out.end(), tag.begin(), tag.end());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

std::optional<Bytes> DeterministicCryptoProvider::decrypt(
    std::span<const std::uint8_t> private_key,
    std::span<const std::uint8_t> ciphertext) const {
  require_key_size(private_key, "private key");
  if (ciphertext.size() < kHeaderSize) return std::nullopt;
  Bytes expected_recipient = derive_public(private_key);
  auto recipient = ciphertext.subspan(0, kKeySize);
  if (!std::equal(recipient.begin(), recipient.end(),
                  expected_recipient.begin())) {
    return std::nullopt;
  }
  auto nonce = ciphertext.subspan(kKeySize, kNonceSize);
  auto tag = ciphertext.subspan(kKeySize + kNonceSize, kTagSize);
  auto body = ciphertext.subspan(kHeaderSize);
  Digest expected_tag = ciphertext_tag(private_key, nonce, body);
  if (!std::equal(tag.begin(), tag.end(), expected_tag.begin())) {
    return std::nullopt;
  }
  Bytes plain(body.begin(), body.end());
  apply_keystream(private_key, nonce, plain);
  return plain;
}

Bytes DeterministicCryptoProvider::sign(
    std::span<const std::uint8_t> private_key,
    std::span<const std::uint8_t> message) const {
  require_key_size(private_key, "private key");
  Digest tag = hmac_sha256(private_key, message);
  return Bytes(tag.begin(), tag.end());
}

bool DeterministicCryptoProvider::verify(
    std::span<const std::uint8_t> public_key,
    std::span<const std::uint8_t> message,
    std::span<const std::uint8_t> signature) const {
  require_key_size(public_key, "public key");
  const Bytes* sk = lookup_private(public_key);
  if (sk == nullptr || signature.size() != kTagSize) return false;
  Digest expected = hmac_sha256(*sk, message);
  return std::equal(expected.begin(), expected.end(), signature.begin());
}

}  // namespace pseudochain
