#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pseudochain {

using Bytes = std::vector<std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

Bytes to_bytes(std::string_view text);
std::string to_hex(std::span<const std::uint8_t> data);
Bytes from_hex(std::string_view hex);

// SHA-256 and HMAC-SHA-256 (backed by OpenSSL).
Digest sha256(std::span<const std::uint8_t> data);
Digest hmac_sha256(std::span<const std::uint8_t> key,
                   std::span<const std::uint8_t> data);

// HMAC-SHA-256 with the key schedule computed once, for repeated MACs under
// one key.
class HmacSha256 {
 public:
  explicit HmacSha256(std::span<const std::uint8_t> key);
  Digest mac(std::span<const std::uint8_t> data) const;

 private:
  alignas(8) std::array<std::uint8_t, 112> inner_{};
  alignas(8) std::array<std::uint8_t, 112> outer_{};
};

// Canonical serialization: every variable-length field is prefixed with its
// length as a little-endian u64; integers are fixed-width little-endian;
// doubles are written as their IEEE-754 bit pattern.
class ByteWriter {
 public:
  ByteWriter& u64(std::uint64_t value);
  ByteWriter& i64(std::int64_t value);
  ByteWriter& f64(double value);
  ByteWriter& field(std::span<const std::uint8_t> data);
  ByteWriter& field(std::string_view text);

  const Bytes& bytes() const& { return out_; }
  Bytes bytes() && { return std::move(out_); }

 private:
  Bytes out_;
};

}  // namespace pseudochain
