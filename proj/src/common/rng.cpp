#include "pseudochain/common/rng.hpp"

namespace pseudochain {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  // FNV-1a over the label, then mixed with the run seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return mix_seed(mix_seed(seed) ^ h);
}

}  // namespace pseudochain
