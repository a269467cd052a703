#pragma once

#include <openssl/evp.h>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace todllm {

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

inline uint64_t fnv1a64(std::string_view data) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

using Rng = std::mt19937_64;

/// Uniform integer in [0, n). Rejection sampling on raw engine output, so
/// sequences are identical across standard library implementations.
inline uint64_t uniform_index(Rng& rng, uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  const uint64_t limit = Rng::max() - (Rng::max() % n);
  uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// Independent stream for a (seed, label) pair.
inline Rng derive_rng(uint64_t seed, std::string_view label) {
  return Rng(seed ^ fnv1a64(label));
}

}  // namespace todllm
