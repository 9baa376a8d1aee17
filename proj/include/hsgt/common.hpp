#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace hsgt {

// Error taxonomy mirrored by the CLI exit codes: input_error -> 1,
// numeric_error -> 2.
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw input_error(msg);
}
inline void require_numeric(bool cond, const std::string& msg) {
  if (!cond) throw numeric_error(msg);
}

using NodeId = std::int32_t;
using Rng = std::mt19937_64;

// Bias-index codes shared by the sampler and the attention ops: entries
// >= 0 are truncated SPD values, kBiasUnreached contributes bias 0, and
// kBiasMasked removes the pair from the receptive field.
inline constexpr std::int8_t kBiasUnreached = -1;
inline constexpr std::int8_t kBiasMasked = -2;

// splitmix64; derives independent seeds for sub-streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// True when HSGT_DETERMINISTIC=1 is set in the environment.
bool deterministic_mode();

// OpenBLAS selects its kernels in a load-time constructor; on hosts with a
// masked CPUID it silently falls back to the Prescott (SSE2) kernels. When
// that happened and the CPU actually has AVX2/AVX-512, pin
// OPENBLAS_CORETYPE and re-exec the process once so the fast kernels load.
// Call first thing in main. No-op when the variable is already set, when
// detection succeeded, or when exec fails.
void pin_blas_coretype(char** argv);

}  // namespace hsgt
