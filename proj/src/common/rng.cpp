#include "common/rng.h"

#include <cmath>
#include <numbers>

#include "common/error.h"

namespace ladproto {

size_t Rng::uniform_index(size_t n) {
  if (n == 0) fail(ErrorKind::kState, "uniform_index: empty range");
  const uint64_t bound = static_cast<uint64_t>(n);
  // Rejection keeps the draw exactly uniform.
  const uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<size_t>(x % bound);
}

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::vector<size_t> Rng::sample_without_replacement(size_t n, size_t k) {
  if (k > n) fail(ErrorKind::kInfeasible, "cannot sample " + std::to_string(k) +
                                              " of " + std::to_string(n));
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

uint64_t Rng::mix(uint64_t seed, uint64_t stream) {
  // splitmix64 finalizer over the pair.
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace ladproto
