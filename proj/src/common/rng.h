#ifndef LADPROTO_COMMON_RNG_H_
#define LADPROTO_COMMON_RNG_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace ladproto {

// Seeded generator whose derived draws are identical on every platform.
// std::mt19937_64 is fully specified by the standard; the distributions in
// <random> are not, so the bounded/real/normal draws are done here.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n). n must be > 0.
  size_t uniform_index(size_t n);

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  double normal();

  bool bernoulli(double p) { return uniform01() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n) in draw order (partial Fisher-Yates).
  std::vector<size_t> sample_without_replacement(size_t n, size_t k);

  // Derive an independent stream, e.g. one per evaluation run.
  static uint64_t mix(uint64_t seed, uint64_t stream);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ladproto

#endif  // LADPROTO_COMMON_RNG_H_
