#pragma once

// Seeded random streams.
//
// Engine: std::mt19937_64, whose output sequence is fixed by the standard.
// The standard distributions are not (their algorithms are implementation
// defined), so the transforms below are spelled out here to keep generated
// data bitwise identical across toolchains.
//
// Stream splitting: Rng(seed, stream) seeds the engine with
// splitmix64(seed ^ splitmix64(stream + 1)), so data generation, training and
// benchmark trials draw from unrelated streams of one user seed.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace deferlab {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Well-known stream ids.
enum class Stream : std::uint64_t {
  Data = 1,
  Planted = 2,
  Split = 3,
  TrainInit = 4,
  TrainShuffle = 5,
  Heuristic = 6,
  Trial = 7,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);
  Rng(std::uint64_t seed, Stream stream) : Rng(seed, static_cast<std::uint64_t>(stream)) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal via Box-Muller (both variates used).
  double normal();

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace deferlab
