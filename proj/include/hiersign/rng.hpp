#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hiersign {

// Label addressing one random stream. Unused coordinates stay at -1.
// Streams for distinct labels are statistically independent; the same
// (master_seed, label) always reproduces the same stream, which is what
// makes runs byte-identical regardless of worker count.
struct StreamLabel {
  std::int64_t round = -1;   // global round t
  std::int64_t step = -1;    // edge round tau
  std::int64_t edge = -1;    // q
  std::int64_t device = -1;  // k
  std::string_view purpose;  // "batch", "tie", "mask", "init", ...
};

// One forked random stream. Thin wrapper over mt19937_64 whose seed is a
// SplitMix64 hash of (master_seed, label).
class RngStream {
 public:
  explicit RngStream(std::uint64_t stream_seed) : engine_(stream_seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  // {0, ..., n-1}
  std::uint64_t uniform_below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }
  double normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  double gamma(double shape) {
    return std::gamma_distribution<double>(shape, 1.0)(engine_);
  }
  bool coin() { return (engine_() >> 63) != 0; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Maps (master_seed, label) to a stream seed via SplitMix64 absorption.
std::uint64_t stream_seed(std::uint64_t master_seed, const StreamLabel& label);

RngStream fork_rng(std::uint64_t master_seed, const StreamLabel& label);

}  // namespace hiersign
