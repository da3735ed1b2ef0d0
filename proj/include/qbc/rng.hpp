#pragma once

// Counter-based deterministic random streams (Philox4x32-10).
//
// A stream is identified by (seed, stream id); the n-th 128-bit block of a
// stream is a pure function of (seed, stream id, n), so sessions can draw
// from independent streams in any order or on any thread and still produce
// identical results.

#include <array>
#include <cstdint>
#include <limits>

namespace qbc {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

Philox4x32Counter philox4x32_10(Philox4x32Counter counter, Philox4x32Key key);

class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on {0, ..., n−1}; n > 0. Unbiased (Lemire's multiply-and-reject).
  std::uint64_t uniform_index(std::uint64_t n);
  /// Standard normal variate (Box–Muller, one output per call).
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  unsigned used_ = 2;
};

enum class StreamRole : std::uint8_t { World = 0, Alice = 1, Bob = 2, Diagnostic = 3, Trial = 4 };

/// Independent stream for one role within one session of a seeded experiment.
CounterRng session_stream(std::uint64_t master_seed, std::uint64_t session_index, StreamRole role);

}  // namespace qbc
