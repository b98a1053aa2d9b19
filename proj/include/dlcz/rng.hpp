#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace dlcz {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Folds a seed and a list of tags (scenario point, purpose, ...) into one
/// 64-bit key. Different tag lists give statistically independent keys.
std::uint64_t derive_key(std::uint64_t seed,
                         std::initializer_list<std::uint64_t> tags) noexcept;

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Counter-based random stream. The output sequence is a pure function of
/// (key, stream, substream), so any trial can be regenerated in isolation
/// and results do not depend on how work is split across threads.
class CounterRng {
 public:
  using result_type = std::uint32_t;

  CounterRng(std::uint64_t key, std::uint64_t stream,
             std::uint32_t substream = 0) noexcept;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on (0, 1]; safe as a log() argument.
  double uniform_positive() noexcept { return 1.0 - uniform(); }
  bool bernoulli(double p) noexcept { return uniform() < p; }
  /// Standard normal via Box-Muller; both variates of a pair are used.
  double normal() noexcept;
  /// Poisson by sequential inversion; intended for small means.
  int poisson(double mean) noexcept;

 private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> buffer_{};
  int position_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace dlcz
