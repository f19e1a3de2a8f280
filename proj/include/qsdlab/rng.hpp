#pragma once

// Counter-based random numbers (Philox4x32-10).
//
// Every particle owns an RngStream (root seed, stream index). The engine keys
// Philox with the seed and places the stream index and a running block
// counter in the 128-bit counter, so draw k of stream s is a pure function of
// (seed, s, k). Results therefore do not depend on thread scheduling.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace qsdlab {

struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  friend bool operator==(const RngStream&, const RngStream&) = default;
};

namespace detail {

inline void philox_mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, hi0, lo1, hi1;
    philox_mulhilo(kM0, ctr[0], lo0, hi0);
    philox_mulhilo(kM1, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

}  // namespace detail

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(RngStream id) : id_(id) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    if (avail_ == 0) refill();
    const std::uint64_t v = (static_cast<std::uint64_t>(block_[4 - avail_]) << 32) | block_[5 - avail_];
    avail_ -= 2;
    return v;
  }

  // Uniform on the open interval (0,1); never returns 0 or 1.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) (Lemire's multiply-shift with rejection).
  std::uint64_t uniform_index(std::uint64_t n) {
    std::uint64_t x = next_u64();
    unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = next_u64();
        m = static_cast<unsigned __int128>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Standard normal by Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  const RngStream& id() const { return id_; }
  std::uint64_t blocks_used() const { return counter_; }

 private:
  void refill() {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(id_.stream), static_cast<std::uint32_t>(id_.stream >> 32),
        static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32)};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(id_.seed),
                                              static_cast<std::uint32_t>(id_.seed >> 32)};
    block_ = detail::philox4x32_10(ctr, key);
    ++counter_;
    avail_ = 4;
  }

  RngStream id_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int avail_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace qsdlab
