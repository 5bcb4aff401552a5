#pragma once

#include <array>
#include <cstdint>

namespace spr {

// Philox4x32-10 block function (Salmon et al., SC'11). Counter-based: every
// (key, counter) pair maps to four independent 32-bit words, so streams can
// be addressed directly instead of advanced.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;
  static Counter block(Counter counter, Key key);
};

// Sequential draws from one Philox stream. The 64-bit seed is the key, the
// 64-bit stream id fills the upper counter words and the lower words count
// blocks. All transforms are written out here so draws are identical on
// every platform.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  double uniform();  // [0,1), 53-bit resolution
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();       // standard normal, Box-Muller
  double exponential();  // rate 1
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
};

// Stream id for Monte-Carlo round `run`, leaf index `leaf`.
inline std::uint64_t stream_id(std::uint32_t run, std::uint32_t leaf) {
  return (std::uint64_t{run} << 32) | leaf;
}

// Reserved stream for structure generation (never a (run, leaf) pair in practice).
inline constexpr std::uint64_t kStructureStream = ~std::uint64_t{0};

}  // namespace spr
