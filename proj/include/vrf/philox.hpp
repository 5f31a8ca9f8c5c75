#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The 64-bit
// seed is the key; the counter walks through blocks of four 32-bit outputs.
// Output depends only on (seed, stream, position), so runs reproduce across
// platforms and compilers.

#include <array>
#include <cstdint>

namespace vrf {

class Philox {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0);

  /// The raw ten-round bijection.
  static Block block(Key key, Block counter);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  /// Exponential with the given rate.
  double exponential(double rate);

 private:
  Key key_;
  Block counter_;
  Block buffer_{};
  int used_ = 4;
};

/// splitmix64 finalizer; used to derive independent seeds from coordinates.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace vrf
