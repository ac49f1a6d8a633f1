#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

namespace vct {

/// Purpose of a random stream. Each (seed, entity, role) triple addresses an
/// independent sequence, so adding patients or roles never shifts the draws
/// of existing ones.
enum class StreamRole : std::uint32_t {
  demographics = 1,
  parameters = 2,
  protocol = 3,
  announcement = 4,
  diffusion = 5,
  measurement = 6,
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Philox4x32-10 block function (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) noexcept {
  constexpr std::uint32_t kMul0 = 0xD2511F53U;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57U;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9U;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85U;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

}  // namespace detail

/// Counter-based random stream keyed on (seed, entity, role). Satisfies
/// UniformRandomBitGenerator, so the standard distributions work on it.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t entity, StreamRole role) noexcept
      : role_(static_cast<std::uint32_t>(role)), entity_hi_(static_cast<std::uint32_t>(entity >> 32)) {
    const std::uint64_t k = detail::splitmix64(seed ^ detail::splitmix64(entity + 0x632BE59BD9B4E019ULL));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    entity_lo_ = static_cast<std::uint32_t>(entity);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (cursor_ == 2) refill();
    return buffer_[cursor_++];
  }

  /// Standard normal draw.
  double gaussian() { return normal_(*this); }

  /// Uniform draw in [lo, hi).
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(*this); }

  std::uint64_t blocks_consumed() const noexcept { return block_; }

 private:
  void refill() noexcept {
    const auto out = detail::philox4x32({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                         role_ ^ entity_hi_, entity_lo_},
                                        key_);
    buffer_[0] = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    buffer_[1] = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
    ++block_;
    cursor_ = 0;
  }

  std::array<std::uint32_t, 2> key_{};
  std::uint32_t role_;
  std::uint32_t entity_hi_;
  std::uint32_t entity_lo_{};
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int cursor_ = 2;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace vct
