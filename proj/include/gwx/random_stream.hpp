#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace gwx {

//! Philox4x32 key and counter words.
struct PhiloxKey {
  std::uint32_t k0 = 0;
  std::uint32_t k1 = 0;
};
using PhiloxCounter = std::array<std::uint32_t, 4>;

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;
inline constexpr int kPhiloxRounds = 10;

//! Philox4x32-10 block function (Salmon et al., Random123 conventions).
constexpr PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) noexcept {
  for (int r = 0; r < kPhiloxRounds; ++r) {
    if (r > 0) {
      key.k0 += kPhiloxW0;
      key.k1 += kPhiloxW1;
    }
    const std::uint64_t p0 = std::uint64_t{kPhiloxM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kPhiloxM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key.k0, lo1, hi0 ^ ctr[3] ^ key.k1, lo0};
  }
  return ctr;
}

//! Map a draw (refinement word lo, main word hi) to u in [0,1) with 53 random bits:
//! u = hi 2^-32 + (lo >> 11) 2^-53. Both terms and the sum are exact.
constexpr double uniform_from_words(std::uint32_t lo, std::uint32_t hi) noexcept {
  return static_cast<double>(hi) * 0x1p-32 + static_cast<double>(lo >> 11) * 0x1p-53;
}

//! Set in the high counter word of refinement blocks.
inline constexpr std::uint64_t kRefinementBit = std::uint64_t{1} << 63;

/// Counter-based random stream.
///
/// Draw number i of the stream identified by (seed, stream_index, phase) is a
/// pure function of those four values. Its main word is word i%4 of the Philox
/// block with counter {b (64 bits), stream_index low word, stream_index high bits | phase},
/// b = i/4; its refinement word is word i%4 of block b | kRefinementBit.
/// Streams are therefore reproducible regardless of how draws are batched or
/// which worker executes them. stream_index must fit in 56 bits.
///
/// Most offspring draws are decided by the main word alone, so the kernels
/// compute refinement blocks only on demand.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, std::uint64_t stream_index, std::uint32_t phase = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next_u64(); }
  //! (main << 32) | refinement of the next draw.
  std::uint64_t next_u64() noexcept;

  //! Uniform in [0,1).
  double uniform() noexcept;

  std::uint64_t position() const noexcept { return position_; }
  void seek(std::uint64_t position) noexcept { position_ = position; }
  void advance(std::uint64_t count) noexcept { position_ += count; }

  PhiloxKey key() const noexcept { return key_; }
  PhiloxCounter block_counter(std::uint64_t block) const noexcept {
    return {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), ctr2_, ctr3_};
  }
  //! The (refinement, main) words of draw `index`, independent of the stream position.
  std::array<std::uint32_t, 2> words_at(std::uint64_t index) const noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_index() const noexcept { return stream_index_; }
  std::uint32_t phase() const noexcept { return phase_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_index_;
  std::uint32_t phase_;
  PhiloxKey key_;
  std::uint32_t ctr2_;
  std::uint32_t ctr3_;
  std::uint64_t position_ = 0;
  std::uint64_t cached_block_ = std::numeric_limits<std::uint64_t>::max();
  PhiloxCounter cached_main_{};
  PhiloxCounter cached_refine_{};
};

}  // namespace gwx
