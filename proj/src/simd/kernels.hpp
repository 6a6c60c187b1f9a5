#pragma once

// Per-ISA kernel entry points. Each variant is compiled with a function-level
// target attribute so that no translation unit needs ISA-specific flags.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>

#include "gwx/random_stream.hpp"
#include "gwx/repro_law.hpp"
#include "gwx/simd/dispatch.hpp"

namespace gwx::simd::detail {

struct StreamView {
  PhiloxKey key;
  std::uint32_t ctr2;
  std::uint32_t ctr3;
};

inline StreamView view_of(const RandomStream& s) noexcept {
  const auto c = s.block_counter(0);
  return {s.key(), c[2], c[3]};
}

void fill_offspring_scalar(const ReproductionLaw& law, StreamView s, std::uint64_t first,
                           std::span<std::uint32_t> out);
void fill_uniform_scalar(StreamView s, std::uint64_t first, std::span<double> out);

void fill_offspring_avx2(const ReproductionLaw& law, StreamView s, std::uint64_t first,
                         std::span<std::uint32_t> out);
void fill_uniform_avx2(StreamView s, std::uint64_t first, std::span<double> out);

void fill_offspring_avx512(const ReproductionLaw& law, StreamView s, std::uint64_t first,
                           std::span<std::uint32_t> out);
void fill_uniform_avx512(StreamView s, std::uint64_t first, std::span<double> out);

QuietRun quiet_run_scalar(std::span<const std::uint32_t> x, std::uint32_t gate, std::int64_t height);
QuietRun quiet_run_avx2(std::span<const std::uint32_t> x, std::uint32_t gate, std::int64_t height);
QuietRun quiet_run_avx512(std::span<const std::uint32_t> x, std::uint32_t gate, std::int64_t height);

// With u = m 2^-53 (m = hi 2^21 + (lo >> 11)), 1 - u is exact, so
// 1 - u <= t  iff  m >= B = 2^53 - floor(t 2^53). The main word hi decides the
// comparison unless hi == B >> 21; such ties fall back to the scalar path.
// A bound of 2^32 can never be exceeded, and is clamped to a permanent tie.
inline void head_bounds(const ReproductionLaw& law, std::uint32_t (&out)[4]) noexcept {
  const double* t = law.head_tails().data();
  for (int j = 0; j < 4; ++j) {
    const auto m = (std::uint64_t{1} << 53) - static_cast<std::uint64_t>(std::floor(std::ldexp(t[j], 53)));
    out[j] = static_cast<std::uint32_t>(std::min<std::uint64_t>(m >> 21, 0xFFFFFFFFu));
  }
}

inline PhiloxCounter block_counter(StreamView s, std::uint64_t block) noexcept {
  return {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), s.ctr2, s.ctr3};
}

// Refinement word of draw `index`.
inline std::uint32_t refinement_word(StreamView s, std::uint64_t index) noexcept {
  return philox4x32(block_counter(s, (index >> 2) | kRefinementBit), s.key)[index & 3u];
}

// Offspring of draw `index` whose main word is `hi`.
inline std::uint32_t offspring_from_main(const ReproductionLaw& law, StreamView s, std::uint64_t index,
                                         std::uint32_t hi) {
  return law.sample_tail_variable(1.0 - uniform_from_words(refinement_word(s, index), hi));
}

}  // namespace gwx::simd::detail
