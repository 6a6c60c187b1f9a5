// Reference kernels. The SIMD variants must match these bit for bit.

#include <algorithm>

#include "kernels.hpp"

namespace gwx::simd::detail {

void fill_offspring_scalar(const ReproductionLaw& law, StreamView s, std::uint64_t first,
                           std::span<std::uint32_t> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint64_t index = first + i;
    const std::uint32_t hi = philox4x32(block_counter(s, index >> 2), s.key)[index & 3u];
    out[i] = offspring_from_main(law, s, index, hi);
  }
}

void fill_uniform_scalar(StreamView s, std::uint64_t first, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint64_t index = first + i;
    const std::uint32_t hi = philox4x32(block_counter(s, index >> 2), s.key)[index & 3u];
    out[i] = uniform_from_words(refinement_word(s, index), hi);
  }
}

QuietRun quiet_run_scalar(std::span<const std::uint32_t> x, std::uint32_t gate, std::int64_t height) {
  constexpr auto kChunk = static_cast<std::int64_t>(kQuietChunk);
  QuietRun r;
  while (x.size() - r.length >= kQuietChunk && height > kChunk) {
    const std::uint32_t* p = x.data() + r.length;
    std::uint32_t mx = 0;
    std::uint64_t sum = 0;
    for (std::size_t j = 0; j < kQuietChunk; ++j) {
      mx = std::max(mx, p[j]);
      sum += p[j];
    }
    if (mx > gate) break;
    r.length += kQuietChunk;
    r.sum += sum;
    height += static_cast<std::int64_t>(sum) - kChunk;
  }
  return r;
}

}  // namespace gwx::simd::detail
