#include "gwx/random_stream.hpp"

namespace gwx {

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_index, std::uint32_t phase) noexcept
    : seed_(seed),
      stream_index_(stream_index),
      phase_(phase),
      key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      ctr2_(static_cast<std::uint32_t>(stream_index)),
      ctr3_(static_cast<std::uint32_t>((stream_index >> 32) & 0x00FFFFFFu) | (phase << 24)) {}

std::array<std::uint32_t, 2> RandomStream::words_at(std::uint64_t index) const noexcept {
  const std::uint64_t block = index >> 2;
  const unsigned w = static_cast<unsigned>(index & 3u);
  return {philox4x32(block_counter(block | kRefinementBit), key_)[w], philox4x32(block_counter(block), key_)[w]};
}

std::uint64_t RandomStream::next_u64() noexcept {
  const std::uint64_t block = position_ >> 2;
  if (block != cached_block_) {
    cached_main_ = philox4x32(block_counter(block), key_);
    cached_refine_ = philox4x32(block_counter(block | kRefinementBit), key_);
    cached_block_ = block;
  }
  const unsigned w = static_cast<unsigned>(position_ & 3u);
  ++position_;
  return (std::uint64_t{cached_main_[w]} << 32) | cached_refine_[w];
}

double RandomStream::uniform() noexcept {
  const std::uint64_t x = next_u64();
  return uniform_from_words(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(x >> 32));
}

}  // namespace gwx
