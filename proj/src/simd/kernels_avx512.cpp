// AVX-512F kernels.
//
// Each 64-bit lane carries one Philox block, with the 32-bit state word in the
// low half; whatever sits in the high half is ignored by _mm512_mul_epu32 and
// never reaches the output. This avoids the blends of a packed layout.

#include <immintrin.h>

#include "kernels.hpp"

#define GWX_AVX512 __attribute__((target("avx512f")))

namespace gwx::simd::detail {

namespace {

constexpr int kBatch = 4;  // vectors in flight, 8 blocks each
constexpr std::size_t kDrawsPerStep = 32 * kBatch;
constexpr std::size_t kPendingCap = 512;

struct Blocks8 {
  __m512i x0, x1, x2, x3;
};

template <int N>
GWX_AVX512 inline void philox(const __m512i (&blk)[N], StreamView s, Blocks8 (&v)[N]) {
  for (int b = 0; b < N; ++b) {
    v[b].x0 = blk[b];
    v[b].x1 = _mm512_srli_epi64(blk[b], 32);
    v[b].x2 = _mm512_set1_epi64(s.ctr2);
    v[b].x3 = _mm512_set1_epi64(s.ctr3);
  }
  const __m512i m0 = _mm512_set1_epi64(kPhiloxM0);
  const __m512i m1 = _mm512_set1_epi64(kPhiloxM1);
  std::uint32_t k0 = s.key.k0;
  std::uint32_t k1 = s.key.k1;
  for (int r = 0; r < kPhiloxRounds; ++r) {
    if (r > 0) {
      k0 += kPhiloxW0;
      k1 += kPhiloxW1;
    }
    const __m512i key0 = _mm512_set1_epi64(k0);
    const __m512i key1 = _mm512_set1_epi64(k1);
    for (int b = 0; b < N; ++b) {
      const __m512i p0 = _mm512_mul_epu32(v[b].x0, m0);
      const __m512i p1 = _mm512_mul_epu32(v[b].x2, m1);
      v[b] = {_mm512_ternarylogic_epi64(_mm512_srli_epi64(p1, 32), v[b].x1, key0, 0x96), p1,
              _mm512_ternarylogic_epi64(_mm512_srli_epi64(p0, 32), v[b].x3, key1, 0x96), p0};
    }
  }
}

GWX_AVX512 inline __m512i block_ids(std::uint64_t block0) {
  return _mm512_add_epi64(_mm512_set1_epi64(static_cast<long long>(block0)), _mm512_set_epi64(7, 6, 5, 4, 3, 2, 1, 0));
}

GWX_AVX512 inline __m512i low32(__m512i x) { return _mm512_and_si512(x, _mm512_set1_epi64(0xFFFFFFFFLL)); }

// Exact int -> double for values below 2^52.
GWX_AVX512 inline __m512d to_double(__m512i x) {
  const __m512i magic = _mm512_set1_epi64(0x4330000000000000LL);
  return _mm512_sub_pd(_mm512_castsi512_pd(_mm512_or_si512(x, magic)), _mm512_set1_pd(0x1p52));
}

GWX_AVX512 inline __m512d uniforms(__m512i refine, __m512i main) {
  return _mm512_add_pd(_mm512_mul_pd(to_double(low32(main)), _mm512_set1_pd(0x1p-32)),
                       _mm512_mul_pd(to_double(_mm512_srli_epi64(low32(refine), 11)), _mm512_set1_pd(0x1p-53)));
}

constexpr __mmask16 kEven = 0x5555;

struct HeadBounds {
  __m512i a[4];
};

// Per-block count of j in 0..3 with 1 - u <= tail(j), in the low half of each
// 64-bit lane. `slow` marks (in even bits) ties with a bound and counts of 4.
GWX_AVX512 inline __m512i head_count(__m512i main, const HeadBounds& h, __mmask16& slow) {
  const __m512i one = _mm512_set1_epi32(1);
  __m512i c = _mm512_setzero_si512();
  for (int j = 0; j < 4; ++j) {
    c = _mm512_mask_add_epi32(c, _mm512_mask_cmpgt_epu32_mask(kEven, main, h.a[j]), c, one);
    slow |= _mm512_mask_cmpeq_epi32_mask(kEven, main, h.a[j]);
  }
  slow |= _mm512_mask_cmpeq_epi32_mask(kEven, c, _mm512_set1_epi32(4));
  return c;
}

struct Pending {
  std::uint64_t index[kPendingCap];
  std::uint32_t main[kPendingCap];
  std::uint32_t* dst[kPendingCap];
  std::size_t size = 0;
};

// Completes the pending draws, eight refinement blocks per Philox call.
GWX_AVX512 void flush(const ReproductionLaw& law, StreamView s, Pending& p) {
  alignas(64) std::uint64_t words[4][8];
  std::size_t i = 0;
  for (; i + 8 <= p.size; i += 8) {
    const __m512i idx = _mm512_loadu_si512(p.index + i);
    const __m512i blk[1] = {_mm512_or_si512(_mm512_srli_epi64(idx, 2), _mm512_set1_epi64(static_cast<long long>(kRefinementBit)))};
    Blocks8 v[1];
    philox(blk, s, v);
    _mm512_store_si512(words[0], v[0].x0);
    _mm512_store_si512(words[1], v[0].x1);
    _mm512_store_si512(words[2], v[0].x2);
    _mm512_store_si512(words[3], v[0].x3);
    for (std::size_t l = 0; l < 8; ++l) {
      const auto r = static_cast<std::uint32_t>(words[p.index[i + l] & 3u][l]);
      *p.dst[i + l] = law.sample_tail_variable(1.0 - uniform_from_words(r, p.main[i + l]));
    }
  }
  for (; i < p.size; ++i) *p.dst[i] = offspring_from_main(law, s, p.index[i], p.main[i]);
  p.size = 0;
}

}  // namespace

GWX_AVX512 void fill_offspring_avx512(const ReproductionLaw& law, StreamView s, std::uint64_t first,
                                      std::span<std::uint32_t> out) {
  const std::size_t lead = std::min<std::size_t>(out.size(), (4 - (first & 3u)) & 3u);
  if (lead > 0) fill_offspring_scalar(law, s, first, out.first(lead));
  std::size_t i = lead;
  std::uint32_t bounds[4];
  head_bounds(law, bounds);
  HeadBounds h;
  for (int j = 0; j < 4; ++j) h.a[j] = _mm512_set1_epi32(static_cast<int>(bounds[j]));
  const __m512i lo_idx = _mm512_set_epi64(11, 3, 10, 2, 9, 1, 8, 0);
  const __m512i hi_idx = _mm512_set_epi64(15, 7, 14, 6, 13, 5, 12, 4);
  alignas(64) std::uint64_t words[4][8];
  Pending pending;

  for (; out.size() - i >= kDrawsPerStep; i += kDrawsPerStep) {
    const std::uint64_t block0 = (first + i) >> 2;
    __m512i blk[kBatch];
    for (int b = 0; b < kBatch; ++b) blk[b] = block_ids(block0 + 8u * static_cast<unsigned>(b));
    Blocks8 x[kBatch];
    philox(blk, s, x);
    for (int b = 0; b < kBatch; ++b) {
      __mmask16 slow[4] = {0, 0, 0, 0};
      const __m512i c0 = head_count(x[b].x0, h, slow[0]);
      const __m512i c1 = head_count(x[b].x1, h, slow[1]);
      const __m512i c2 = head_count(x[b].x2, h, slow[2]);
      const __m512i c3 = head_count(x[b].x3, h, slow[3]);
      const __m512i c01 = _mm512_or_si512(c0, _mm512_slli_epi64(c1, 32));
      const __m512i c23 = _mm512_or_si512(c2, _mm512_slli_epi64(c3, 32));
      std::uint32_t* dst = out.data() + i + 32 * static_cast<std::size_t>(b);
      _mm512_storeu_si512(dst, _mm512_permutex2var_epi64(c01, lo_idx, c23));
      _mm512_storeu_si512(dst + 16, _mm512_permutex2var_epi64(c01, hi_idx, c23));
      if ((slow[0] | slow[1] | slow[2] | slow[3]) == 0) continue;
      _mm512_store_si512(words[0], x[b].x0);
      _mm512_store_si512(words[1], x[b].x1);
      _mm512_store_si512(words[2], x[b].x2);
      _mm512_store_si512(words[3], x[b].x3);
      for (int w = 0; w < 4; ++w) {
        for (unsigned m = slow[w]; m != 0; m &= m - 1) {
          const unsigned l = static_cast<unsigned>(__builtin_ctz(m)) / 2;
          const std::size_t pos = 4 * l + static_cast<unsigned>(w);
          pending.index[pending.size] = first + i + 32 * static_cast<std::size_t>(b) + pos;
          pending.main[pending.size] = static_cast<std::uint32_t>(words[w][l]);
          pending.dst[pending.size] = dst + pos;
          ++pending.size;
        }
      }
      if (pending.size > kPendingCap - 32) flush(law, s, pending);
    }
  }
  flush(law, s, pending);
  if (i < out.size()) fill_offspring_scalar(law, s, first + i, out.subspan(i));
}

GWX_AVX512 void fill_uniform_avx512(StreamView s, std::uint64_t first, std::span<double> out) {
  const std::size_t lead = std::min<std::size_t>(out.size(), (4 - (first & 3u)) & 3u);
  if (lead > 0) fill_uniform_scalar(s, first, out.first(lead));
  std::size_t i = lead;
  const __m512i refine_bit = _mm512_set1_epi64(static_cast<long long>(kRefinementBit));
  alignas(64) double u[4][8];
  constexpr std::size_t kStep = 32;
  for (; out.size() - i >= kStep; i += kStep) {
    const __m512i id = block_ids((first + i) >> 2);
    const __m512i blk[2] = {id, _mm512_or_si512(id, refine_bit)};
    Blocks8 x[2];
    philox(blk, s, x);
    _mm512_store_pd(u[0], uniforms(x[1].x0, x[0].x0));
    _mm512_store_pd(u[1], uniforms(x[1].x1, x[0].x1));
    _mm512_store_pd(u[2], uniforms(x[1].x2, x[0].x2));
    _mm512_store_pd(u[3], uniforms(x[1].x3, x[0].x3));
    double* dst = out.data() + i;
    for (int l = 0; l < 8; ++l) {
      for (int w = 0; w < 4; ++w) dst[4 * l + w] = u[w][l];
    }
  }
  if (i < out.size()) fill_uniform_scalar(s, first + i, out.subspan(i));
}

// Values are <= 2^24, so 32-bit lane sums over one chunk cannot overflow.
GWX_AVX512 QuietRun quiet_run_avx512(std::span<const std::uint32_t> x, std::uint32_t gate, std::int64_t height) {
  constexpr auto kChunk = static_cast<std::int64_t>(kQuietChunk);
  static_assert(kQuietChunk == 64);
  const __m512i g = _mm512_set1_epi32(static_cast<int>(gate));
  QuietRun r;
  while (x.size() - r.length >= kQuietChunk && height > kChunk) {
    const std::uint32_t* p = x.data() + r.length;
    const __m512i v0 = _mm512_loadu_si512(p);
    const __m512i v1 = _mm512_loadu_si512(p + 16);
    const __m512i v2 = _mm512_loadu_si512(p + 32);
    const __m512i v3 = _mm512_loadu_si512(p + 48);
    const __mmask16 over = _mm512_cmpgt_epu32_mask(v0, g) | _mm512_cmpgt_epu32_mask(v1, g) |
                           _mm512_cmpgt_epu32_mask(v2, g) | _mm512_cmpgt_epu32_mask(v3, g);
    if (over != 0) break;
    const auto sum = static_cast<std::uint32_t>(
        _mm512_reduce_add_epi32(_mm512_add_epi32(_mm512_add_epi32(v0, v1), _mm512_add_epi32(v2, v3))));
    r.length += kQuietChunk;
    r.sum += sum;
    height += static_cast<std::int64_t>(sum) - kChunk;
  }
  return r;
}

}  // namespace gwx::simd::detail
