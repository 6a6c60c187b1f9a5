// AVX2 kernels: 8 Philox blocks per vector, kBatch vectors in flight (128 draws per step).

#include <immintrin.h>

#include "kernels.hpp"

#define GWX_AVX2 __attribute__((target("avx2")))

namespace gwx::simd::detail {

namespace {

constexpr int kBatch = 4;
constexpr std::size_t kDrawsPerStep = 32 * kBatch;
constexpr std::size_t kPendingCap = 512;

struct Lanes8 {
  __m256i x0, x1, x2, x3;
};

GWX_AVX2 inline void mulhilo(__m256i a, __m256i m, __m256i& lo, __m256i& hi) {
  const __m256i even = _mm256_mul_epu32(a, m);
  const __m256i odd = _mm256_mul_epu32(_mm256_srli_epi64(a, 32), m);
  lo = _mm256_blend_epi32(even, _mm256_slli_epi64(odd, 32), 0xAA);
  hi = _mm256_blend_epi32(_mm256_srli_epi64(even, 32), odd, 0xAA);
}

// Low and high counter words of blocks block0 .. block0 + 7.
GWX_AVX2 inline void counters(std::uint64_t block0, __m256i& c0, __m256i& c1) {
  const auto lo = static_cast<std::uint32_t>(block0);
  const auto hi = static_cast<std::uint32_t>(block0 >> 32);
  if (lo <= 0xFFFFFFFFu - 7u) {
    c0 = _mm256_add_epi32(_mm256_set1_epi32(static_cast<int>(lo)), _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7));
    c1 = _mm256_set1_epi32(static_cast<int>(hi));
    return;
  }
  alignas(32) std::uint32_t w0[8];
  alignas(32) std::uint32_t w1[8];
  for (int l = 0; l < 8; ++l) {
    const std::uint64_t b = block0 + static_cast<std::uint64_t>(l);
    w0[l] = static_cast<std::uint32_t>(b);
    w1[l] = static_cast<std::uint32_t>(b >> 32);
  }
  c0 = _mm256_load_si256(reinterpret_cast<const __m256i*>(w0));
  c1 = _mm256_load_si256(reinterpret_cast<const __m256i*>(w1));
}

// v[b].x0 and v[b].x1 hold the counter words on entry.
template <int N>
GWX_AVX2 inline void philox(StreamView s, Lanes8 (&v)[N]) {
  for (int b = 0; b < N; ++b) {
    v[b].x2 = _mm256_set1_epi32(static_cast<int>(s.ctr2));
    v[b].x3 = _mm256_set1_epi32(static_cast<int>(s.ctr3));
  }
  const __m256i m0 = _mm256_set1_epi32(static_cast<int>(kPhiloxM0));
  const __m256i m1 = _mm256_set1_epi32(static_cast<int>(kPhiloxM1));
  std::uint32_t k0 = s.key.k0;
  std::uint32_t k1 = s.key.k1;
  for (int r = 0; r < kPhiloxRounds; ++r) {
    if (r > 0) {
      k0 += kPhiloxW0;
      k1 += kPhiloxW1;
    }
    const __m256i key0 = _mm256_set1_epi32(static_cast<int>(k0));
    const __m256i key1 = _mm256_set1_epi32(static_cast<int>(k1));
    for (int b = 0; b < N; ++b) {
      __m256i lo0, hi0, lo1, hi1;
      mulhilo(v[b].x0, m0, lo0, hi0);
      mulhilo(v[b].x2, m1, lo1, hi1);
      v[b] = {_mm256_xor_si256(_mm256_xor_si256(hi1, v[b].x1), key0), lo1,
              _mm256_xor_si256(_mm256_xor_si256(hi0, v[b].x3), key1), lo0};
    }
  }
}

// Uniforms of four blocks; `upper` selects blocks 4..7.
GWX_AVX2 inline __m256d uniforms4(__m256i refine, __m256i main, bool upper) {
  const __m256i ls = _mm256_srli_epi32(refine, 11);
  const __m128i h = upper ? _mm256_extracti128_si256(main, 1) : _mm256_castsi256_si128(main);
  const __m128i l = upper ? _mm256_extracti128_si256(ls, 1) : _mm256_castsi256_si128(ls);
  // unsigned 32-bit -> double: convert as signed and add 2^32 where negative
  const __m256d hs = _mm256_cvtepi32_pd(h);
  const __m256d hd = _mm256_add_pd(hs, _mm256_and_pd(_mm256_cmp_pd(hs, _mm256_setzero_pd(), _CMP_LT_OQ),
                                                     _mm256_set1_pd(0x1p32)));
  return _mm256_add_pd(_mm256_mul_pd(hd, _mm256_set1_pd(0x1p-32)),
                       _mm256_mul_pd(_mm256_cvtepi32_pd(l), _mm256_set1_pd(0x1p-53)));
}

struct HeadBounds {
  __m256i a[4];  // bounds with the sign bit flipped
};

GWX_AVX2 inline __m256i flip(__m256i x) { return _mm256_xor_si256(x, _mm256_set1_epi32(INT32_MIN)); }

GWX_AVX2 inline __m256i head_count(__m256i main, const HeadBounds& h, __m256i& slow) {
  const __m256i hs = flip(main);
  __m256i c = _mm256_setzero_si256();
  for (int j = 0; j < 4; ++j) {
    c = _mm256_sub_epi32(c, _mm256_cmpgt_epi32(hs, h.a[j]));
    slow = _mm256_or_si256(slow, _mm256_cmpeq_epi32(hs, h.a[j]));
  }
  slow = _mm256_or_si256(slow, _mm256_cmpeq_epi32(c, _mm256_set1_epi32(4)));
  return c;
}

struct Pending {
  std::uint64_t index[kPendingCap];
  std::uint32_t main[kPendingCap];
  std::uint32_t* dst[kPendingCap];
  std::size_t size = 0;
};

GWX_AVX2 void flush(const ReproductionLaw& law, StreamView s, Pending& p) {
  alignas(32) std::uint32_t c0[8];
  alignas(32) std::uint32_t c1[8];
  alignas(32) std::uint32_t words[4][8];
  std::size_t i = 0;
  for (; i + 8 <= p.size; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) {
      const std::uint64_t b = (p.index[i + l] >> 2) | kRefinementBit;
      c0[l] = static_cast<std::uint32_t>(b);
      c1[l] = static_cast<std::uint32_t>(b >> 32);
    }
    Lanes8 v[1];
    v[0].x0 = _mm256_load_si256(reinterpret_cast<const __m256i*>(c0));
    v[0].x1 = _mm256_load_si256(reinterpret_cast<const __m256i*>(c1));
    philox(s, v);
    _mm256_store_si256(reinterpret_cast<__m256i*>(words[0]), v[0].x0);
    _mm256_store_si256(reinterpret_cast<__m256i*>(words[1]), v[0].x1);
    _mm256_store_si256(reinterpret_cast<__m256i*>(words[2]), v[0].x2);
    _mm256_store_si256(reinterpret_cast<__m256i*>(words[3]), v[0].x3);
    for (std::size_t l = 0; l < 8; ++l) {
      const std::uint32_t r = words[p.index[i + l] & 3u][l];
      *p.dst[i + l] = law.sample_tail_variable(1.0 - uniform_from_words(r, p.main[i + l]));
    }
  }
  for (; i < p.size; ++i) *p.dst[i] = offspring_from_main(law, s, p.index[i], p.main[i]);
  p.size = 0;
}

}  // namespace

GWX_AVX2 void fill_offspring_avx2(const ReproductionLaw& law, StreamView s, std::uint64_t first,
                                  std::span<std::uint32_t> out) {
  const std::size_t lead = std::min<std::size_t>(out.size(), (4 - (first & 3u)) & 3u);
  if (lead > 0) fill_offspring_scalar(law, s, first, out.first(lead));
  std::size_t i = lead;
  std::uint32_t bounds[4];
  head_bounds(law, bounds);
  HeadBounds h;
  for (int j = 0; j < 4; ++j) h.a[j] = flip(_mm256_set1_epi32(static_cast<int>(bounds[j])));
  alignas(32) std::uint32_t words[4][8];
  Pending pending;

  for (; out.size() - i >= kDrawsPerStep; i += kDrawsPerStep) {
    const std::uint64_t block0 = (first + i) >> 2;
    Lanes8 x[kBatch];
    for (int b = 0; b < kBatch; ++b) counters(block0 + 8u * static_cast<unsigned>(b), x[b].x0, x[b].x1);
    philox(s, x);
    for (int b = 0; b < kBatch; ++b) {
      __m256i sl[4] = {_mm256_setzero_si256(), _mm256_setzero_si256(), _mm256_setzero_si256(), _mm256_setzero_si256()};
      const __m256i c0 = head_count(x[b].x0, h, sl[0]);
      const __m256i c1 = head_count(x[b].x1, h, sl[1]);
      const __m256i c2 = head_count(x[b].x2, h, sl[2]);
      const __m256i c3 = head_count(x[b].x3, h, sl[3]);
      // 4 x 8 transpose: draw 4l + w comes from c_w lane l
      const __m256i t0 = _mm256_unpacklo_epi32(c0, c1);
      const __m256i t1 = _mm256_unpackhi_epi32(c0, c1);
      const __m256i t2 = _mm256_unpacklo_epi32(c2, c3);
      const __m256i t3 = _mm256_unpackhi_epi32(c2, c3);
      const __m256i u0 = _mm256_unpacklo_epi64(t0, t2);
      const __m256i u1 = _mm256_unpackhi_epi64(t0, t2);
      const __m256i u2 = _mm256_unpacklo_epi64(t1, t3);
      const __m256i u3 = _mm256_unpackhi_epi64(t1, t3);
      std::uint32_t* dst = out.data() + i + 32 * static_cast<std::size_t>(b);
      auto* d = reinterpret_cast<__m256i*>(dst);
      _mm256_storeu_si256(d, _mm256_permute2x128_si256(u0, u1, 0x20));
      _mm256_storeu_si256(d + 1, _mm256_permute2x128_si256(u2, u3, 0x20));
      _mm256_storeu_si256(d + 2, _mm256_permute2x128_si256(u0, u1, 0x31));
      _mm256_storeu_si256(d + 3, _mm256_permute2x128_si256(u2, u3, 0x31));
      int slow[4];
      for (int w = 0; w < 4; ++w) slow[w] = _mm256_movemask_ps(_mm256_castsi256_ps(sl[w]));
      if ((slow[0] | slow[1] | slow[2] | slow[3]) == 0) continue;
      _mm256_store_si256(reinterpret_cast<__m256i*>(words[0]), x[b].x0);
      _mm256_store_si256(reinterpret_cast<__m256i*>(words[1]), x[b].x1);
      _mm256_store_si256(reinterpret_cast<__m256i*>(words[2]), x[b].x2);
      _mm256_store_si256(reinterpret_cast<__m256i*>(words[3]), x[b].x3);
      for (int w = 0; w < 4; ++w) {
        for (unsigned m = static_cast<unsigned>(slow[w]); m != 0; m &= m - 1) {
          const auto l = static_cast<unsigned>(__builtin_ctz(m));
          const std::size_t pos = 4 * l + static_cast<unsigned>(w);
          pending.index[pending.size] = first + i + 32 * static_cast<std::size_t>(b) + pos;
          pending.main[pending.size] = words[w][l];
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

GWX_AVX2 void fill_uniform_avx2(StreamView s, std::uint64_t first, std::span<double> out) {
  const std::size_t lead = std::min<std::size_t>(out.size(), (4 - (first & 3u)) & 3u);
  if (lead > 0) fill_uniform_scalar(s, first, out.first(lead));
  std::size_t i = lead;
  alignas(32) double u[4][8];
  constexpr std::size_t kStep = 32;
  for (; out.size() - i >= kStep; i += kStep) {
    const std::uint64_t block0 = (first + i) >> 2;
    Lanes8 x[2];
    counters(block0, x[0].x0, x[0].x1);
    counters(block0 | kRefinementBit, x[1].x0, x[1].x1);
    philox(s, x);
    const __m256i main[4] = {x[0].x0, x[0].x1, x[0].x2, x[0].x3};
    const __m256i refine[4] = {x[1].x0, x[1].x1, x[1].x2, x[1].x3};
    for (int w = 0; w < 4; ++w) {
      _mm256_store_pd(&u[w][0], uniforms4(refine[w], main[w], false));
      _mm256_store_pd(&u[w][4], uniforms4(refine[w], main[w], true));
    }
    double* dst = out.data() + i;
    for (int l = 0; l < 8; ++l) {
      for (int w = 0; w < 4; ++w) dst[4 * l + w] = u[w][l];
    }
  }
  if (i < out.size()) fill_uniform_scalar(s, first + i, out.subspan(i));
}

GWX_AVX2 QuietRun quiet_run_avx2(std::span<const std::uint32_t> x, std::uint32_t gate, std::int64_t height) {
  constexpr auto kChunk = static_cast<std::int64_t>(kQuietChunk);
  static_assert(kQuietChunk == 64);
  const __m256i g = _mm256_set1_epi32(static_cast<int>(gate));
  QuietRun r;
  while (x.size() - r.length >= kQuietChunk && height > kChunk) {
    const auto* p = reinterpret_cast<const __m256i*>(x.data() + r.length);
    __m256i mx = _mm256_loadu_si256(p);
    __m256i sum = mx;
    for (int j = 1; j < 8; ++j) {
      const __m256i v = _mm256_loadu_si256(p + j);
      mx = _mm256_max_epu32(mx, v);
      sum = _mm256_add_epi32(sum, v);
    }
    // all lanes <= gate iff max(mx, gate) == gate
    const __m256i ok = _mm256_cmpeq_epi32(_mm256_max_epu32(mx, g), g);
    if (_mm256_movemask_epi8(ok) != -1) break;
    __m128i s4 = _mm_add_epi32(_mm256_castsi256_si128(sum), _mm256_extracti128_si256(sum, 1));
    s4 = _mm_add_epi32(s4, _mm_shuffle_epi32(s4, 0x4E));
    s4 = _mm_add_epi32(s4, _mm_shuffle_epi32(s4, 0xB1));
    const auto total = static_cast<std::uint32_t>(_mm_cvtsi128_si32(s4));
    r.length += kQuietChunk;
    r.sum += total;
    height += static_cast<std::int64_t>(total) - kChunk;
  }
  return r;
}

}  // namespace gwx::simd::detail
