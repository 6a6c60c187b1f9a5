#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "gwx/random_stream.hpp"
#include "gwx/repro_law.hpp"

namespace gwx::simd {

enum class Isa { scalar, avx2, avx512 };

std::string_view to_string(Isa isa) noexcept;
bool isa_supported(Isa isa) noexcept;
std::vector<Isa> supported_isas();
Isa best_isa() noexcept;
/// ISA used by the unqualified kernels: best_isa(), unless the environment
/// variable GWX_ISA names another supported one (scalar, avx2, avx512).
Isa active_isa();

/// out[i] = law.sample_tail_variable(1 - u_{first+i}), where u_j is draw j of
/// `stream` mapped by uniform_from_words. Every ISA produces identical output.
/// The stream position is neither read nor modified.
void fill_offspring(Isa isa, const ReproductionLaw& law, const RandomStream& stream, std::uint64_t first,
                    std::span<std::uint32_t> out);
void fill_offspring(const ReproductionLaw& law, const RandomStream& stream, std::uint64_t first,
                    std::span<std::uint32_t> out);

//! out[i] = u_{first+i} in [0,1).
void fill_uniform(Isa isa, const RandomStream& stream, std::uint64_t first, std::span<double> out);

inline constexpr std::size_t kQuietChunk = 64;
inline constexpr std::uint32_t kMaxQuietGate = (1u << 24) - 1;

struct QuietRun {
  std::size_t length = 0;
  std::uint64_t sum = 0;
};

/// Longest prefix of x made of whole kQuietChunk-element chunks such that every
/// value is <= gate and, before each chunk, height + (sum so far) - (length so far)
/// exceeds kQuietChunk. A walk started at `height` cannot reach 0 inside it.
/// gate must not exceed kMaxQuietGate.
QuietRun quiet_run(Isa isa, std::span<const std::uint32_t> x, std::uint32_t gate, std::int64_t height);

}  // namespace gwx::simd
