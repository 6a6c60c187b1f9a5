#include "gwx/simd/dispatch.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels.hpp"

namespace gwx::simd {

std::string_view to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::avx512: return "avx512";
  }
  return "unknown";
}

bool isa_supported(Isa isa) noexcept {
#if defined(__x86_64__) || defined(__i386__)
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2: return __builtin_cpu_supports("avx2");
    case Isa::avx512: return __builtin_cpu_supports("avx512f");
  }
  return false;
#else
  return isa == Isa::scalar;
#endif
}

std::vector<Isa> supported_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512}) {
    if (isa_supported(isa)) out.push_back(isa);
  }
  return out;
}

Isa best_isa() noexcept {
  if (isa_supported(Isa::avx512)) return Isa::avx512;
  if (isa_supported(Isa::avx2)) return Isa::avx2;
  return Isa::scalar;
}

Isa active_isa() {
  static const Isa active = [] {
    const char* env = std::getenv("GWX_ISA");
    if (env == nullptr || *env == '\0') return best_isa();
    const std::string name(env);
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512}) {
      if (name == to_string(isa)) {
        if (!isa_supported(isa)) throw std::runtime_error("GWX_ISA=" + name + " is not supported on this CPU");
        return isa;
      }
    }
    throw std::runtime_error("GWX_ISA: unknown instruction set '" + name + "'");
  }();
  return active;
}

void fill_offspring(Isa isa, const ReproductionLaw& law, const RandomStream& stream, std::uint64_t first,
                    std::span<std::uint32_t> out) {
  const auto view = detail::view_of(stream);
  switch (isa) {
    case Isa::avx512: return detail::fill_offspring_avx512(law, view, first, out);
    case Isa::avx2: return detail::fill_offspring_avx2(law, view, first, out);
    case Isa::scalar: return detail::fill_offspring_scalar(law, view, first, out);
  }
}

void fill_offspring(const ReproductionLaw& law, const RandomStream& stream, std::uint64_t first,
                    std::span<std::uint32_t> out) {
  fill_offspring(active_isa(), law, stream, first, out);
}

void fill_uniform(Isa isa, const RandomStream& stream, std::uint64_t first, std::span<double> out) {
  const auto view = detail::view_of(stream);
  switch (isa) {
    case Isa::avx512: return detail::fill_uniform_avx512(view, first, out);
    case Isa::avx2: return detail::fill_uniform_avx2(view, first, out);
    case Isa::scalar: return detail::fill_uniform_scalar(view, first, out);
  }
}

QuietRun quiet_run(Isa isa, std::span<const std::uint32_t> x, std::uint32_t gate, std::int64_t height) {
  if (gate > kMaxQuietGate) throw std::invalid_argument("quiet_run: gate too large");
  switch (isa) {
    case Isa::avx512: return detail::quiet_run_avx512(x, gate, height);
    case Isa::avx2: return detail::quiet_run_avx2(x, gate, height);
    case Isa::scalar: break;
  }
  return detail::quiet_run_scalar(x, gate, height);
}

}  // namespace gwx::simd
