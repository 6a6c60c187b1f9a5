#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "gwx/random_stream.hpp"
#include "gwx/repro_law.hpp"
#include "gwx/simd/dispatch.hpp"

namespace gwx {

inline constexpr int kDefaultOrderStatistics = 16;

struct SimConfig {
  std::int64_t k = 1;
  int m = kDefaultOrderStatistics;
  std::int64_t max_steps = 1'000'000;
  std::uint64_t seed = 0;
  //! For each level L, the record counts individuals with more than L offspring. Strictly increasing.
  std::vector<std::uint32_t> count_levels;

  void validate() const;
};

/// Result of one forest simulation.
///
/// When not censored, total_population == steps_used is the first hitting
/// time of -k by the walk S_i = sum_{j<=i} (X_j - 1). When censored, top and
/// counts_above describe the first max_steps individuals only.
struct OffspringRecord {
  std::int64_t ancestors = 0;
  std::int64_t total_population = 0;
  std::vector<std::uint32_t> top;  // nonincreasing, at most m entries
  bool censored = false;
  std::int64_t steps_used = 0;
  std::vector<std::int64_t> counts_above;

  std::uint32_t max() const { return top.empty() ? 0u : top.front(); }
};

template <class S>
concept OffspringSource = requires(S& s, std::span<std::uint32_t> out) { s.fill(out); };

/// Offspring counts drawn from a law through the SIMD kernels.
/// Consumes draws of `stream` from its current position onward.
class LawSource {
 public:
  LawSource(const ReproductionLaw& law, RandomStream& stream, simd::Isa isa = simd::active_isa())
      : law_(&law), stream_(&stream), isa_(isa) {}

  void fill(std::span<std::uint32_t> out) {
    simd::fill_offspring(isa_, *law_, *stream_, stream_->position(), out);
    stream_->advance(out.size());
  }

 private:
  const ReproductionLaw* law_;
  RandomStream* stream_;
  simd::Isa isa_;
};

/// Replays a fixed offspring sequence, then `pad` forever.
class ForcedDraws {
 public:
  explicit ForcedDraws(std::vector<std::uint32_t> values, std::uint32_t pad = 0)
      : values_(std::move(values)), pad_(pad) {}

  void fill(std::span<std::uint32_t> out) {
    for (auto& x : out) x = next_ < values_.size() ? values_[next_++] : (++overrun_, pad_);
  }
  std::size_t overrun() const noexcept { return overrun_; }

 private:
  std::vector<std::uint32_t> values_;
  std::uint32_t pad_;
  std::size_t next_ = 0;
  std::size_t overrun_ = 0;
};

/// Bounded min-heap holding the m largest values offered.
class TopM {
 public:
  explicit TopM(int m) : m_(static_cast<std::size_t>(m)) { heap_.reserve(m_); }

  //! Values <= floor() cannot enter; -1 while the heap is not full.
  std::int64_t floor() const noexcept { return floor_; }

  void push(std::uint32_t x) {
    if (heap_.size() < m_) {
      heap_.push_back(x);
      std::push_heap(heap_.begin(), heap_.end(), std::greater<>{});
      if (heap_.size() == m_) floor_ = heap_.front();
      return;
    }
    std::pop_heap(heap_.begin(), heap_.end(), std::greater<>{});
    heap_.back() = x;
    std::push_heap(heap_.begin(), heap_.end(), std::greater<>{});
    floor_ = heap_.front();
  }

  std::vector<std::uint32_t> sorted() const {
    auto out = heap_;
    std::sort(out.begin(), out.end(), std::greater<>{});
    return out;
  }

 private:
  std::size_t m_;
  std::int64_t floor_ = -1;
  std::vector<std::uint32_t> heap_;
};

namespace detail {
inline constexpr std::size_t kFirstBlock = 16;
inline constexpr std::size_t kMaxBlock = 4096;
}  // namespace detail

/// First-passage simulation of the forest of cfg.k ancestors.
template <OffspringSource Source>
OffspringRecord simulate_walk(const SimConfig& cfg, Source& source) {
  cfg.validate();
  OffspringRecord rec;
  rec.ancestors = cfg.k;
  rec.counts_above.assign(cfg.count_levels.size(), 0);
  TopM top(cfg.m);
  std::vector<std::uint32_t> buf(detail::kMaxBlock);
  const std::size_t n_levels = cfg.count_levels.size();
  const std::int64_t level0 = n_levels > 0 ? cfg.count_levels[0] : INT64_MAX;

  std::int64_t height = cfg.k;  // S_i + k; the walk stops when it reaches 0
  std::int64_t used = 0;
  std::size_t block = detail::kFirstBlock;
  const simd::Isa isa = simd::active_isa();
  const auto visit = [&](std::uint32_t x) {
    if (static_cast<std::int64_t>(x) > top.floor()) top.push(x);
    if (static_cast<std::int64_t>(x) > level0) {
      for (std::size_t l = 0; l < n_levels; ++l) rec.counts_above[l] += x > cfg.count_levels[l] ? 1 : 0;
    }
  };
  while (used < cfg.max_steps) {
    const auto n = static_cast<std::size_t>(std::min<std::int64_t>(static_cast<std::int64_t>(block), cfg.max_steps - used));
    source.fill(std::span(buf.data(), n));
    std::size_t i = 0;
    bool hit = false;
    while (i < n && !hit) {
      // Skip chunks holding nothing that could enter the records.
      const std::int64_t gate = std::min<std::int64_t>({top.floor(), level0, simd::kMaxQuietGate});
      if (gate >= 0 && height > static_cast<std::int64_t>(simd::kQuietChunk)) {
        const auto q = simd::quiet_run(isa, std::span<const std::uint32_t>(buf.data() + i, n - i),
                                       static_cast<std::uint32_t>(gate), height);
        i += q.length;
        height += static_cast<std::int64_t>(q.sum) - static_cast<std::int64_t>(q.length);
      }
      const std::size_t stop = std::min(n, i + simd::kQuietChunk);
      for (; i < stop; ++i) {
        const std::uint32_t x = buf[i];
        height += static_cast<std::int64_t>(x) - 1;
        visit(x);
        if (height == 0) {
          hit = true;
          ++i;
          break;
        }
      }
    }
    used += static_cast<std::int64_t>(i);
    if (hit) {
      rec.total_population = used;
      rec.steps_used = used;
      rec.top = top.sorted();
      return rec;
    }
    block = std::min(block * 2, detail::kMaxBlock);
  }
  rec.censored = true;
  rec.steps_used = used;
  rec.total_population = used;
  rec.top = top.sorted();
  return rec;
}

OffspringRecord simulate_walk(const ReproductionLaw& law, const SimConfig& cfg, RandomStream& rng);

struct BfsResult {
  //! Offspring count of every individual, in breadth-first order.
  std::vector<std::uint32_t> offspring;
  //! Parent index of every individual (-1 for ancestors), same order.
  std::vector<std::int64_t> parent;
  std::int64_t total_population = 0;
  bool censored = false;
};

/// Explicit breadth-first generation of the forest; an oracle for the walk.
/// Censored once more than node_cap individuals would exist.
template <OffspringSource Source>
BfsResult simulate_bfs(std::int64_t k, Source& source, std::int64_t node_cap) {
  if (k < 1) throw std::invalid_argument("simulate_bfs: k must be >= 1");
  if (node_cap < k) throw std::invalid_argument("simulate_bfs: node_cap must be >= k");
  BfsResult out;
  out.parent.assign(static_cast<std::size_t>(k), -1);
  std::size_t head = 0;  // next individual to reproduce; parent.size() is the queue end
  std::uint32_t draw = 0;
  while (head < out.parent.size()) {
    source.fill(std::span(&draw, 1));
    out.offspring.push_back(draw);
    if (static_cast<std::int64_t>(out.parent.size()) + draw > node_cap) {
      out.censored = true;
      break;
    }
    out.parent.insert(out.parent.end(), draw, static_cast<std::int64_t>(head));
    ++head;
  }
  out.total_population = static_cast<std::int64_t>(out.parent.size());
  return out;
}

BfsResult simulate_bfs(const ReproductionLaw& law, std::int64_t k, RandomStream& rng, std::int64_t node_cap);

struct PairedRecord {
  OffspringRecord coupled;          // the forest's own offspring statistics
  std::vector<std::uint32_t> eta_top;  // top-m of T_k fresh draws (empty when censored)
};

/// Walk phase from `walk`, then T_k independent draws from `eta`.
template <OffspringSource WalkSource, OffspringSource EtaSource>
PairedRecord simulate_paired(const SimConfig& cfg, WalkSource& walk, EtaSource& eta) {
  PairedRecord out{simulate_walk(cfg, walk), {}};
  if (out.coupled.censored) return out;
  TopM top(cfg.m);
  std::vector<std::uint32_t> buf(detail::kMaxBlock);
  std::int64_t remaining = out.coupled.total_population;
  while (remaining > 0) {
    const auto n = static_cast<std::size_t>(std::min<std::int64_t>(remaining, static_cast<std::int64_t>(buf.size())));
    eta.fill(std::span(buf.data(), n));
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<std::int64_t>(buf[i]) > top.floor()) top.push(buf[i]);
    }
    remaining -= static_cast<std::int64_t>(n);
  }
  out.eta_top = top.sorted();
  return out;
}

/// Same record as simulate_walk, except that `top` holds the order statistics
/// of T_k fresh draws independent of the forest.
OffspringRecord simulate_decoupled(const ReproductionLaw& law, const SimConfig& cfg, RandomStream& walk_rng,
                                   RandomStream& eta_rng);

//! Streams for replicate `index` under base seed `seed`: phase 0 drives the forest, phase 1 the decoupled draws.
inline RandomStream replicate_stream(std::uint64_t seed, std::uint64_t index, std::uint32_t phase = 0) {
  return RandomStream(seed, index, phase);
}

//! CSV header: replicate_index,k,censored,T_k,X1..Xm
void write_record_header(std::ostream& os, int m);
//! One CSV row; T_k holds steps_used for censored rows, missing order statistics are empty.
void write_record_row(std::ostream& os, std::uint64_t index, const OffspringRecord& rec, int m);

}  // namespace gwx
