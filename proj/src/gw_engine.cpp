#include "gwx/gw_engine.hpp"

#include <ostream>

#include "gwx/csv.hpp"

namespace gwx {

void SimConfig::validate() const {
  if (k < 1) throw std::invalid_argument("SimConfig: k must be >= 1");
  if (m < 1) throw std::invalid_argument("SimConfig: m must be >= 1");
  if (max_steps < k) throw std::invalid_argument("SimConfig: max_steps must be >= k");
  if (!std::is_sorted(count_levels.begin(), count_levels.end()) ||
      std::adjacent_find(count_levels.begin(), count_levels.end()) != count_levels.end()) {
    throw std::invalid_argument("SimConfig: count_levels must be strictly increasing");
  }
}

OffspringRecord simulate_walk(const ReproductionLaw& law, const SimConfig& cfg, RandomStream& rng) {
  LawSource source(law, rng);
  return simulate_walk(cfg, source);
}

BfsResult simulate_bfs(const ReproductionLaw& law, std::int64_t k, RandomStream& rng, std::int64_t node_cap) {
  LawSource source(law, rng);
  return simulate_bfs(k, source, node_cap);
}

OffspringRecord simulate_decoupled(const ReproductionLaw& law, const SimConfig& cfg, RandomStream& walk_rng,
                                   RandomStream& eta_rng) {
  LawSource walk(law, walk_rng);
  LawSource eta(law, eta_rng);
  auto paired = simulate_paired(cfg, walk, eta);
  paired.coupled.top = std::move(paired.eta_top);
  return std::move(paired.coupled);
}

void write_record_header(std::ostream& os, int m) {
  os << "replicate_index,k,censored,T_k";
  for (int j = 1; j <= m; ++j) os << ",X" << j;
  os << '\n';
}

void write_record_row(std::ostream& os, std::uint64_t index, const OffspringRecord& rec, int m) {
  os << index << ',' << rec.ancestors << ',' << (rec.censored ? 1 : 0) << ',' << rec.steps_used;
  for (int j = 0; j < m; ++j) {
    os << ',';
    if (static_cast<std::size_t>(j) < rec.top.size()) os << rec.top[static_cast<std::size_t>(j)];
  }
  os << '\n';
}

}  // namespace gwx
