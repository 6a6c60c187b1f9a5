#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <sstream>

#include "gwx/gw_engine.hpp"
#include "gwx/statistics.hpp"

using gwx::ForcedDraws;
using gwx::OffspringRecord;
using gwx::RandomStream;
using gwx::ReproductionLaw;
using gwx::SimConfig;

namespace {

SimConfig config(std::int64_t k, int m = 4, std::int64_t max_steps = 1'000'000) {
  SimConfig c;
  c.k = k;
  c.m = m;
  c.max_steps = max_steps;
  return c;
}

// Straight-line reference walk over an explicit draw list.
OffspringRecord naive_walk(const SimConfig& cfg, const std::vector<std::uint32_t>& draws) {
  OffspringRecord r;
  r.ancestors = cfg.k;
  r.counts_above.assign(cfg.count_levels.size(), 0);
  std::int64_t height = cfg.k;
  std::vector<std::uint32_t> seen;
  std::size_t i = 0;
  for (; i < draws.size() && static_cast<std::int64_t>(i) < cfg.max_steps; ++i) {
    const std::uint32_t x = draws[i];
    seen.push_back(x);
    for (std::size_t l = 0; l < cfg.count_levels.size(); ++l) r.counts_above[l] += x > cfg.count_levels[l] ? 1 : 0;
    height += static_cast<std::int64_t>(x) - 1;
    if (height == 0) {
      ++i;
      break;
    }
  }
  r.censored = height != 0;
  r.steps_used = static_cast<std::int64_t>(i);
  r.total_population = r.steps_used;
  std::sort(seen.begin(), seen.end(), std::greater<>{});
  seen.resize(std::min<std::size_t>(seen.size(), static_cast<std::size_t>(cfg.m)));
  r.top = seen;
  return r;
}

}  // namespace

TEST_CASE("forced walks", "[gw_engine]") {
  {
    ForcedDraws d({0});
    const auto r = gwx::simulate_walk(config(1), d);
    CHECK(r.total_population == 1);
    CHECK_FALSE(r.censored);
    CHECK(r.top == std::vector<std::uint32_t>{0});
  }
  {
    ForcedDraws d({2, 0, 0});
    const auto r = gwx::simulate_walk(config(1), d);
    CHECK(r.total_population == 3);
    CHECK(r.top == std::vector<std::uint32_t>{2, 0, 0});
    CHECK(r.max() == 2);
  }
  {
    ForcedDraws d({2, 2, 0, 0, 0}, 1);
    const auto r = gwx::simulate_walk(config(1, 2), d);
    CHECK(r.total_population == 5);
    CHECK(r.top == std::vector<std::uint32_t>{2, 2});
  }
  {
    ForcedDraws d({}, 1);  // the walk never moves
    const auto r = gwx::simulate_walk(config(3, 4, 100), d);
    CHECK(r.censored);
    CHECK(r.steps_used == 100);
    CHECK(r.top == std::vector<std::uint32_t>{1, 1, 1, 1});
  }
}

TEST_CASE("SimConfig validation", "[gw_engine]") {
  ForcedDraws d({0});
  CHECK_THROWS_AS(gwx::simulate_walk(config(0), d), std::invalid_argument);
  CHECK_THROWS_AS(gwx::simulate_walk(config(1, 0), d), std::invalid_argument);
  CHECK_THROWS_AS(gwx::simulate_walk(config(10, 4, 9), d), std::invalid_argument);
  SimConfig c = config(1);
  c.count_levels = {3, 3};
  CHECK_THROWS_AS(gwx::simulate_walk(c, d), std::invalid_argument);
}

TEST_CASE("walk matches a straight-line reference on random draw lists", "[gw_engine][property]") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 400; ++trial) {
    SimConfig cfg = config(1 + static_cast<std::int64_t>(gen() % 300), 1 + static_cast<int>(gen() % 20));
    cfg.max_steps = cfg.k + static_cast<std::int64_t>(gen() % 20'000);
    if (trial % 2 == 0) cfg.count_levels = {0, 2, 7};
    std::vector<std::uint32_t> draws(30'000);
    // Mostly small values with rare big jumps; long runs below the top-m floor exercise the chunk skip.
    for (auto& x : draws) x = gen() % 1000 == 0 ? static_cast<std::uint32_t>(gen() % 5000) : static_cast<std::uint32_t>(gen() % 3);
    ForcedDraws d(draws);
    const auto got = gwx::simulate_walk(cfg, d);
    const auto expect = naive_walk(cfg, draws);
    INFO("trial " << trial);
    REQUIRE(got.censored == expect.censored);
    REQUIRE(got.steps_used == expect.steps_used);
    REQUIRE(got.total_population == expect.total_population);
    REQUIRE(got.top == expect.top);
    REQUIRE(got.counts_above == expect.counts_above);
  }
}

TEST_CASE("walk identity holds for sampled forests", "[gw_engine][property]") {
  const auto law = ReproductionLaw::critical_pareto(3.0, 0.5);
  for (std::uint64_t rep = 0; rep < 200; ++rep) {
    const SimConfig cfg = config(1 + static_cast<std::int64_t>(rep % 17), 3, 100'000);
    RandomStream s(8, rep);
    const auto r = gwx::simulate_walk(law, cfg, s);
    if (r.censored) continue;
    RandomStream again(8, rep);
    std::int64_t height = cfg.k;
    for (std::int64_t i = 0; i < r.total_population; ++i) {
      height += static_cast<std::int64_t>(law.sample(again)) - 1;
      if (i + 1 < r.total_population) REQUIRE(height > 0);
    }
    REQUIRE(height == 0);
    REQUIRE(r.total_population >= cfg.k);
    REQUIRE(std::is_sorted(r.top.rbegin(), r.top.rend()));
  }
}

TEST_CASE("raising max_steps never changes an uncensored record", "[gw_engine][property]") {
  const auto law = ReproductionLaw::critical_pareto(3.0, 0.5);
  for (std::uint64_t rep = 0; rep < 300; ++rep) {
    SimConfig small = config(5, 6, 2'000);
    small.count_levels = {3};
    SimConfig big = small;
    big.max_steps = 2'000'000;
    RandomStream s1(4, rep);
    RandomStream s2(4, rep);
    const auto a = gwx::simulate_walk(law, small, s1);
    const auto b = gwx::simulate_walk(law, big, s2);
    if (!a.censored) {
      REQUIRE_FALSE(b.censored);
      REQUIRE(a.total_population == b.total_population);
      REQUIRE(a.top == b.top);
      REQUIRE(a.counts_above == b.counts_above);
    } else {
      REQUIRE(a.steps_used == small.max_steps);
    }
  }
}

TEST_CASE("binary law: T_1 follows the Catalan law", "[gw_engine]") {
  const auto law = ReproductionLaw::binary();
  const SimConfig cfg = config(1, 1, 64);
  const int n = 1'000'000;
  std::vector<double> hist(12, 0.0);
  for (int rep = 0; rep < n; ++rep) {
    RandomStream s(12, static_cast<std::uint64_t>(rep));
    const auto r = gwx::simulate_walk(law, cfg, s);
    if (!r.censored && r.total_population <= 11) hist[static_cast<std::size_t>(r.total_population)] += 1.0;
  }
  double catalan = 1.0;
  for (int m = 0; m <= 5; ++m) {
    const double p = catalan * std::ldexp(1.0, -(2 * m + 1));
    const double se = std::sqrt(p * (1 - p) / n);
    INFO("T = " << 2 * m + 1);
    CHECK(std::abs(hist[static_cast<std::size_t>(2 * m + 1)] / n - p) < 4 * se);
    CHECK(hist[static_cast<std::size_t>(2 * m + 2) % 12] == 0.0);
    catalan = catalan * 2.0 * (2 * m + 1) / (m + 2);
  }
}

TEST_CASE("forced BFS cases", "[gw_engine]") {
  {
    ForcedDraws d({0});
    const auto r = gwx::simulate_bfs(1, d, 10);
    CHECK(r.offspring == std::vector<std::uint32_t>{0});
    CHECK(r.total_population == 1);
  }
  {
    ForcedDraws d({0, 2, 0, 0});
    const auto r = gwx::simulate_bfs(2, d, 100);
    CHECK(r.offspring == std::vector<std::uint32_t>{0, 2, 0, 0});
    CHECK(r.parent == std::vector<std::int64_t>{-1, -1, 1, 1});
    CHECK(r.total_population == 4);
    CHECK_FALSE(r.censored);
    ForcedDraws w({0, 2, 0, 0});
    CHECK(gwx::simulate_walk(config(2), w).total_population == 4);
  }
  {
    ForcedDraws d({3, 3}, 0);
    const auto r = gwx::simulate_bfs(1, d, 5);
    CHECK(r.censored);
  }
  const auto point = ReproductionLaw::from_pmf({1.0});
  RandomStream s(1, 1);
  CHECK(gwx::simulate_bfs(point, 1, s, 10).offspring == std::vector<std::uint32_t>{0});
}

TEST_CASE("BFS and walk give the same forest from the same draws", "[gw_engine][property]") {
  const auto law = ReproductionLaw::critical_geometric();
  for (std::uint64_t rep = 0; rep < 300; ++rep) {
    const std::int64_t k = 1 + static_cast<std::int64_t>(rep % 5);
    RandomStream s1(21, rep);
    const auto bfs = gwx::simulate_bfs(law, k, s1, 1'000'000);
    if (bfs.censored) continue;
    ForcedDraws d(bfs.offspring, 7);
    const auto walk = gwx::simulate_walk(config(k, 1'000), d);
    // The walk reads ahead in blocks; it must use exactly the BFS draws.
    REQUIRE(walk.steps_used == static_cast<std::int64_t>(bfs.offspring.size()));
    REQUIRE(walk.total_population == bfs.total_population);
    auto sorted = bfs.offspring;
    std::sort(sorted.begin(), sorted.end(), std::greater<>{});
    sorted.resize(std::min<std::size_t>(sorted.size(), 1'000));
    REQUIRE(walk.top == sorted);
  }
}

TEST_CASE("geometric law: walk and BFS agree in distribution", "[gw_engine]") {
  const auto law = ReproductionLaw::critical_geometric();
  const int n = 100'000;
  std::vector<double> walk_hist(22, 0.0);
  std::vector<double> bfs_hist(22, 0.0);
  const auto bin = [](std::int64_t t, bool censored) { return censored ? 21 : static_cast<std::size_t>(std::min<std::int64_t>(t, 21)); };
  for (int rep = 0; rep < n; ++rep) {
    RandomStream a(40, static_cast<std::uint64_t>(rep), 0);
    const auto w = gwx::simulate_walk(law, config(1, 1, 100'000), a);
    walk_hist[bin(w.total_population, w.censored)] += 1.0;
    RandomStream b(40, static_cast<std::uint64_t>(rep), 1);
    const auto t = gwx::simulate_bfs(law, 1, b, 100'000);
    bfs_hist[bin(t.total_population, t.censored)] += 1.0;
  }
  walk_hist.erase(walk_hist.begin());
  bfs_hist.erase(bfs_hist.begin());
  const auto chi = gwx::chi_square_two_sample(walk_hist, bfs_hist);
  INFO("chi2 " << chi.statistic << " dof " << chi.dof << " p " << chi.p_value);
  CHECK(chi.p_value > 1e-4);
}

TEST_CASE("decoupled draws", "[gw_engine]") {
  ForcedDraws walk({0});
  ForcedDraws eta({2});
  const auto r = gwx::simulate_paired(config(1), walk, eta);
  CHECK(r.coupled.total_population == 1);
  CHECK(r.eta_top == std::vector<std::uint32_t>{2});

  const auto law = ReproductionLaw::critical_pareto(3.0, 0.5);
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    const SimConfig cfg = config(3, 4, 1'000'000);
    RandomStream s(2, rep);
    const auto coupled = gwx::simulate_walk(law, cfg, s);
    RandomStream w = gwx::replicate_stream(2, rep, 0);
    RandomStream e = gwx::replicate_stream(2, rep, 1);
    const auto dec = gwx::simulate_decoupled(law, cfg, w, e);
    REQUIRE(dec.total_population == coupled.total_population);
    REQUIRE(dec.censored == coupled.censored);
    if (!dec.censored) REQUIRE_FALSE(dec.top.empty());
  }
}

TEST_CASE("TopM keeps the m largest values", "[gw_engine][property]") {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 1 + static_cast<int>(gen() % 10);
    gwx::TopM top(m);
    std::vector<std::uint32_t> all;
    for (int i = 0; i < 100; ++i) {
      const auto x = static_cast<std::uint32_t>(gen() % 50);
      all.push_back(x);
      if (static_cast<std::int64_t>(x) > top.floor()) top.push(x);
    }
    std::sort(all.begin(), all.end(), std::greater<>{});
    all.resize(static_cast<std::size_t>(m));
    REQUIRE(top.sorted() == all);
  }
}

TEST_CASE("record CSV rows", "[gw_engine]") {
  std::ostringstream os;
  gwx::write_record_header(os, 3);
  OffspringRecord r;
  r.ancestors = 2;
  r.total_population = 4;
  r.steps_used = 4;
  r.top = {2, 0};
  gwx::write_record_row(os, 7, r, 3);
  CHECK(os.str() == "replicate_index,k,censored,T_k,X1,X2,X3\n7,2,0,4,2,0,\n");
}
