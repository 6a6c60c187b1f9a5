#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gwx/experiments.hpp"
#include "gwx/limit_laws.hpp"

using Catch::Approx;
using namespace gwx;
using nlohmann::json;

namespace {

ExperimentConfig small(ExperimentKind kind) {
  ExperimentConfig c = ExperimentConfig::defaults(kind);
  c.k = 30;
  c.replicates = 400;
  c.base_seed = 5;
  c.workers = 2;
  c.k_grid = {10, 30};
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("experiment kinds round trip through names", "[experiments]") {
  for (auto k : {ExperimentKind::max_law, ExperimentKind::joint_law, ExperimentKind::decoupled, ExperimentKind::laplace_grid,
                 ExperimentKind::lemma2, ExperimentKind::gumbel}) {
    CHECK(kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(kind_from_string("bogus"), std::invalid_argument);
}

TEST_CASE("config JSON round trip", "[experiments]") {
  ExperimentConfig c = ExperimentConfig::defaults(ExperimentKind::lemma2);
  c.base_seed = 99;
  c.x_grid = {0.5, 1.5};
  c.lemma2_mc.reset();
  c.tol.ks_max = 0.07;
  const json j = c;
  const ExperimentConfig back = config_from_json(j);
  CHECK(json(back) == j);
  CHECK(back.base_seed == 99);
  CHECK_FALSE(back.lemma2_mc.has_value());
  CHECK(back.tol.ks_max == 0.07);
}

TEST_CASE("config JSON defaults and rejection", "[experiments]") {
  const auto c = config_from_json(json::parse(R"({"kind": "gumbel"})"));
  CHECK(c.law.family == "geometric");
  CHECK(json(c) == json(ExperimentConfig::defaults(ExperimentKind::gumbel)));
  CHECK_THROWS(config_from_json(json::parse(R"({"kind": "max_law", "replicatse": 3})")));
  CHECK_THROWS(config_from_json(json::parse(R"({"kind": "max_law", "tolerances": {"ks_mx": 1}})")));
  CHECK_THROWS(config_from_json(json::parse(R"({"kind": "max_law", "replicates": "many"})")));
}

TEST_CASE("config validation", "[experiments]") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  c.x_grid = {1.0, 0.5};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ExperimentConfig{};
  c.replicates = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ExperimentConfig{};
  c.law = {"pareto", 1.5, 0.5};
  CHECK_THROWS(c.validate());
  c = ExperimentConfig{};
  c.k_grid = {100, 100};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ExperimentConfig{};
  c.k = 300;
  CHECK(c.resolved_max_steps() == 50 * 300 * 300);
  c.max_steps = 77;
  CHECK(c.resolved_max_steps(1000) == 77);
}

TEST_CASE("campaigns do not depend on the worker count", "[experiments]") {
  ExperimentConfig c = small(ExperimentKind::max_law);
  c.uncensored_target = true;
  c.replicates = 300;
  c.t_cap = 0.5;  // heavy censoring, so the cut point matters
  c.workers = 1;
  const Campaign a = run_campaign(c);
  c.workers = 5;
  const Campaign b = run_campaign(c);
  REQUIRE(a.replicates.size() == b.replicates.size());
  std::int64_t uncensored = 0;
  for (std::size_t i = 0; i < a.replicates.size(); ++i) {
    REQUIRE(a.replicates[i].record.total_population == b.replicates[i].record.total_population);
    REQUIRE(a.replicates[i].record.top == b.replicates[i].record.top);
    REQUIRE(a.replicates[i].record.counts_above == b.replicates[i].record.counts_above);
    uncensored += a.replicates[i].record.censored ? 0 : 1;
  }
  CHECK(uncensored == 300);
  CHECK_FALSE(a.replicates.back().record.censored);
  CHECK(a.censored() + uncensored == static_cast<std::int64_t>(a.replicates.size()));
  CHECK(a.phi == Approx(ReproductionLaw::critical_pareto(3.0, 0.5).phi(1.0 / 900.0)));
}

TEST_CASE("replicate r of a campaign is the r-th seeded forest", "[experiments]") {
  ExperimentConfig c = small(ExperimentKind::max_law);
  c.replicates = 20;
  const Campaign camp = run_campaign(c);
  const auto law = ReproductionLaw::from_descriptor(c.law);
  for (std::uint64_t r = 0; r < 20; ++r) {
    SimConfig sc;
    sc.k = c.k;
    sc.m = c.m;
    sc.max_steps = c.resolved_max_steps();
    sc.count_levels = camp.count_levels;
    RandomStream s = replicate_stream(c.base_seed, r);
    const auto rec = simulate_walk(law, sc, s);
    REQUIRE(rec.total_population == camp.replicates[r].record.total_population);
    REQUIRE(rec.top == camp.replicates[r].record.top);
  }
}

TEST_CASE("results and artifacts are bit-identical across worker counts", "[experiments]") {
  const auto dir = std::filesystem::temp_directory_path() / "gwx_test_experiments";
  std::filesystem::remove_all(dir);
  for (auto kind : {ExperimentKind::max_law, ExperimentKind::joint_law, ExperimentKind::laplace_grid}) {
    ExperimentConfig c = small(kind);
    std::vector<std::string> csvs;
    for (int w : {1, 3}) {
      c.workers = w;
      const auto r = run_experiment(c);
      std::string all;
      for (const auto& t : r.tables) all += t.name + "\n" + t.to_csv();
      csvs.push_back(all);
      const auto sub = dir / ("w" + std::to_string(w));
      const std::string path = write_artifacts(r, sub.string());
      CHECK(std::filesystem::exists(path));
      CHECK(path.find(std::string(to_string(kind)) + "_seed5_manifest.json") != std::string::npos);
    }
    CHECK(csvs[0] == csvs[1]);
    for (const auto& entry : std::filesystem::directory_iterator(dir / "w1")) {
      if (entry.path().extension() != ".csv") continue;
      CHECK(slurp(entry.path()) == slurp(dir / "w3" / entry.path().filename()));
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("manifest contents and replay", "[experiments]") {
  ExperimentConfig c = small(ExperimentKind::max_law);
  const auto r = run_experiment(c);
  const json m = manifest(r);
  CHECK(m.at("kind") == "max_law");
  CHECK(m.at("config") == json(c));
  CHECK(m.at("resolved").at("workers") == 2);
  CHECK(m.at("resolved").at("max_steps") == 50 * 30 * 30);
  CHECK(m.at("censor_count") == r.censor_count);
  CHECK(m.at("replicates_run") == r.replicates_run);
  CHECK(r.uncensored + r.censor_count == r.replicates_run);
  CHECK(m.at("files").size() == r.tables.size());
  bool has_noise_floor = false;
  for (const auto& ch : m.at("checks")) {
    if (ch.at("name") == "ks_max_vs_truncated_mixture") has_noise_floor = ch.at("noise_floor").get<double>() > 0.0;
  }
  CHECK(has_noise_floor);

  for (int w : {1, 4}) {
    const auto rep = replay(m, w);
    CHECK(rep.identical());
    CHECK(rep.result.config.workers == w);
  }
  json tampered = m;
  tampered["files"][0]["checksum"] = "0000000000000000";
  const auto bad = replay(tampered);
  REQUIRE(bad.mismatched.size() == 1);
  CHECK(bad.mismatched[0] == m["files"][0]["table"]);
}

TEST_CASE("max_law checks and tables", "[experiments]") {
  const auto r = run_max_law(small(ExperimentKind::max_law));
  const Check* ks = r.find_check("ks_max_vs_truncated_mixture");
  REQUIRE(ks != nullptr);
  CHECK(ks->noise_floor == Approx(1.36 / std::sqrt(static_cast<double>(r.uncensored))));
  CHECK(ks->upper == 0.03);
  CHECK(r.find_check("censor_fraction") != nullptr);
  CHECK(r.find_check("exact_gap_k30") != nullptr);
  CHECK(r.find_check("no_such_check") == nullptr);
  const auto records = std::find_if(r.tables.begin(), r.tables.end(), [](const Table& t) { return t.name == "records"; });
  REQUIRE(records != r.tables.end());
  CHECK(static_cast<std::int64_t>(records->rows.size()) == r.replicates_run);
  CHECK(records->header[0] == "replicate_index");
}

TEST_CASE("exact-route helpers", "[experiments]") {
  const auto law = ReproductionLaw::critical_pareto(3.0, 0.5);
  const std::vector<double> xs{0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  const double g2 = exact_frechet_gap(law, 100, xs);
  const double g4 = exact_frechet_gap(law, 10'000, xs);
  CHECK(g4 < g2);
  CHECK(g4 < 0.03);
  // Levy limit with scale 1/sigma^2: P(tau > t) = 1 - erfc(1 / (sigma sqrt(2 t))).
  CHECK(predicted_censor_fraction(law.sigma(), 50.0) == Approx(1.0 - std::erfc(1.0 / (law.sigma() * 10.0))).epsilon(1e-14));
  CHECK(predicted_censor_fraction(law.sigma(), 50.0) == Approx(0.1683).margin(1e-4));
}

TEST_CASE("lemma2 and gumbel exact routes", "[experiments]") {
  ExperimentConfig l = ExperimentConfig::defaults(ExperimentKind::lemma2);
  l.lemma2_mc.reset();
  const auto r = run_lemma2(l);
  const Check* c0 = r.find_check("lemma2_case0_relative_error_k10000");
  REQUIRE(c0 != nullptr);
  CHECK(c0->pass);
  CHECK(r.find_check("lemma2_mc_vs_limit") == nullptr);

  const auto g = run_gumbel(ExperimentConfig::defaults(ExperimentKind::gumbel));
  CHECK(g.passed());
}

TEST_CASE("laplace grid: a = 0 gives exactly one", "[experiments]") {
  ExperimentConfig c = small(ExperimentKind::laplace_grid);
  c.a_grid = {0.0, 1.0};
  const auto r = run_laplace_grid(c);
  const auto t = std::find_if(r.tables.begin(), r.tables.end(), [](const Table& x) { return x.name == "laplace"; });
  REQUIRE(t != r.tables.end());
  CHECK(t->rows[0][1] == "1");
  const Check* a0 = r.find_check("laplace_vs_limit_a0");
  REQUIRE(a0 != nullptr);
  CHECK(a0->pass);
}

TEST_CASE("decoupled arms share T_k", "[experiments]") {
  ExperimentConfig c = small(ExperimentKind::decoupled);
  c.replicates = 200;
  c.k_grid = {20};
  const auto r = run_decoupled(c);
  const Check* paired = r.find_check("paired_walk_identical");
  REQUIRE(paired != nullptr);
  CHECK(paired->pass);
  const Campaign camp = run_campaign(c, 20, true);
  for (const auto& rep : camp.replicates) {
    if (!rep.record.censored) REQUIRE_FALSE(rep.eta_top.empty());
  }
}

TEST_CASE("FNV-1a checksums", "[experiments]") {
  CHECK(checksum("") == "cbf29ce484222325");
  CHECK(checksum("a") == "af63dc4c8601ec8c");
  CHECK(checksum("foobar") == "85944171f73967e8");
}

TEST_CASE("GW_EXTREMES_THREADS sets the default worker count", "[experiments]") {
  ExperimentConfig c;
  ::setenv("GW_EXTREMES_THREADS", "7", 1);
  CHECK(c.resolved_workers() == 7);
  c.workers = 2;
  CHECK(c.resolved_workers() == 2);
  c.workers = 0;
  ::setenv("GW_EXTREMES_THREADS", "zero", 1);
  CHECK_THROWS_AS(c.resolved_workers(), std::invalid_argument);
  ::unsetenv("GW_EXTREMES_THREADS");
  CHECK(c.resolved_workers() >= 1);
}
