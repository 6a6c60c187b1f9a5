#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gwx/exact_solver.hpp"
#include "gwx/gw_engine.hpp"
#include "gwx/repro_law.hpp"

namespace gwx {

enum class ExperimentKind { max_law, joint_law, decoupled, laplace_grid, lemma2, gumbel };

std::string_view to_string(ExperimentKind kind) noexcept;
//! Throws std::invalid_argument for unknown names.
ExperimentKind kind_from_string(std::string_view name);

/// One (a, f) pair of the scaled log-Laplace deficit, f = height * 1{x > level}.
/// height == 0 means f = 0.
struct Lemma2Case {
  double a = 0.0;
  double level = 1.0;
  double height = 0.0;

  PenaltyTemplate penalty() const;
};

struct Tolerances {
  double ks_max = 0.03;          // max_law, joint_law (i)
  double ks_second = 0.04;       // joint_law (iii)
  double dispersion_lo = 0.9;    // joint_law (ii)
  double dispersion_hi = 1.1;
  std::int64_t min_bucket = 500;
  double censor_sigmas = 4.0;
  double exact_sup = 0.03;       // max_law exact route
  double ks_decoupled = 0.05;
  double mc_sigmas = 3.0;        // laplace_grid, lemma2 Monte Carlo
  double lemma2_relative = 0.03;
  double gumbel_sup = 0.05;
  double median_shift_slack = 1.0;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::max_law;
  LawDescriptor law{"pareto", 3.0, 0.5};
  std::int64_t k = 300;
  //! Replicates N. With uncensored_target, the campaign runs until N uncensored ones.
  std::int64_t replicates = 10'000;
  bool uncensored_target = false;
  int m = kDefaultOrderStatistics;
  //! Step cap as a multiple of k^2; max_steps = ceil(t_cap k^2) unless max_steps > 0.
  double t_cap = 50.0;
  std::int64_t max_steps = 0;
  std::uint64_t base_seed = 1;
  //! 0: GW_EXTREMES_THREADS if set, else the hardware concurrency.
  int workers = 0;

  std::vector<double> x_grid{0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<double> a_grid{0.0, 0.25, 1.0, 4.0};
  //! Exact-route k values (max_law, lemma2, gumbel) or campaign k values (decoupled).
  std::vector<std::int64_t> k_grid{100, 10'000};
  //! x of the conditional Poisson check.
  double dispersion_x = 1.0;
  int dispersion_buckets = 10;
  std::vector<Lemma2Case> lemma2_cases{{1.0, 1.0, 0.0}, {0.0, 1.0, 1.0}};
  //! Monte Carlo check of the deficit limit; null in the config skips it.
  std::optional<Lemma2Case> lemma2_mc = Lemma2Case{1.0, 1.0, 1.0};
  Tolerances tol;

  std::int64_t resolved_max_steps() const;
  std::int64_t resolved_max_steps(std::int64_t k_value) const;
  int resolved_workers() const;
  void validate() const;

  //! Defaults of the acceptance campaigns for each kind.
  static ExperimentConfig defaults(ExperimentKind kind);
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
//! Missing keys keep the defaults of the kind named by "kind" (or max_law).
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig config_from_json(const nlohmann::json& j);

/// A numeric verdict. Passes when lower <= value <= upper.
struct Check {
  std::string name;
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool pass = false;
  //! 1.36 / sqrt(n) for KS checks, else 0.
  double noise_floor = 0.0;
  std::int64_t sample_size = 0;
  std::string note;
};

/// A CSV table. Cells are formatted with 17 significant digits.
struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::int64_t replicates_run = 0;
  std::int64_t uncensored = 0;
  std::int64_t censor_count = 0;
  std::vector<Check> checks;
  std::vector<Table> tables;
  std::string code_version;

  bool passed() const;
  const Check* find_check(std::string_view name) const;
};

/// One replicate of a campaign.
struct Replicate {
  OffspringRecord record;
  std::vector<std::uint32_t> eta_top;  // decoupled campaigns only
};

/// Raw replicate data, in replicate-index order.
struct Campaign {
  std::int64_t k = 0;
  std::int64_t max_steps = 0;
  double phi = 0.0;                         // phi(k^-2)
  std::vector<std::uint32_t> count_levels;  // levels recorded by every replicate
  std::vector<Replicate> replicates;

  std::int64_t censored() const;
};

/// Runs replicates 0, 1, ... of `cfg` at ancestor count k on the worker pool.
/// With cfg.uncensored_target, stops right after the replicate that completes
/// cfg.replicates uncensored ones, whatever the worker count.
Campaign run_campaign(const ExperimentConfig& cfg, std::int64_t k, bool decoupled = false);
Campaign run_campaign(const ExperimentConfig& cfg);

ExperimentResult run_max_law(const ExperimentConfig& cfg);
ExperimentResult run_max_law(const ExperimentConfig& cfg, const Campaign& campaign);
ExperimentResult run_joint_law(const ExperimentConfig& cfg);
ExperimentResult run_joint_law(const ExperimentConfig& cfg, const Campaign& campaign);
ExperimentResult run_decoupled(const ExperimentConfig& cfg);
ExperimentResult run_laplace_grid(const ExperimentConfig& cfg);
ExperimentResult run_laplace_grid(const ExperimentConfig& cfg, const Campaign& campaign);
ExperimentResult run_lemma2(const ExperimentConfig& cfg);
ExperimentResult run_lemma2(const ExperimentConfig& cfg, const Campaign* campaign);
ExperimentResult run_gumbel(const ExperimentConfig& cfg);

ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Exact gap to the Frechet limit: max over x in x_grid of |rho(x phi(k^-2))^k - frechet_cdf(x)|.
double exact_frechet_gap(const ReproductionLaw& law, std::int64_t k, const std::vector<double>& x_grid);

//! P(tau > t_cap) for the Levy limit of T_k / k^2.
double predicted_censor_fraction(double sigma, double t_cap);

//! "<kind>_seed<base_seed>"
std::string artifact_stem(const ExperimentConfig& cfg);

/// Manifest: config echo, code version, seeds, censor counts, checks and the
/// FNV-1a checksum of every table written.
nlohmann::json manifest(const ExperimentResult& result);

/// Writes every table as <stem>_<table>.csv and the manifest as <stem>_manifest.json
/// under `dir`. Returns the manifest path.
std::string write_artifacts(const ExperimentResult& result, const std::string& dir);

struct ReplayReport {
  ExperimentResult result;
  std::vector<std::string> mismatched;  // tables whose checksum differs from the manifest
  bool identical() const { return mismatched.empty(); }
};

/// Re-runs the configuration stored in a manifest. workers > 0 overrides the
/// recorded worker count.
ReplayReport replay(const nlohmann::json& manifest_json, int workers = 0);

//! 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string checksum(std::string_view bytes);

}  // namespace gwx
