#include "gwx/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <locale>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gwx/csv.hpp"
#include "gwx/exact_solver.hpp"
#include "gwx/experiments.hpp"
#include "gwx/limit_laws.hpp"
#include "gwx/repro_law.hpp"

namespace gwx::cli {

namespace {

using nlohmann::json;

// Bad input that CLI11 cannot see: missing grid, unreadable config.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LawFlags {
  std::string family = "pareto";
  double alpha = 3.0;
  double C = 0.5;

  void add_to(CLI::App* app) {
    app->add_option("--family", family, "Law family")->check(CLI::IsMember({"pareto", "geometric", "binary"}))->capture_default_str();
    app->add_option("--alpha", alpha, "Pareto tail exponent")->capture_default_str();
    app->add_option("--C", C, "Pareto tail constant")->capture_default_str();
  }
  LawDescriptor descriptor() const { return {family, alpha, C}; }
  ReproductionLaw law() const { return ReproductionLaw::from_descriptor(descriptor()); }
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

std::vector<double> grid(const std::vector<double>& explicit_x, const std::vector<double>& range, bool log_spaced) {
  if (!explicit_x.empty()) return explicit_x;
  if (range.size() != 3) throw UsageError("give --x or --grid lo,hi,n");
  const double lo = range[0];
  const double hi = range[1];
  const auto n = static_cast<int>(range[2]);
  if (n < 1 || !(hi >= lo)) throw UsageError("--grid needs lo <= hi and n >= 1");
  if (log_spaced && !(lo > 0.0)) throw UsageError("--log-grid needs lo > 0");
  std::vector<double> xs;
  for (int i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    xs.push_back(log_spaced ? lo * std::pow(hi / lo, t) : lo + t * (hi - lo));
  }
  return xs;
}

// ---- law

struct LawCmd {
  LawFlags law;
  int rows = 10;
  std::vector<double> eps{1e-2, 1e-4, 1e-6, 1e-8};

  int run(std::ostream& out) const {
    const ReproductionLaw p = law.law();
    const auto& d = p.descriptor();
    out << "family=" << d.family << '\n';
    if (d.family == "pareto") out << "alpha=" << csv::format(d.alpha) << "\nC=" << csv::format(d.C) << '\n';
    out << "mean=" << csv::format(p.mean()) << '\n'
        << "variance=" << csv::format(p.variance()) << '\n'
        << "sigma=" << csv::format(p.sigma()) << '\n'
        << "critical=" << (p.is_critical() ? 1 : 0) << "\n\n";
    out << "n,pmf,tail\n";
    for (std::int64_t n = 0; n < rows; ++n) out << csv::row({std::to_string(n), csv::format(p.pmf(n)), csv::format(p.tail(n))});
    if (std::holds_alternative<FiniteSupport>(p.tail_class())) return kExitOk;
    out << "\neps,phi\n";
    for (double e : eps) out << csv::row({csv::format(e), csv::format(p.phi(e))});
    return kExitOk;
  }
};

// ---- simulate

struct SimulateCmd {
  LawFlags law;
  std::int64_t k = 100;
  std::int64_t replicates = 1000;
  int m = kDefaultOrderStatistics;
  double t_cap = 50.0;
  std::int64_t max_steps = 0;
  std::uint64_t seed = 1;
  int workers = 0;
  bool decoupled = false;
  std::string out_path;

  int run(std::ostream& out) const {
    ExperimentConfig cfg;
    cfg.law = law.descriptor();
    cfg.k = k;
    cfg.replicates = replicates;
    cfg.m = m;
    cfg.t_cap = t_cap;
    cfg.max_steps = max_steps;
    cfg.base_seed = seed;
    cfg.workers = workers;
    cfg.validate();
    const Campaign c = run_campaign(cfg, k, decoupled);

    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << "replicate_index,k,censored,T_k";
    for (int j = 1; j <= m; ++j) os << ",X" << j;
    if (decoupled) {
      for (int j = 1; j <= m; ++j) os << ",eta" << j;
    }
    os << '\n';
    auto cells = [&os](const std::vector<std::uint32_t>& top, int count) {
      for (int j = 0; j < count; ++j) {
        os << ',';
        if (static_cast<std::size_t>(j) < top.size()) os << top[static_cast<std::size_t>(j)];
      }
    };
    for (std::size_t i = 0; i < c.replicates.size(); ++i) {
      const auto& r = c.replicates[i];
      os << i << ',' << r.record.ancestors << ',' << (r.record.censored ? 1 : 0) << ',' << r.record.steps_used;
      cells(r.record.top, m);
      if (decoupled) cells(r.eta_top, m);
      os << '\n';
    }
    if (out_path.empty()) {
      out << os.str();
    } else {
      csv::write_file(out_path, os.str());
    }
    return kExitOk;
  }
};

// ---- exact

struct ExactCmd {
  LawFlags law;
  std::vector<double> x;
  std::vector<double> range;
  bool log_grid = false;
  std::int64_t k = 1;
  bool normalized = false;

  int run(std::ostream& out) const {
    if (k < 1) throw UsageError("--k must be >= 1");
    const ReproductionLaw p = law.law();
    const double scale = normalized ? p.phi(1.0 / (static_cast<double>(k) * static_cast<double>(k))) : 1.0;
    out << (normalized ? "x,level,rho,rho_k,lemma1_ratio,frechet\n" : "x,rho,rho_k,lemma1_ratio\n");
    for (double xi : grid(x, range, log_grid)) {
      const double level = xi * scale;
      const FixedPointResult r = solve_rho(p, level);
      const double tail = p.tail(static_cast<std::int64_t>(std::floor(level)));
      std::vector<std::string> row{csv::format(xi)};
      if (normalized) row.push_back(csv::format(level));
      row.push_back(csv::format(r.value));
      row.push_back(csv::format(pow_k(r, k)));
      row.push_back(tail > 0.0 ? csv::format(r.deficit * p.sigma() / std::sqrt(2.0 * tail)) : "");
      if (normalized) {
        const auto* rv = std::get_if<RegVarTail>(&p.tail_class());
        row.push_back(rv != nullptr ? csv::format(frechet_cdf({rv->alpha, p.sigma()}, xi)) : "");
      }
      out << csv::row(row);
    }
    return kExitOk;
  }
};

// ---- limits

struct LimitsCmd {
  std::string limit = "frechet";
  std::optional<std::string> family;
  double alpha = 3.0;
  double C = 0.5;
  double sigma = 1.0;
  double a = 0.5;
  double b = 0.6931471805599453;
  std::string intensity = "pareto";
  int j = 1;
  double t_cap = 50.0;
  std::vector<double> x;
  std::vector<double> range;
  bool log_grid = false;
  CLI::App* app = nullptr;

  bool given(const char* flag) const { return app->count(flag) > 0; }

  int run(std::ostream& out) {
    if (family) {
      const ReproductionLaw p = ReproductionLaw::from_descriptor({*family, alpha, C});
      if (!given("--sigma")) sigma = p.sigma();
      if (const auto* e = std::get_if<ExponentialTail>(&p.tail_class())) {
        if (!given("--a")) a = e->a;
        if (!given("--b")) b = e->b;
        if (!given("--intensity")) intensity = "exponential";
      }
    }
    CoxIntensity cox = ParetoIntensity{alpha};
    if (intensity == "exponential") cox = ExponentialIntensity{a, b};
    out << "x,cdf\n";
    for (double xi : grid(x, range, log_grid)) {
      double v = 0.0;
      if (limit == "frechet") {
        v = frechet_cdf({alpha, sigma}, xi);
      } else if (limit == "gumbel") {
        v = gumbel_cdf({a, b, sigma}, xi);
      } else if (limit == "stable") {
        v = stable_half_cdf({sigma}, xi);
      } else if (limit == "truncated_stable") {
        v = truncated_stable_cdf({sigma}, xi, t_cap);
      } else if (limit == "cox") {
        v = cox_topj_cdf(cox, {sigma}, j, xi);
      } else {
        v = truncated_mixture_cdf(cox, {sigma}, j, xi, t_cap);
      }
      out << csv::row({csv::format(xi), csv::format(v)});
    }
    return kExitOk;
  }
};

// ---- experiment

struct ExperimentCmd {
  std::optional<std::string> kind;
  std::optional<std::string> config_path;
  std::optional<std::string> replay_path;
  std::string out_dir = ".";
  bool check = false;
  int workers = 0;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> replicates;
  std::optional<std::int64_t> k;
  std::optional<double> t_cap;
  LawFlags law;
  CLI::App* app = nullptr;

  ExperimentConfig config() const {
    ExperimentConfig cfg;
    if (config_path) {
      json j = read_json_file(*config_path);
      if (kind) j["kind"] = *kind;
      try {
        cfg = config_from_json(j);
      } catch (const json::exception& e) {
        throw UsageError(*config_path + ": " + e.what());
      }
    } else if (kind) {
      cfg = ExperimentConfig::defaults(kind_from_string(*kind));
    } else {
      throw UsageError("experiment needs --kind, --config or --replay");
    }
    if (app->count("--family") + app->count("--alpha") + app->count("--C") > 0) {
      cfg.law = law.descriptor();
      ReproductionLaw::from_descriptor(cfg.law);
    }
    if (seed) cfg.base_seed = *seed;
    if (replicates) cfg.replicates = *replicates;
    if (k) cfg.k = *k;
    if (t_cap) cfg.t_cap = *t_cap;
    if (workers > 0) cfg.workers = workers;
    cfg.validate();
    return cfg;
  }

  static void report(std::ostream& out, const ExperimentResult& r) {
    out << "kind=" << to_string(r.config.kind) << '\n'
        << "replicates_run=" << r.replicates_run << '\n'
        << "censored=" << r.censor_count << '\n';
    for (const Check& c : r.checks) {
      out << (c.pass ? "pass " : "FAIL ") << c.name << " value=" << csv::format(c.value) << " bounds=["
          << csv::format(c.lower) << ',' << csv::format(c.upper) << ']';
      if (c.noise_floor > 0.0) out << " noise_floor=" << csv::format(c.noise_floor);
      out << '\n';
    }
  }

  int run(std::ostream& out, std::ostream& err) const {
    if (replay_path) {
      if (kind || config_path) throw UsageError("--replay cannot be combined with --kind or --config");
      const ReplayReport rep = replay(read_json_file(*replay_path), workers);
      report(out, rep.result);
      out << "manifest=" << write_artifacts(rep.result, out_dir) << '\n';
      for (const auto& name : rep.mismatched) err << "replay mismatch: " << name << '\n';
      out << "replay=" << (rep.identical() ? "identical" : "MISMATCH") << '\n';
      if (!rep.identical()) return kExitReplayMismatch;
      return check && !rep.result.passed() ? kExitCheckFailed : kExitOk;
    }
    const ExperimentResult r = run_experiment(config());
    report(out, r);
    out << "manifest=" << write_artifacts(r, out_dir) << '\n';
    return check && !r.passed() ? kExitCheckFailed : kExitOk;
  }
};

void add_grid(CLI::App* sub, std::vector<double>& x, std::vector<double>& range, bool& log_grid) {
  sub->add_option("--x", x, "Comma-separated x values")->delimiter(',');
  sub->add_option("--grid", range, "lo,hi,n: n evenly spaced points")->delimiter(',')->expected(3);
  sub->add_flag("--log-grid", log_grid, "Space --grid points geometrically");
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  struct ClassicLocale {
    std::ostream& os;
    std::locale saved = os.imbue(std::locale::classic());
    ~ClassicLocale() { os.imbue(saved); }
  } classic{out};
  CLI::App app{"Extremes of critical Galton-Watson forests"};
  app.name("gwx");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(GWX_VERSION));
  app.footer("Numbers print with 17 significant digits in the C locale. GW_EXTREMES_THREADS sets the default worker count.");

  LawCmd law_cmd;
  auto* law = app.add_subcommand("law", "Print moments, tail table and phi of a reproduction law");
  law_cmd.law.add_to(law);
  law->add_option("--rows", law_cmd.rows, "Rows of the tail table")->capture_default_str();
  law->add_option("--eps", law_cmd.eps, "eps values for phi(eps)")->delimiter(',')->capture_default_str();
  law->footer("Output: key=value lines, then CSV n,pmf,tail and (unbounded support) CSV eps,phi.");

  SimulateCmd sim_cmd;
  auto* sim = app.add_subcommand("simulate", "Simulate forests from k ancestors and print one CSV row per replicate");
  sim_cmd.law.add_to(sim);
  sim->add_option("--k", sim_cmd.k, "Ancestors")->capture_default_str();
  sim->add_option("--replicates", sim_cmd.replicates, "Replicates")->capture_default_str();
  sim->add_option("--m", sim_cmd.m, "Order statistics kept")->capture_default_str();
  sim->add_option("--t-cap", sim_cmd.t_cap, "Step cap in units of k^2")->capture_default_str();
  sim->add_option("--max-steps", sim_cmd.max_steps, "Absolute step cap; overrides --t-cap when > 0")->capture_default_str();
  sim->add_option("--seed", sim_cmd.seed, "Base seed")->capture_default_str();
  sim->add_option("--workers", sim_cmd.workers, "Worker threads; 0 = GW_EXTREMES_THREADS or hardware")->capture_default_str();
  sim->add_flag("--decoupled", sim_cmd.decoupled, "Also draw T_k fresh offspring counts independent of the forest");
  sim->add_option("--out", sim_cmd.out_path, "Write CSV here instead of stdout");
  sim->footer(
      "CSV columns: replicate_index,k,censored,T_k,X1..Xm[,eta1..etam]. T_k is the step count used when censored;\n"
      "Xj is the j-th largest offspring count (empty if fewer than j individuals); etaj the same for the decoupled draws.");

  ExactCmd exact_cmd;
  auto* exact = app.add_subcommand("exact", "Tabulate rho(x) = P(max offspring of one tree <= x) and rho(x)^k");
  exact_cmd.law.add_to(exact);
  add_grid(exact, exact_cmd.x, exact_cmd.range, exact_cmd.log_grid);
  exact->add_option("--k", exact_cmd.k, "Ancestors")->capture_default_str();
  exact->add_flag("--normalized", exact_cmd.normalized, "Read x in units of phi(k^-2)");
  exact->footer(
      "CSV columns: x,rho,rho_k,lemma1_ratio; with --normalized: x,level,rho,rho_k,lemma1_ratio,frechet\n"
      "where level = x phi(k^-2) and frechet is the limit CDF (Pareto laws only).\n"
      "lemma1_ratio = (1 - rho) sigma / sqrt(2 tail(level)), empty when the tail vanishes.");

  LimitsCmd lim_cmd;
  auto* lim = app.add_subcommand("limits", "Tabulate a limit-law CDF");
  lim_cmd.app = lim;
  lim->add_option("--law", lim_cmd.limit, "Limit law")
      ->check(CLI::IsMember({"frechet", "gumbel", "stable", "truncated_stable", "cox", "truncated_mixture"}))
      ->capture_default_str();
  lim->add_option("--family", lim_cmd.family, "Take sigma (and a, b for geometric) from this law")
      ->check(CLI::IsMember({"pareto", "geometric", "binary"}));
  lim->add_option("--alpha", lim_cmd.alpha, "Tail exponent")->capture_default_str();
  lim->add_option("--C", lim_cmd.C, "Pareto tail constant, used with --family")->capture_default_str();
  lim->add_option("--sigma", lim_cmd.sigma, "Offspring standard deviation")->capture_default_str();
  lim->add_option("--a", lim_cmd.a, "Exponential tail prefactor")->capture_default_str();
  lim->add_option("--b", lim_cmd.b, "Exponential tail rate")->capture_default_str();
  lim->add_option("--intensity", lim_cmd.intensity, "Cox intensity shape")
      ->check(CLI::IsMember({"pareto", "exponential"}))
      ->capture_default_str();
  lim->add_option("--j", lim_cmd.j, "Order statistic for cox and truncated_mixture")->capture_default_str();
  lim->add_option("--t-cap", lim_cmd.t_cap, "Truncation of the stable time")->capture_default_str();
  add_grid(lim, lim_cmd.x, lim_cmd.range, lim_cmd.log_grid);
  lim->footer("CSV columns: x,cdf.");

  ExperimentCmd exp_cmd;
  auto* ex = app.add_subcommand("experiment", "Run a verification campaign and write CSV tables and a JSON manifest");
  exp_cmd.app = ex;
  ex->add_option("--kind", exp_cmd.kind, "Experiment kind")
      ->check(CLI::IsMember({"max_law", "joint_law", "decoupled", "laplace_grid", "lemma2", "gumbel"}));
  ex->add_option("--config", exp_cmd.config_path, "JSON config; missing keys take the defaults of its kind");
  ex->add_option("--replay", exp_cmd.replay_path, "Re-run the config of a manifest and compare table checksums");
  ex->add_option("--out", exp_cmd.out_dir, "Output directory")->capture_default_str();
  ex->add_flag("--check", exp_cmd.check, "Exit 2 if any check fails");
  ex->add_option("--workers", exp_cmd.workers, "Worker threads; 0 = config, GW_EXTREMES_THREADS or hardware")->capture_default_str();
  ex->add_option("--seed", exp_cmd.seed, "Override base_seed");
  ex->add_option("--replicates", exp_cmd.replicates, "Override replicates");
  ex->add_option("--k", exp_cmd.k, "Override k");
  ex->add_option("--t-cap", exp_cmd.t_cap, "Override t_cap");
  exp_cmd.law.add_to(ex);
  ex->footer(
      "Files: <kind>_seed<seed>_<table>.csv and <kind>_seed<seed>_manifest.json under --out.\n"
      "The manifest echoes the full config, the resolved worker count and step caps, and every check.\n"
      "Exit codes: 0 ok, 1 usage error, 2 failed check under --check, 3 replay mismatch.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*law) return law_cmd.run(out);
    if (*sim) return sim_cmd.run(out);
    if (*exact) return exact_cmd.run(out);
    if (*lim) return lim_cmd.run(out);
    return exp_cmd.run(out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what();
    return kExitUsage;
  }
}

int dispatch(int argc, const char* const* argv) { return dispatch(argc, argv, std::cout, std::cerr); }

}  // namespace gwx::cli
