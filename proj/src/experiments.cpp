#include "gwx/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <locale>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "gwx/csv.hpp"
#include "gwx/limit_laws.hpp"
#include "gwx/statistics.hpp"

namespace gwx {

namespace {

using json = nlohmann::json;

constexpr ExperimentKind kAllKinds[] = {ExperimentKind::max_law,      ExperimentKind::joint_law,
                                        ExperimentKind::decoupled,    ExperimentKind::laplace_grid,
                                        ExperimentKind::lemma2,       ExperimentKind::gumbel};

double sq(double x) { return x * x; }

double phi_at(const ReproductionLaw& law, std::int64_t k) {
  const double kk = static_cast<double>(k);
  return law.phi(1.0 / (kk * kk));
}

const RegVarTail& regvar_of(const ReproductionLaw& law, std::string_view what) {
  const auto* t = std::get_if<RegVarTail>(&law.tail_class());
  if (t == nullptr) throw std::invalid_argument(std::string(what) + " needs a regularly varying (pareto) law");
  return *t;
}

std::string fmt(double x) { return csv::format(x); }
std::string fmt(std::int64_t x) { return std::to_string(x); }

template <class Fn>
void parallel_for(std::int64_t lo, std::int64_t hi, int workers, Fn&& fn) {
  if (hi <= lo) return;
  workers = static_cast<int>(std::min<std::int64_t>(workers, hi - lo));
  std::atomic<std::int64_t> next{lo};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto body = [&] {
    for (;;) {
      const std::int64_t i = next.fetch_add(1);
      if (i >= hi) return;
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(hi);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

Check bounded(std::string name, double value, double lower, double upper) {
  Check c;
  c.name = std::move(name);
  c.value = value;
  c.lower = lower;
  c.upper = upper;
  c.pass = value >= lower && value <= upper;
  return c;
}

Check ks_check(std::string name, double d, std::size_t n, double tol, std::string note = {}) {
  Check c = bounded(std::move(name), d, 0.0, tol);
  c.noise_floor = ks_noise_floor(n);
  c.sample_size = static_cast<std::int64_t>(n);
  c.note = std::move(note);
  return c;
}

ExperimentResult start_result(const ExperimentConfig& cfg) {
  ExperimentResult r;
  r.config = cfg;
  r.code_version = GWX_VERSION;
  return r;
}

void add_counts(ExperimentResult& r, const Campaign& c) {
  r.replicates_run = static_cast<std::int64_t>(c.replicates.size());
  r.censor_count = c.censored();
  r.uncensored = r.replicates_run - r.censor_count;
}

double effective_t_cap(const Campaign& c) {
  return static_cast<double>(c.max_steps) / sq(static_cast<double>(c.k));
}

Check censor_check(const ExperimentConfig& cfg, const Campaign& c, double sigma) {
  const double n = static_cast<double>(c.replicates.size());
  const double p = predicted_censor_fraction(sigma, effective_t_cap(c));
  const double se = std::sqrt(p * (1.0 - p) / n);
  const double w = cfg.tol.censor_sigmas * se;
  Check chk = bounded("censor_fraction", static_cast<double>(c.censored()) / n, p - w, p + w);
  chk.sample_size = static_cast<std::int64_t>(c.replicates.size());
  chk.note = "predicted P(tau > t_cap) = " + fmt(p);
  return chk;
}

Table records_table(const Campaign& c, int m) {
  Table t;
  t.name = "records";
  t.header = {"replicate_index", "k", "censored", "T_k"};
  for (int j = 1; j <= m; ++j) t.header.push_back("X" + std::to_string(j));
  for (std::size_t i = 0; i < c.replicates.size(); ++i) {
    const auto& rec = c.replicates[i].record;
    std::vector<std::string> row{std::to_string(i), fmt(rec.ancestors), rec.censored ? "1" : "0", fmt(rec.steps_used)};
    for (int j = 0; j < m; ++j) {
      const auto u = static_cast<std::size_t>(j);
      row.push_back(u < rec.top.size() ? std::to_string(rec.top[u]) : std::string());
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// Order statistic j (0-based) of every uncensored replicate, divided by phi.
std::vector<double> normalized_top(const Campaign& c, std::size_t j) {
  std::vector<double> out;
  for (const auto& r : c.replicates) {
    if (r.record.censored) continue;
    const double x = j < r.record.top.size() ? static_cast<double>(r.record.top[j]) : 0.0;
    out.push_back(x / c.phi);
  }
  return out;
}

std::vector<double> scaled_totals(const Campaign& c) {
  std::vector<double> out;
  const double kk = sq(static_cast<double>(c.k));
  for (const auto& r : c.replicates) {
    if (!r.record.censored) out.push_back(static_cast<double>(r.record.total_population) / kk);
  }
  return out;
}

// Memoized reference CDF; the KS statistic and the ECDF table query the same points.
class CachedCdf {
 public:
  explicit CachedCdf(std::function<double(double)> f) : f_(std::move(f)) {}
  double operator()(double x) {
    const auto it = cache_.find(x);
    if (it != cache_.end()) return it->second;
    return cache_[x] = f_(x);
  }

 private:
  std::function<double(double)> f_;
  std::map<double, double> cache_;
};

// ECDF at each distinct sample value, next to the reference CDFs.
Table ecdf_table(std::string name, const Ecdf& e, const std::vector<std::pair<std::string, CachedCdf*>>& refs) {
  Table t;
  t.name = std::move(name);
  t.header = {"x", "ecdf"};
  for (const auto& r : refs) t.header.push_back(r.first);
  const auto& v = e.values();
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    std::vector<std::string> row{fmt(v[i]), fmt(static_cast<double>(j) / n)};
    for (const auto& r : refs) row.push_back(fmt((*r.second)(v[i])));
    t.rows.push_back(std::move(row));
    i = j;
  }
  return t;
}

std::int64_t level_index(const Campaign& c, std::uint32_t level) {
  const auto it = std::find(c.count_levels.begin(), c.count_levels.end(), level);
  if (it == c.count_levels.end()) throw std::logic_error("campaign does not record the requested level");
  return it - c.count_levels.begin();
}

std::uint32_t count_level(double x, double phi) { return static_cast<std::uint32_t>(std::floor(x * phi)); }

// Mean of a per-replicate functional over all replicates, with the censoring bias bound
// exp(-a t_cap) * (censored fraction): censored rows use their truncated prefix.
struct McEstimate {
  MeanEstimate mean;
  double bias = 0.0;
};

McEstimate mc_functional(const Campaign& c, double a, const std::function<double(const OffspringRecord&)>& penalty) {
  std::vector<double> v;
  v.reserve(c.replicates.size());
  const double kk = sq(static_cast<double>(c.k));
  for (const auto& r : c.replicates) {
    v.push_back(std::exp(-a * static_cast<double>(r.record.steps_used) / kk - penalty(r.record)));
  }
  McEstimate out{mean_estimate(v), 0.0};
  out.bias = std::exp(-a * effective_t_cap(c)) * static_cast<double>(c.censored()) / static_cast<double>(v.size());
  return out;
}

// MC estimate minus reference lies in [-s SE, s SE + bias] (censored rows can only raise the estimate).
Check mc_check(std::string name, const McEstimate& est, double reference, double sigmas) {
  Check chk = bounded(std::move(name), est.mean.mean - reference, -sigmas * est.mean.std_error,
                      sigmas * est.mean.std_error + est.bias);
  chk.note = "reference " + fmt(reference) + ", estimate " + fmt(est.mean.mean) + ", SE " + fmt(est.mean.std_error) +
             ", bias bound " + fmt(est.bias);
  return chk;
}

std::string k_label(std::int64_t k) { return "k" + std::to_string(k); }

void require_increasing(const auto& grid, const char* name) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument(std::string(name) + " must be strictly increasing");
  }
}

}  // namespace

std::string_view to_string(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::max_law: return "max_law";
    case ExperimentKind::joint_law: return "joint_law";
    case ExperimentKind::decoupled: return "decoupled";
    case ExperimentKind::laplace_grid: return "laplace_grid";
    case ExperimentKind::lemma2: return "lemma2";
    case ExperimentKind::gumbel: return "gumbel";
  }
  return "unknown";
}

ExperimentKind kind_from_string(std::string_view name) {
  for (auto k : kAllKinds) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown experiment kind '" + std::string(name) + "'");
}

PenaltyTemplate Lemma2Case::penalty() const {
  return height == 0.0 ? PenaltyTemplate::zero() : PenaltyTemplate::step(level, height);
}

std::int64_t ExperimentConfig::resolved_max_steps() const { return resolved_max_steps(k); }

std::int64_t ExperimentConfig::resolved_max_steps(std::int64_t k_value) const {
  if (max_steps > 0) return max_steps;
  return static_cast<std::int64_t>(std::ceil(t_cap * sq(static_cast<double>(k_value))));
}

int ExperimentConfig::resolved_workers() const {
  if (workers > 0) return workers;
  if (const char* env = std::getenv("GW_EXTREMES_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1 || v > 4096) throw std::invalid_argument("GW_EXTREMES_THREADS must be a positive integer");
    return static_cast<int>(v);
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void ExperimentConfig::validate() const {
  if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (m < 1) throw std::invalid_argument("m must be >= 1");
  if (max_steps < 0) throw std::invalid_argument("max_steps must be >= 0 (0 derives it from t_cap)");
  if (max_steps == 0 && !(t_cap > 0.0 && std::isfinite(t_cap))) throw std::invalid_argument("t_cap must be > 0");
  if (workers < 0) throw std::invalid_argument("workers must be >= 0");
  if (dispersion_buckets < 1) throw std::invalid_argument("dispersion_buckets must be >= 1");
  if (!(dispersion_x > 0.0)) throw std::invalid_argument("dispersion_x must be > 0");
  require_increasing(x_grid, "x_grid");
  require_increasing(a_grid, "a_grid");
  require_increasing(k_grid, "k_grid");
  for (double x : x_grid) {
    if (!(x > 0.0)) throw std::invalid_argument("x_grid values must be > 0");
  }
  for (double a : a_grid) {
    if (!(a >= 0.0)) throw std::invalid_argument("a_grid values must be >= 0");
  }
  for (auto kv : k_grid) {
    if (kv < 1) throw std::invalid_argument("k_grid values must be >= 1");
  }
  if ((kind == ExperimentKind::joint_law) && m < 2) throw std::invalid_argument("joint_law needs m >= 2");
  if ((kind == ExperimentKind::decoupled || kind == ExperimentKind::lemma2 || kind == ExperimentKind::gumbel) &&
      k_grid.empty()) {
    throw std::invalid_argument("k_grid must not be empty");
  }
  (void)ReproductionLaw::from_descriptor(law);
}

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::max_law:
    case ExperimentKind::joint_law:
      c.uncensored_target = true;
      break;
    case ExperimentKind::decoupled:
      c.k_grid = {100, 300, 1000};
      c.uncensored_target = true;
      break;
    case ExperimentKind::laplace_grid:
      break;
    case ExperimentKind::lemma2:
      c.k_grid = {100, 1000, 10'000};
      break;
    case ExperimentKind::gumbel:
      c.law = LawDescriptor{"geometric", 0.0, 0.0};
      c.k_grid = {1000, 10'000};
      c.lemma2_mc.reset();
      break;
  }
  return c;
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"kind", std::string(to_string(c.kind))},
           {"law", c.law},
           {"k", c.k},
           {"replicates", c.replicates},
           {"uncensored_target", c.uncensored_target},
           {"m", c.m},
           {"t_cap", c.t_cap},
           {"max_steps", c.max_steps},
           {"base_seed", c.base_seed},
           {"workers", c.workers},
           {"x_grid", c.x_grid},
           {"a_grid", c.a_grid},
           {"k_grid", c.k_grid},
           {"dispersion_x", c.dispersion_x},
           {"dispersion_buckets", c.dispersion_buckets}};
  json cases = json::array();
  for (const auto& lc : c.lemma2_cases) cases.push_back({{"a", lc.a}, {"level", lc.level}, {"height", lc.height}});
  j["lemma2_cases"] = cases;
  if (c.lemma2_mc) {
    j["lemma2_mc"] = {{"a", c.lemma2_mc->a}, {"level", c.lemma2_mc->level}, {"height", c.lemma2_mc->height}};
  } else {
    j["lemma2_mc"] = nullptr;
  }
  const auto& t = c.tol;
  j["tolerances"] = {{"ks_max", t.ks_max},
                     {"ks_second", t.ks_second},
                     {"dispersion_lo", t.dispersion_lo},
                     {"dispersion_hi", t.dispersion_hi},
                     {"min_bucket", t.min_bucket},
                     {"censor_sigmas", t.censor_sigmas},
                     {"exact_sup", t.exact_sup},
                     {"ks_decoupled", t.ks_decoupled},
                     {"mc_sigmas", t.mc_sigmas},
                     {"lemma2_relative", t.lemma2_relative},
                     {"gumbel_sup", t.gumbel_sup},
                     {"median_shift_slack", t.median_shift_slack}};
}

namespace {
template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}
Lemma2Case case_from(const json& j) {
  Lemma2Case c;
  take(j, "a", c.a);
  take(j, "level", c.level);
  take(j, "height", c.height);
  return c;
}

template <std::size_t N>
void reject_unknown(const json& j, const char* const (&keys)[N], const char* where) {
  if (!j.is_object()) throw std::invalid_argument(std::string(where) + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (std::find_if(std::begin(keys), std::end(keys), [&](const char* k) { return item.key() == k; }) == std::end(keys)) {
      throw std::invalid_argument("unknown " + std::string(where) + " key '" + item.key() + "'");
    }
  }
}

}  // namespace

void from_json(const json& j, ExperimentConfig& c) {
  static const char* const kKeys[] = {"kind",       "law",          "k",         "replicates", "uncensored_target",
                                      "m",          "t_cap",        "max_steps", "base_seed",  "workers",
                                      "x_grid",     "a_grid",       "k_grid",    "dispersion_x", "dispersion_buckets",
                                      "lemma2_cases", "lemma2_mc",  "tolerances"};
  static const char* const kTolKeys[] = {"ks_max",     "ks_second",     "dispersion_lo", "dispersion_hi",
                                         "min_bucket", "censor_sigmas", "exact_sup",     "ks_decoupled",
                                         "mc_sigmas",  "lemma2_relative", "gumbel_sup",  "median_shift_slack"};
  reject_unknown(j, kKeys, "config");
  if (j.contains("tolerances")) reject_unknown(j.at("tolerances"), kTolKeys, "tolerances");
  c = ExperimentConfig::defaults(j.contains("kind") ? kind_from_string(j.at("kind").get<std::string>())
                                                    : ExperimentKind::max_law);
  take(j, "law", c.law);
  take(j, "k", c.k);
  take(j, "replicates", c.replicates);
  take(j, "uncensored_target", c.uncensored_target);
  take(j, "m", c.m);
  take(j, "t_cap", c.t_cap);
  take(j, "max_steps", c.max_steps);
  take(j, "base_seed", c.base_seed);
  take(j, "workers", c.workers);
  take(j, "x_grid", c.x_grid);
  take(j, "a_grid", c.a_grid);
  take(j, "k_grid", c.k_grid);
  take(j, "dispersion_x", c.dispersion_x);
  take(j, "dispersion_buckets", c.dispersion_buckets);
  if (j.contains("lemma2_cases")) {
    c.lemma2_cases.clear();
    for (const auto& e : j.at("lemma2_cases")) c.lemma2_cases.push_back(case_from(e));
  }
  if (j.contains("lemma2_mc")) {
    if (j.at("lemma2_mc").is_null()) {
      c.lemma2_mc.reset();
    } else {
      c.lemma2_mc = case_from(j.at("lemma2_mc"));
    }
  }
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    take(t, "ks_max", c.tol.ks_max);
    take(t, "ks_second", c.tol.ks_second);
    take(t, "dispersion_lo", c.tol.dispersion_lo);
    take(t, "dispersion_hi", c.tol.dispersion_hi);
    take(t, "min_bucket", c.tol.min_bucket);
    take(t, "censor_sigmas", c.tol.censor_sigmas);
    take(t, "exact_sup", c.tol.exact_sup);
    take(t, "ks_decoupled", c.tol.ks_decoupled);
    take(t, "mc_sigmas", c.tol.mc_sigmas);
    take(t, "lemma2_relative", c.tol.lemma2_relative);
    take(t, "gumbel_sup", c.tol.gumbel_sup);
    take(t, "median_shift_slack", c.tol.median_shift_slack);
  }
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  from_json(j, c);
  c.validate();
  return c;
}

std::string Table::to_csv() const {
  std::string out = csv::row(header);
  for (const auto& r : rows) out += csv::row(r);
  return out;
}

bool ExperimentResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* ExperimentResult::find_check(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::int64_t Campaign::censored() const {
  return std::count_if(replicates.begin(), replicates.end(), [](const Replicate& r) { return r.record.censored; });
}

Campaign run_campaign(const ExperimentConfig& cfg, std::int64_t k, bool decoupled) {
  cfg.validate();
  const ReproductionLaw law = ReproductionLaw::from_descriptor(cfg.law);
  Campaign c;
  c.k = k;
  c.max_steps = cfg.resolved_max_steps(k);
  if (!std::holds_alternative<FiniteSupport>(law.tail_class())) {
    c.phi = phi_at(law, k);
    std::vector<std::uint32_t> levels{count_level(cfg.dispersion_x, c.phi)};
    if (cfg.lemma2_mc && cfg.lemma2_mc->height != 0.0) levels.push_back(count_level(cfg.lemma2_mc->level, c.phi));
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    c.count_levels = levels;
  }
  SimConfig sc;
  sc.k = k;
  sc.m = cfg.m;
  sc.max_steps = c.max_steps;
  sc.seed = cfg.base_seed;
  sc.count_levels = c.count_levels;
  sc.validate();

  const auto one = [&](std::int64_t i) {
    const auto idx = static_cast<std::uint64_t>(i);
    RandomStream walk = replicate_stream(cfg.base_seed, idx, 0);
    Replicate& out = c.replicates[static_cast<std::size_t>(i)];
    if (!decoupled) {
      out.record = simulate_walk(law, sc, walk);
      return;
    }
    RandomStream eta_stream = replicate_stream(cfg.base_seed, idx, 1);
    LawSource ws(law, walk);
    LawSource es(law, eta_stream);
    auto paired = simulate_paired(sc, ws, es);
    out.record = std::move(paired.coupled);
    out.eta_top = std::move(paired.eta_top);
  };

  const int workers = cfg.resolved_workers();
  if (!cfg.uncensored_target) {
    c.replicates.resize(static_cast<std::size_t>(cfg.replicates));
    parallel_for(0, cfg.replicates, workers, one);
    return c;
  }
  // Rounds sized from the uncensored rate seen so far; the cut point depends on the data only.
  std::int64_t done = 0;
  std::int64_t uncensored = 0;
  std::int64_t batch = cfg.replicates;
  for (;;) {
    c.replicates.resize(static_cast<std::size_t>(done + batch));
    parallel_for(done, done + batch, workers, one);
    for (std::int64_t i = done; i < done + batch; ++i) {
      if (c.replicates[static_cast<std::size_t>(i)].record.censored) continue;
      if (++uncensored == cfg.replicates) {
        c.replicates.resize(static_cast<std::size_t>(i + 1));
        return c;
      }
    }
    done += batch;
    const double rate = std::max(0.02, static_cast<double>(uncensored) / static_cast<double>(done));
    batch = static_cast<std::int64_t>(std::ceil(1.05 * static_cast<double>(cfg.replicates - uncensored) / rate)) + 16;
  }
}

Campaign run_campaign(const ExperimentConfig& cfg) { return run_campaign(cfg, cfg.k, false); }

double predicted_censor_fraction(double sigma, double t_cap) {
  return 1.0 - stable_half_cdf(StableHalf{sigma}, t_cap);
}

double exact_frechet_gap(const ReproductionLaw& law, std::int64_t k, const std::vector<double>& x_grid) {
  const auto& rv = regvar_of(law, "exact_frechet_gap");
  const FrechetLimit fl{rv.alpha, law.sigma()};
  const double phi = phi_at(law, k);
  double gap = 0.0;
  for (double x : x_grid) gap = std::max(gap, std::abs(cdf_max_k(law, x * phi, k) - frechet_cdf(fl, x)));
  return gap;
}

ExperimentResult run_max_law(const ExperimentConfig& cfg) { return run_max_law(cfg, run_campaign(cfg)); }

ExperimentResult run_max_law(const ExperimentConfig& cfg, const Campaign& campaign) {
  const ReproductionLaw law = ReproductionLaw::from_descriptor(cfg.law);
  const auto& rv = regvar_of(law, "max_law");
  const double sigma = law.sigma();
  ExperimentResult r = start_result(cfg);
  add_counts(r, campaign);
  r.tables.push_back(records_table(campaign, cfg.m));

  const double t_cap = effective_t_cap(campaign);
  if (r.uncensored > 0) {
    const Ecdf e(normalized_top(campaign, 0));
    CachedCdf truncated([&](double x) {
      return truncated_mixture_cdf(ParetoIntensity{rv.alpha}, StableHalf{sigma}, 1, x, t_cap);
    });
    CachedCdf frechet([&](double x) { return frechet_cdf(FrechetLimit{rv.alpha, sigma}, x); });
    r.checks.push_back(ks_check("ks_max_vs_truncated_mixture", ks_statistic(e, std::ref(truncated)), e.size(),
                                cfg.tol.ks_max, "X*_k / phi(k^-2) vs truncated_mixture_cdf(j=1, t_cap)"));
    r.checks.push_back(ks_check("ks_max_vs_frechet", ks_statistic(e, std::ref(frechet)), e.size(), 1.0,
                                "reference only: untruncated limit"));
    r.tables.push_back(ecdf_table("ecdf_max", e, {{"truncated_mixture", &truncated}, {"frechet", &frechet}}));
  }
  r.checks.push_back(censor_check(cfg, campaign, sigma));

  // Exact fixed-point route.
  Table exact;
  exact.name = "exact";
  exact.header = {"k", "x", "phi", "rho_k", "frechet", "abs_diff"};
  std::vector<double> gaps;
  for (auto kv : cfg.k_grid) {
    const double phi = phi_at(law, kv);
    double gap = 0.0;
    for (double x : cfg.x_grid) {
      const double f = cdf_max_k(law, x * phi, kv);
      const double g = frechet_cdf(FrechetLimit{rv.alpha, sigma}, x);
      gap = std::max(gap, std::abs(f - g));
      exact.rows.push_back({fmt(kv), fmt(x), fmt(phi), fmt(f), fmt(g), fmt(std::abs(f - g))});
    }
    gaps.push_back(gap);
  }
  r.tables.push_back(std::move(exact));
  if (!gaps.empty()) {
    r.checks.push_back(bounded("exact_gap_" + k_label(cfg.k_grid.back()), gaps.back(), 0.0, cfg.tol.exact_sup));
    if (gaps.size() > 1) {
      Check dec = bounded("exact_gap_decreasing", gaps.back() - gaps.front(), -1.0, 0.0);
      dec.pass = gaps.back() < gaps.front();
      dec.note = "gap(" + k_label(cfg.k_grid.back()) + ") - gap(" + k_label(cfg.k_grid.front()) + ") must be < 0";
      r.checks.push_back(dec);
    }
  }
  return r;
}

ExperimentResult run_joint_law(const ExperimentConfig& cfg) { return run_joint_law(cfg, run_campaign(cfg)); }

ExperimentResult run_joint_law(const ExperimentConfig& cfg, const Campaign& campaign) {
  const ReproductionLaw law = ReproductionLaw::from_descriptor(cfg.law);
  const auto& rv = regvar_of(law, "joint_law");
  const double sigma = law.sigma();
  ExperimentResult r = start_result(cfg);
  add_counts(r, campaign);
  r.tables.push_back(records_table(campaign, cfg.m));
  r.checks.push_back(censor_check(cfg, campaign, sigma));
  if (r.uncensored == 0) return r;
  const double t_cap = effective_t_cap(campaign);

  // (i) T_k / k^2
  const std::vector<double> t = scaled_totals(campaign);
  const Ecdf et(t);
  CachedCdf stable([&](double x) { return truncated_stable_cdf(StableHalf{sigma}, x, t_cap); });
  r.checks.push_back(ks_check("ks_total_vs_truncated_stable", ks_statistic(et, std::ref(stable)), et.size(),
                              cfg.tol.ks_max, "T_k / k^2 vs stable(1/2) law conditioned on tau <= t_cap"));
  r.tables.push_back(ecdf_table("ecdf_total", et, {{"truncated_stable", &stable}}));

  // (ii) conditional Poisson counts above x phi
  const std::uint32_t level = count_level(cfg.dispersion_x, campaign.phi);
  const auto li = static_cast<std::size_t>(level_index(campaign, level));
  std::vector<double> counts;
  for (const auto& rep : campaign.replicates) {
    if (!rep.record.censored) counts.push_back(static_cast<double>(rep.record.counts_above[li]));
  }
  const double kk = sq(static_cast<double>(campaign.k));
  const double lambda_exact = kk * law.tail(level);
  const double lambda_limit = std::pow(cfg.dispersion_x, -rv.alpha);
  const auto buckets = poisson_dispersion(t, counts, lambda_exact, cfg.dispersion_buckets);
  Table disp;
  disp.name = "dispersion";
  disp.header = {"bucket", "t_lo", "t_hi", "size", "mean_count", "mean_predicted", "mean_predicted_limit",
                 "raw_dispersion", "dispersion"};
  int tested = 0;
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    const auto& bk = buckets[b];
    // mean of t over the bucket, recovered from the exact prediction
    const double t_mean = bk.mean_predicted / lambda_exact;
    disp.rows.push_back({std::to_string(b), fmt(bk.t_lo), fmt(bk.t_hi), fmt(bk.size), fmt(bk.mean_count),
                         fmt(bk.mean_predicted), fmt(t_mean * lambda_limit), fmt(bk.raw_dispersion),
                         fmt(bk.dispersion)});
    if (bk.size < cfg.tol.min_bucket) continue;
    Check c = bounded("dispersion_bucket" + std::to_string(b), bk.dispersion, cfg.tol.dispersion_lo,
                      cfg.tol.dispersion_hi);
    c.sample_size = bk.size;
    c.note = "var(count - t lambda) / mean(count), t in [" + fmt(bk.t_lo) + ", " + fmt(bk.t_hi) + "]";
    r.checks.push_back(c);
    ++tested;
  }
  if (tested == 0) {
    Check c = bounded("dispersion_buckets_tested", 0.0, 1.0, 1e300);
    c.note = "no bucket reached the minimum size";
    r.checks.push_back(c);
  }
  r.tables.push_back(std::move(disp));

  // (iii) second maximum
  const Ecdf e2(normalized_top(campaign, 1));
  CachedCdf mix2([&](double x) {
    return truncated_mixture_cdf(ParetoIntensity{rv.alpha}, StableHalf{sigma}, 2, x, t_cap);
  });
  r.checks.push_back(ks_check("ks_second_vs_truncated_mixture", ks_statistic(e2, std::ref(mix2)), e2.size(),
                              cfg.tol.ks_second, "X*_{k,2} / phi(k^-2) vs truncated_mixture_cdf(j=2, t_cap)"));
  r.tables.push_back(ecdf_table("ecdf_second", e2, {{"truncated_mixture", &mix2}}));
  return r;
}

ExperimentResult run_decoupled(const ExperimentConfig& cfg) {
  cfg.validate();
  const ReproductionLaw law = ReproductionLaw::from_descriptor(cfg.law);
  (void)regvar_of(law, "decoupled");
  ExperimentResult r = start_result(cfg);
  Table summary;
  summary.name = "summary";
  summary.header = {"k", "phi", "replicates_run", "uncensored", "censored", "ks_two_sample", "noise_floor"};
  std::vector<double> ks;
  for (auto kv : cfg.k_grid) {
    const Campaign c = run_campaign(cfg, kv, true);
    r.replicates_run += static_cast<std::int64_t>(c.replicates.size());
    r.censor_count += c.censored();
    Table pairs;
    pairs.name = "pairs_" + k_label(kv);
    pairs.header = {"replicate_index", "k", "censored", "T_k", "X1", "eta1"};
    std::vector<double> coupled, eta;
    for (std::size_t i = 0; i < c.replicates.size(); ++i) {
      const auto& rep = c.replicates[i];
      const bool cens = rep.record.censored;
      pairs.rows.push_back({std::to_string(i), fmt(kv), cens ? "1" : "0", fmt(rep.record.steps_used),
                            std::to_string(rep.record.max()),
                            cens || rep.eta_top.empty() ? std::string() : std::to_string(rep.eta_top.front())});
      if (cens) continue;
      coupled.push_back(static_cast<double>(rep.record.max()) / c.phi);
      eta.push_back(static_cast<double>(rep.eta_top.front()) / c.phi);
    }
    r.tables.push_back(std::move(pairs));
    const std::size_t n = coupled.size();
    double d = 1.0;
    if (n > 0) d = ks_two_sample(Ecdf(coupled), Ecdf(eta));
    ks.push_back(d);
    const double floor = n > 0 ? 1.36 * std::sqrt(2.0 / static_cast<double>(n)) : 1.0;
    summary.rows.push_back({fmt(kv), fmt(c.phi), fmt(static_cast<std::int64_t>(c.replicates.size())),
                            fmt(static_cast<std::int64_t>(n)), fmt(c.censored()), fmt(d), fmt(floor)});
    if (kv == cfg.k_grid.front()) {
      // Paired sanity: the walk phase of a paired replicate is simulate_walk on the same stream.
      SimConfig sc;
      sc.k = kv;
      sc.m = cfg.m;
      sc.max_steps = c.max_steps;
      sc.count_levels = c.count_levels;
      std::int64_t same = 0;
      const std::size_t probe = std::min<std::size_t>(c.replicates.size(), 32);
      for (std::size_t i = 0; i < probe; ++i) {
        RandomStream s = replicate_stream(cfg.base_seed, i, 0);
        const auto rec = simulate_walk(law, sc, s);
        same += rec.steps_used == c.replicates[i].record.steps_used && rec.top == c.replicates[i].record.top;
      }
      Check chk = bounded("paired_walk_identical", static_cast<double>(same), static_cast<double>(probe),
                          static_cast<double>(probe));
      chk.note = "replicates whose walk phase matches a plain walk on the same stream";
      r.checks.push_back(chk);
    }
  }
  r.uncensored = r.replicates_run - r.censor_count;
  r.tables.push_back(std::move(summary));
  Check last = bounded("ks_decoupled_" + k_label(cfg.k_grid.back()), ks.back(), 0.0, cfg.tol.ks_decoupled);
  last.note = "two-sample KS of X*_k / phi vs eta*_k / phi over uncensored pairs";
  r.checks.push_back(last);
  if (ks.size() > 1) {
    double worst = -1.0;
    for (std::size_t i = 1; i < ks.size(); ++i) worst = std::max(worst, ks[i] - ks[i - 1]);
    Check mono = bounded("ks_nonincreasing_in_k", worst, -1.0, 0.0);
    mono.note = "largest increase of the KS distance between consecutive k";
    r.checks.push_back(mono);
  }
  return r;
}

ExperimentResult run_laplace_grid(const ExperimentConfig& cfg) { return run_laplace_grid(cfg, run_campaign(cfg)); }

ExperimentResult run_laplace_grid(const ExperimentConfig& cfg, const Campaign& campaign) {
  const ReproductionLaw law = ReproductionLaw::from_descriptor(cfg.law);
  const double sigma = law.sigma();
  ExperimentResult r = start_result(cfg);
  add_counts(r, campaign);
  r.tables.push_back(records_table(campaign, cfg.m));
  Table t;
  t.name = "laplace";
  t.header = {"a", "estimate", "std_error", "bias_bound", "exact_finite_k", "limit"};
  const double kk = sq(static_cast<double>(campaign.k));
  for (double a : cfg.a_grid) {
    const McEstimate est = mc_functional(campaign, a, [](const OffspringRecord&) { return 0.0; });
    double exact = 1.0;
    if (a > 0.0) {
      const auto L = laplace_functional(law, PenaltyFunction::constant(a / kk));
      exact = std::exp(static_cast<double>(campaign.k) * std::log1p(-L.deficit));
    }
    const double limit = laplace_Tk_limit(a, sigma);
    t.rows.push_back({fmt(a), fmt(est.mean.mean), fmt(est.mean.std_error), fmt(est.bias), fmt(exact), fmt(limit)});
    r.checks.push_back(mc_check("laplace_vs_limit_a" + fmt(a), est, limit, cfg.tol.mc_sigmas));
    r.checks.push_back(mc_check("laplace_vs_exact_a" + fmt(a), est, exact, cfg.tol.mc_sigmas));
  }
  r.tables.push_back(std::move(t));
  return r;
}

ExperimentResult run_lemma2(const ExperimentConfig& cfg) {
  if (cfg.lemma2_mc) {
    const Campaign c = run_campaign(cfg);
    return run_lemma2(cfg, &c);
  }
  return run_lemma2(cfg, nullptr);
}

ExperimentResult run_lemma2(const ExperimentConfig& cfg, const Campaign* campaign) {
  cfg.validate();
  const ReproductionLaw law = ReproductionLaw::from_descriptor(cfg.law);
  const auto& rv = regvar_of(law, "lemma2");
  const double sigma = law.sigma();
  ExperimentResult r = start_result(cfg);
  Table t;
  t.name = "exact";
  t.header = {"case", "a", "level", "height", "k", "scaled_deficit", "limit", "relative_error"};
  for (std::size_t ci = 0; ci < cfg.lemma2_cases.size(); ++ci) {
    const auto& lc = cfg.lemma2_cases[ci];
    const PenaltyTemplate pen = lc.penalty();
    const double limit = lemma2_limit(rv.alpha, sigma, pen, lc.a);
    std::vector<double> errs;
    for (auto kv : cfg.k_grid) {
      const double v = lemma2_scaled_deficit(law, pen, lc.a, kv);
      const double err = limit == 0.0 ? std::abs(v) : std::abs(v - limit) / limit;
      errs.push_back(err);
      t.rows.push_back({std::to_string(ci), fmt(lc.a), fmt(lc.level), fmt(lc.height), fmt(kv), fmt(v), fmt(limit),
                        fmt(err)});
    }
    const std::string tag = "lemma2_case" + std::to_string(ci);
    Check last = bounded(tag + "_relative_error_" + k_label(cfg.k_grid.back()), errs.back(), 0.0,
                         cfg.tol.lemma2_relative);
    last.note = "a=" + fmt(lc.a) + ", f=" + (lc.height == 0.0 ? std::string("0") : fmt(lc.height) + "*1{x>" + fmt(lc.level) + "}") +
                ", limit " + fmt(limit);
    r.checks.push_back(last);
    if (errs.size() > 1) {
      double worst = -1.0;
      for (std::size_t i = 1; i < errs.size(); ++i) worst = std::max(worst, errs[i] - errs[i - 1]);
      Check mono = bounded(tag + "_error_decreasing", worst, -1.0, 0.0);
      mono.pass = worst < 0.0;
      r.checks.push_back(mono);
    }
  }
  r.tables.push_back(std::move(t));

  if (cfg.lemma2_mc && campaign != nullptr) {
    const auto& lc = *cfg.lemma2_mc;
    add_counts(r, *campaign);
    r.tables.push_back(records_table(*campaign, cfg.m));
    std::size_t li = 0;
    if (lc.height != 0.0) li = static_cast<std::size_t>(level_index(*campaign, count_level(lc.level, campaign->phi)));
    const double height = lc.height;
    const McEstimate est = mc_functional(*campaign, lc.a, [li, height](const OffspringRecord& rec) {
      return height == 0.0 ? 0.0 : height * static_cast<double>(rec.counts_above[li]);
    });
    const PenaltyTemplate pen = lc.penalty();
    const double limit = std::exp(-lemma2_limit(rv.alpha, sigma, pen, lc.a));
    const double d = lemma2_scaled_deficit(law, pen, lc.a, campaign->k);
    const double exact = std::exp(static_cast<double>(campaign->k) * std::log1p(-d / static_cast<double>(campaign->k)));
    Table mc;
    mc.name = "monte_carlo";
    mc.header = {"k", "a", "level", "height", "estimate", "std_error", "bias_bound", "exact_finite_k", "limit"};
    mc.rows.push_back({fmt(campaign->k), fmt(lc.a), fmt(lc.level), fmt(lc.height), fmt(est.mean.mean),
                       fmt(est.mean.std_error), fmt(est.bias), fmt(exact), fmt(limit)});
    r.tables.push_back(std::move(mc));
    r.checks.push_back(mc_check("lemma2_mc_vs_limit", est, limit, cfg.tol.mc_sigmas));
    r.checks.push_back(mc_check("lemma2_mc_vs_exact", est, exact, cfg.tol.mc_sigmas));
  }
  return r;
}

ExperimentResult run_gumbel(const ExperimentConfig& cfg) {
  cfg.validate();
  const ReproductionLaw law = ReproductionLaw::from_descriptor(cfg.law);
  const auto* et = std::get_if<ExponentialTail>(&law.tail_class());
  if (et == nullptr) throw std::invalid_argument("gumbel needs an exponential-tail (geometric) law");
  const GumbelLimit gl{et->a, et->b, law.sigma()};
  ExperimentResult r = start_result(cfg);
  Table t;
  t.name = "exact";
  t.header = {"k", "x", "centered_x", "rho_k", "gumbel", "abs_diff"};
  std::vector<double> sups;
  std::vector<std::int64_t> medians;
  for (auto kv : cfg.k_grid) {
    const double center = 2.0 * std::log(static_cast<double>(kv)) / et->b;
    const auto lo = static_cast<std::int64_t>(std::ceil(center - 6.0));
    const auto hi = static_cast<std::int64_t>(std::floor(center + 14.0));
    double sup = 0.0;
    for (std::int64_t x = std::max<std::int64_t>(lo, 0); x <= hi; ++x) {
      const double f = cdf_max_k(law, static_cast<double>(x), kv);
      const double g = gumbel_cdf(gl, static_cast<double>(x) - center);
      sup = std::max(sup, std::abs(f - g));
      t.rows.push_back({fmt(kv), fmt(x), fmt(static_cast<double>(x) - center), fmt(f), fmt(g), fmt(std::abs(f - g))});
    }
    sups.push_back(sup);
    std::int64_t med = 0;
    while (cdf_max_k(law, static_cast<double>(med), kv) < 0.5) ++med;
    medians.push_back(med);
  }
  r.tables.push_back(std::move(t));
  Check last = bounded("gumbel_sup_" + k_label(cfg.k_grid.back()), sups.back(), 0.0, cfg.tol.gumbel_sup);
  last.note = "sup over integers x in [2 ln(k)/b - 6, 2 ln(k)/b + 14]";
  r.checks.push_back(last);
  if (cfg.k_grid.size() > 1) {
    const double expect = 2.0 * std::log(static_cast<double>(cfg.k_grid.back()) / static_cast<double>(cfg.k_grid.front())) / et->b;
    Check shift = bounded("median_shift", static_cast<double>(medians.back() - medians.front()),
                          expect - cfg.tol.median_shift_slack, expect + cfg.tol.median_shift_slack);
    shift.note = "medians " + fmt(medians.front()) + " and " + fmt(medians.back()) + ", expected shift " + fmt(expect);
    r.checks.push_back(shift);
  }
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case ExperimentKind::max_law: return run_max_law(cfg);
    case ExperimentKind::joint_law: return run_joint_law(cfg);
    case ExperimentKind::decoupled: return run_decoupled(cfg);
    case ExperimentKind::laplace_grid: return run_laplace_grid(cfg);
    case ExperimentKind::lemma2: return run_lemma2(cfg);
    case ExperimentKind::gumbel: return run_gumbel(cfg);
  }
  throw std::logic_error("unhandled experiment kind");
}

std::string artifact_stem(const ExperimentConfig& cfg) {
  return std::string(to_string(cfg.kind)) + "_seed" + std::to_string(cfg.base_seed);
}

std::string checksum(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

json manifest(const ExperimentResult& result) {
  const auto& cfg = result.config;
  json resolved = {{"workers", cfg.resolved_workers()}};
  if (cfg.kind == ExperimentKind::decoupled) {
    json steps = json::object();
    for (auto kv : cfg.k_grid) steps[std::to_string(kv)] = cfg.resolved_max_steps(kv);
    resolved["max_steps_by_k"] = steps;
  } else {
    resolved["max_steps"] = cfg.resolved_max_steps();
  }
  json checks = json::array();
  for (const auto& c : result.checks) {
    checks.push_back({{"name", c.name},
                      {"value", c.value},
                      {"lower", c.lower},
                      {"upper", c.upper},
                      {"pass", c.pass},
                      {"noise_floor", c.noise_floor},
                      {"sample_size", c.sample_size},
                      {"note", c.note}});
  }
  json files = json::array();
  const std::string stem = artifact_stem(cfg);
  for (const auto& t : result.tables) {
    files.push_back({{"table", t.name}, {"file", stem + "_" + t.name + ".csv"}, {"checksum", checksum(t.to_csv())}});
  }
  return json{{"tool", "gwx"},
              {"code_version", result.code_version},
              {"kind", std::string(to_string(cfg.kind))},
              {"config", json(cfg)},
              {"resolved", resolved},
              {"seeds",
               {{"base_seed", cfg.base_seed},
                {"derivation", "replicate i, phase p: Philox4x32-10 key = base_seed, counter words 2-3 = (i, p)"}}},
              {"replicates_run", result.replicates_run},
              {"uncensored", result.uncensored},
              {"censor_count", result.censor_count},
              {"checks", checks},
              {"passed", result.passed()},
              {"files", files}};
}

std::string write_artifacts(const ExperimentResult& result, const std::string& dir) {
  const std::string stem = artifact_stem(result.config);
  const std::filesystem::path base(dir);
  for (const auto& t : result.tables) csv::write_file((base / (stem + "_" + t.name + ".csv")).string(), t.to_csv());
  const std::string path = (base / (stem + "_manifest.json")).string();
  csv::write_file(path, manifest(result).dump(2) + "\n");
  return path;
}

ReplayReport replay(const json& manifest_json, int workers) {
  ExperimentConfig cfg = config_from_json(manifest_json.at("config"));
  if (workers > 0) cfg.workers = workers;
  ReplayReport rep{run_experiment(cfg), {}};
  std::map<std::string, std::string> recorded;
  for (const auto& f : manifest_json.at("files")) recorded[f.at("table").get<std::string>()] = f.at("checksum").get<std::string>();
  for (const auto& t : rep.result.tables) {
    const auto it = recorded.find(t.name);
    if (it == recorded.end() || it->second != checksum(t.to_csv())) rep.mismatched.push_back(t.name);
    if (it != recorded.end()) recorded.erase(it);
  }
  for (const auto& [name, sum] : recorded) rep.mismatched.push_back(name);
  return rep;
}

}  // namespace gwx
