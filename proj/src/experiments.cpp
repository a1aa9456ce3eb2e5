#include "compgen/experiments.hpp"

#include "compgen/compose.hpp"
#include "compgen/constraints.hpp"
#include "compgen/continuous.hpp"
#include "compgen/diffused.hpp"
#include "compgen/discrete.hpp"
#include "compgen/error.hpp"
#include "compgen/fig4.hpp"
#include "compgen/planning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>

namespace compgen {

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "experiment" && key != "seed" && key != "params" && key != "out_dir") {
      throw ConfigError("unknown run config field '" + key + "'");
    }
  }
  RunConfig c;
  if (!j.contains("experiment") || !j["experiment"].is_string()) {
    throw ConfigError("run config needs a string field 'experiment'");
  }
  c.experiment = j["experiment"].get<std::string>();
  if (!j.contains("seed") || !j["seed"].is_number_integer()) {
    throw ConfigError("run config needs an integer field 'seed'");
  }
  c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw ConfigError("'params' must be an object");
    c.params = j["params"];
  }
  if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
  return c;
}

json RunConfig::to_json() const {
  return {{"experiment", experiment}, {"seed", seed}, {"params", params}};
}

std::string RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json().dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{
      "compose-2d",      "fig4",      "appendix-equivalence", "discrete-product",
      "noncompose-demo", "plan-maze", "arrange-disks",        "naive-caveat"};
  return names;
}

std::string resolve_out_dir(const RunConfig& cfg) {
  const char* env = std::getenv("COMPGEN_OUT_DIR");
  return env && *env ? std::string(env) : cfg.out_dir;
}

namespace {

// Parameter access that remembers which keys were read, so leftovers can be
// reported as typos.
class Params {
 public:
  Params(const json& j, std::string experiment) : j_(j), experiment_(std::move(experiment)) {
    if (!j_.is_object()) throw ConfigError("params of " + experiment_ + " must be an object");
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(experiment_ + " parameter '" + key + "': " + e.what());
    }
  }

  json raw(const std::string& key, json fallback = nullptr) {
    return has(key) ? j_.at(key) : fallback;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) {
        throw ConfigError("unknown parameter '" + key + "' for experiment " + experiment_);
      }
    }
  }

 private:
  const json& j_;
  std::string experiment_;
  std::set<std::string> used_;
};

// Collects emitted files under the output directory.
class Output {
 public:
  explicit Output(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir_ + ": " + ec.message());
  }
  std::string path(const std::string& name) {
    files_.push_back(name);
    return (std::filesystem::path(dir_) / name).string();
  }
  std::string list() const {
    std::string s;
    for (const auto& f : files_) s += (s.empty() ? "" : ",") + f;
    return s;
  }

 private:
  std::string dir_;
  std::vector<std::string> files_;
};

std::vector<std::pair<double, double>> cube(int dim, double lo, double hi) {
  return std::vector<std::pair<double, double>>(static_cast<std::size_t>(dim), {lo, hi});
}

std::pair<double, double> range_param(Params& p, const std::string& key,
                                      std::pair<double, double> fallback) {
  const auto r = p.get<std::vector<double>>(key, {fallback.first, fallback.second});
  if (r.size() != 2 || !(r[1] > r[0])) throw ConfigError("'" + key + "' must be [lo, hi]");
  return {r[0], r[1]};
}

NoiseSchedule schedule_param(Params& p, const NoiseSchedule& fallback) {
  const json j = p.raw("schedule");
  return j.is_null() ? fallback : schedule_from_json(j);
}

template <class T>
std::vector<T> vec(const Vector& v) {
  return {v.data(), v.data() + v.size()};
}

// Extra checks of the form [{"metric", "op", "bound"}, ...].
void apply_checks(MetricsReport& r, const json& checks) {
  if (checks.is_null()) return;
  if (!checks.is_array()) throw ConfigError("'checks' must be an array");
  for (const auto& c : checks) {
    if (!c.is_object() || !c.contains("metric") || !c.contains("op") || !c.contains("bound")) {
      throw ConfigError("each check needs metric, op and bound");
    }
    const auto name = c["metric"].get<std::string>();
    if (!r.metrics.count(name)) throw ConfigError("check references unknown metric '" + name + "'");
    r.check(name, c["op"].get<std::string>(), c["bound"].get<double>());
  }
}

// ---- compose-2d ---------------------------------------------------------------

MetricsReport compose_2d(Params& p, std::uint64_t seed, Output& out) {
  std::map<std::string, GmmEnergy> components;
  const json comp = p.raw("components");
  if (comp.is_null()) {
    components.emplace("a", GmmEnergy::gaussian(Eigen::Vector2d(-1.0, -0.5), 1.0));
    components.emplace("b", GmmEnergy::gaussian(Eigen::Vector2d(1.0, 0.5), 0.5));
  } else {
    if (!comp.is_object() || comp.empty()) throw ConfigError("'components' must map names to GMMs");
    for (const auto& [name, g] : comp.items()) components.emplace(name, gmm_from_json(g));
  }
  const int dim = components.begin()->second.dim();
  for (const auto& [name, g] : components) {
    if (g.dim() != dim) throw ConfigError("component '" + name + "' has a different dimension");
  }
  const json spec_j = p.raw("spec");
  CompositionSpec spec;
  if (spec_j.is_null()) {
    std::vector<CompositionSpec> leaves;
    for (const auto& [name, g] : components) leaves.push_back(CompositionSpec::leaf(name));
    spec = leaves.size() == 1 ? leaves.front() : CompositionSpec::product(leaves);
  } else {
    spec = spec_from_json(spec_j);
  }
  for (const auto& ref : spec.refs()) {
    if (!components.count(ref)) throw ConfigError("spec references unknown component '" + ref + "'");
  }
  const NoiseSchedule schedule = schedule_param(p, linear_schedule(50, 1e-4, 0.02));
  SamplerConfig sc = sampler_from_json(p.raw("sampler"));
  sc.seed = seed;
  const int n = p.get<int>("n", 20000);
  const int bins = p.get<int>("bins", dim == 1 ? 100 : 16);
  const auto range = range_param(p, "range", {-4.0, 4.0});
  const double kl_threshold = p.get<double>("kl_threshold", 0.02);
  const json checks = p.raw("checks");
  p.finish();

  std::map<std::string, FamilyPtr> families;
  std::map<std::string, EnergyPtr> clean;
  for (const auto& [name, g] : components) {
    families[name] = diffuse_gmm(g, schedule);
    clean[name] = std::make_shared<GmmEnergy>(g);
  }
  const FamilyPtr composed = compose_diffused(families, spec);
  const EnergyPtr target = build_energy(spec, clean);
  const auto density = [&](const Vector& x) { return std::exp(-target->energy(x)); };

  const SampleBatch batch = annealed_compose_sample(*composed, sc, n);
  const Matrix good = batch.good_samples();

  MetricsReport r;
  r.set("histogram_kl", histogram_kl(good, density, bins, cube(dim, range.first, range.second)));
  r.set("failures", static_cast<double>(batch.failures()));
  r.set("ess", batch.ess);
  for (int d = 0; d < dim; ++d) {
    const Vector col = good.col(d);
    const auto [m, v] = mean_variance(vec<double>(col));
    r.set("mean_" + std::to_string(d), m);
    r.set("abs_mean_" + std::to_string(d), std::abs(m));
    r.set("var_" + std::to_string(d), v);
  }
  r.metadata["samples"] = std::to_string(n);
  r.metadata["bins"] = std::to_string(bins);
  r.metadata["spec"] = spec_to_json(spec).dump();
  r.check("histogram_kl", "<", kl_threshold);
  r.check("failures", "==", 0.0);
  apply_checks(r, checks);

  write_samples_csv(out.path("samples.csv"), batch);
  write_json_file(out.path("diagnostics.json"), diagnostics_to_json(batch));
  if (dim == 2) {
    write_scatter_svg(out.path("scatter.svg"), good,
                      {range.first, range.second, range.first, range.second}, density,
                      "annealed composition");
  }
  return r;
}

// ---- fig4 ----------------------------------------------------------------------

MetricsReport fig4(Params& p, std::uint64_t seed, Output& out) {
  Fig4Config cfg;
  cfg.seed = seed;
  const auto composition = p.get<std::string>("composition", "product");
  if (composition == "product") {
    cfg.composition = Fig4Config::Composition::Product;
  } else if (composition == "mixture") {
    cfg.composition = Fig4Config::Composition::Mixture;
  } else {
    throw ConfigError("composition must be 'product' or 'mixture'");
  }
  if (p.has("p1")) cfg.p1 = gmm_from_json(p.raw("p1"));
  if (p.has("p2")) cfg.p2 = gmm_from_json(p.raw("p2"));
  cfg.mixture_weights = p.get<std::vector<double>>("mixture_weights", cfg.mixture_weights);
  cfg.n_grid = p.get<std::vector<int>>("n_grid", cfg.n_grid);
  cfg.seeds = p.get<int>("seeds", cfg.seeds);
  cfg.schedule = schedule_param(p, cfg.schedule);
  cfg.hidden = p.get<std::vector<int>>("hidden", cfg.hidden);
  cfg.train.steps = p.get<int>("train_steps", cfg.train.steps);
  cfg.train.learning_rate = p.get<double>("learning_rate", cfg.train.learning_rate);
  cfg.train.final_lr_fraction = p.get<double>("final_lr_fraction", cfg.train.final_lr_fraction);
  cfg.train.batch_size = p.get<int>("batch_size", cfg.train.batch_size);
  cfg.sampler = sampler_from_json(p.raw("sampler"), cfg.sampler);
  const auto single = p.get<std::string>("single_sampler", "annealed");
  if (single == "annealed") {
    cfg.single_sampler = Fig4Config::Sampler::Annealed;
  } else if (single == "reverse") {
    cfg.single_sampler = Fig4Config::Sampler::Reverse;
  } else {
    throw ConfigError("single_sampler must be 'annealed' or 'reverse'");
  }
  cfg.eval_samples = p.get<int>("eval_samples", cfg.eval_samples);
  cfg.bins = p.get<int>("bins", cfg.bins);
  cfg.range = p.get<double>("range", cfg.range);
  const int min_wins = p.get<int>("min_wins", cfg.seeds / 2 + 1);
  p.finish();

  const Fig4Result res = fig4_experiment(cfg);

  CsvTable t;
  t.header = {"n", "seed", "kl_compositional", "kl_monolithic", "loss_p1", "loss_p2", "loss_mono"};
  bool finite = true;
  std::map<int, std::pair<double, double>> sums;
  for (const auto& row : res.rows) {
    t.rows.push_back({double(row.n), double(row.seed), row.kl_compositional, row.kl_monolithic,
                      row.loss_p1, row.loss_p2, row.loss_mono});
    finite = finite && std::isfinite(row.kl_compositional) && std::isfinite(row.kl_monolithic);
    sums[row.n].first += row.kl_compositional;
    sums[row.n].second += row.kl_monolithic;
  }
  write_csv(out.path("fig4.csv"), t);

  MetricsReport r;
  r.set("wins_at_smallest_n", res.wins_at_smallest_n);
  r.set("all_kl_finite", finite ? 1.0 : 0.0);
  for (const auto& [n, s] : sums) {
    r.set("kl_compositional_mean_n" + std::to_string(n), s.first / cfg.seeds);
    r.set("kl_monolithic_mean_n" + std::to_string(n), s.second / cfg.seeds);
  }
  r.metadata["composition"] = composition;
  r.metadata["seeds"] = std::to_string(cfg.seeds);
  r.metadata["eval_samples"] = std::to_string(cfg.eval_samples);
  r.metadata["bins"] = std::to_string(cfg.bins);
  r.metadata["train_steps"] = std::to_string(cfg.train.steps);
  r.check("wins_at_smallest_n", ">=", min_wins);
  r.check("all_kl_finite", "==", 1.0);
  return r;
}

// ---- appendix-equivalence --------------------------------------------------------

MetricsReport appendix_equivalence(Params& p, std::uint64_t seed, Output& out) {
  const NoiseSchedule schedule = schedule_param(p, linear_schedule(50, 1e-4, 0.02));
  const GmmEnergy base = p.has("base") ? gmm_from_json(p.raw("base"))
                                       : GmmEnergy({0.5, 0.5},
                                                   {Vector::Constant(1, -1.0),
                                                    Vector::Constant(1, 1.5)},
                                                   {0.5, 0.5});
  const int T = schedule.levels();
  const auto levels = p.get<std::vector<int>>("levels", {1, std::max(1, T / 2), T});
  const double x0 = p.get<double>("x", 1.5);
  const int draws = p.get<int>("draws", 100000);
  const double moment_tol = p.get<double>("moment_tol", 1e-12);
  const double empirical_tol = p.get<double>("empirical_tol", 0.01);
  const double beta = p.get<double>("tempering_beta", 0.01);
  const int chains = p.get<int>("tempering_chains", 4000);
  const int steps = p.get<int>("tempering_steps", 1500);
  const double var_tol = p.get<double>("tempering_tol", 0.05);
  p.finish();
  if (draws < 2 || chains < 2 || steps < 1) throw ConfigError("draws, chains and steps too small");
  if (base.dim() != 1) throw ConfigError("appendix-equivalence uses a 1D base");

  const auto family = diffuse_gmm(base, schedule);
  const Vector x = Vector::Constant(1, x0);
  CsvTable t;
  t.header = {"level",         "beta",         "reverse_mean", "reverse_std",  "ula_mean",
              "ula_std",       "emp_rev_mean", "emp_rev_std",  "emp_ula_mean", "emp_ula_std"};
  double gap = 0.0, rel = 0.0;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const int lvl = levels[li];
    family->check_level(lvl);
    if (lvl < 1) throw ConfigError("levels must be >= 1");
    const auto rm = reverse_step_moments(*family, x, lvl, ReverseNoise::Beta, std::sqrt(2.0));
    SamplerConfig sc;
    sc.step_size = schedule.beta(lvl);
    sc.noise = NoiseConvention::ScaledEta;
    const EnergyPtr slice = family->slice(lvl);
    const auto um = ula_step_moments(*slice, x, sc);
    gap = std::max({gap, std::abs(rm.mean[0] - um.mean[0]), std::abs(rm.stddev - um.stddev)});

    // Empirical one-step moments from the same start, independent streams.
    std::vector<double> rev(draws), ula(draws);
    ChainState cr(x, mix_seed(seed, 100 + li), lvl);
    ChainState cu(x, mix_seed(seed, 200 + li));
    for (int i = 0; i < draws; ++i) {
      cr.x = x;
      reverse_step(*family, cr, ReverseNoise::Beta, std::sqrt(2.0));
      rev[i] = cr.x[0];
      cu.x = x;
      ula_step(*slice, cu, sc);
      ula[i] = cu.x[0];
    }
    const auto [mr, vr] = mean_variance(rev);
    const auto [mu, vu] = mean_variance(ula);
    const double sr = std::sqrt(vr), su = std::sqrt(vu);
    rel = std::max({rel, std::abs(mr - rm.mean[0]) / std::abs(rm.mean[0]),
                    std::abs(sr - rm.stddev) / rm.stddev,
                    std::abs(mu - um.mean[0]) / std::abs(um.mean[0]),
                    std::abs(su - um.stddev) / um.stddev});
    t.rows.push_back({double(lvl), schedule.beta(lvl), rm.mean[0], rm.stddev, um.mean[0],
                      um.stddev, mr, sr, mu, su});
  }
  write_csv(out.path("equivalence.csv"), t);

  // Tempering: the fixed-level kernel with sqrt(beta) noise on a unit
  // Gaussian level. Small-step analysis gives variance 1 / (2 - beta).
  const auto unit = diffuse_gmm(GmmEnergy::gaussian1d(0.0, 1.0), linear_schedule(1, beta, beta));
  std::vector<double> finals(chains);
  for (int c = 0; c < chains; ++c) {
    ChainState s(Vector::Zero(1), mix_seed(seed, 1000 + static_cast<std::uint64_t>(c)), 1);
    s.x[0] = s.rng.normal();
    for (int k = 0; k < steps; ++k) reverse_step(*unit, s, ReverseNoise::SqrtBeta, 1.0);
    finals[c] = s.x[0];
  }
  const double measured = mean_variance(finals).second;
  CsvTable tt;
  tt.header = {"beta", "chains", "steps", "measured_variance", "small_step_prediction",
               "stated_temperature"};
  tt.rows.push_back({beta, double(chains), double(steps), measured, 1.0 / (2.0 - beta),
                     1.0 / std::sqrt(2.0)});
  write_csv(out.path("tempering.csv"), tt);

  MetricsReport r;
  r.set("max_analytic_moment_gap", gap);
  r.set("max_empirical_rel_error", rel);
  r.set("tempering_variance", measured);
  r.set("tempering_small_step_prediction", 1.0 / (2.0 - beta));
  r.set("tempering_stated_temperature", 1.0 / std::sqrt(2.0));
  r.set("tempering_abs_error", std::abs(measured - 0.5));
  r.metadata["draws"] = std::to_string(draws);
  r.metadata["tempering_chains"] = std::to_string(chains);
  r.metadata["tempering_steps"] = std::to_string(steps);
  r.check("max_analytic_moment_gap", "<=", moment_tol);
  r.check("max_empirical_rel_error", "<", empirical_tol);
  r.check("tempering_abs_error", "<=", var_tol);
  return r;
}

// ---- discrete-product ------------------------------------------------------------

TabularDistribution random_table(const DiscreteSpace& space, double scale, Rng& rng) {
  std::vector<double> e(space.size());
  for (auto& v : e) v = scale * rng.normal();
  return TabularDistribution(space, std::move(e));
}

MetricsReport discrete_product(Params& p, std::uint64_t seed, Output& out) {
  const int instances = p.get<int>("instances", 20);
  const auto steps = p.get<std::size_t>("steps", 1'000'000);
  const int max_dims = p.get<int>("max_dims", 4);
  const int max_card = p.get<int>("max_cardinality", 4);
  const double scale = p.get<double>("energy_scale", 1.0);
  const double tv_threshold = p.get<double>("tv_threshold", 0.03);
  const double gibbs_tol = p.get<double>("gibbs_tol", 1e-10);
  p.finish();
  if (instances < 1 || max_dims < 1 || max_card < 2) throw ConfigError("bad instance settings");

  CsvTable t;
  t.header = {"instance", "states", "tv", "acceptance_rate", "gibbs_max_abs_error"};
  double worst_tv = 0.0, worst_gibbs = 0.0;
  for (int i = 0; i < instances; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    const int dims = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(max_dims)));
    std::vector<int> cards(dims);
    for (auto& k : cards) k = 2 + static_cast<int>(rng.index(static_cast<std::uint64_t>(max_card - 1)));
    const DiscreteSpace space(cards);
    if (space.size() > 4096) throw ConfigError("instances are limited to 4096 states");
    const auto p1 = random_table(space, scale, rng);
    const auto p2 = random_table(space, scale, rng);
    const auto target = enumerate_product(p1, p2);

    const auto chain = run_mh_compose(p1, p2, steps, mix_seed(seed, 10000 + i));
    const double tv = exact_tv(chain.empirical, target);

    const auto exact = target.probabilities();
    const auto pushed = gibbs_pushforward(target, exact);
    double g = 0.0;
    for (std::size_t s = 0; s < exact.size(); ++s) g = std::max(g, std::abs(pushed[s] - exact[s]));

    worst_tv = std::max(worst_tv, tv);
    worst_gibbs = std::max(worst_gibbs, g);
    t.rows.push_back({double(i), double(space.size()), tv, chain.acceptance_rate, g});
    if (i == 0) write_tabular_csv(out.path("instance0_product.csv"), target);
  }
  write_csv(out.path("discrete.csv"), t);

  MetricsReport r;
  r.set("max_tv", worst_tv);
  r.set("max_gibbs_error", worst_gibbs);
  r.metadata["instances"] = std::to_string(instances);
  r.metadata["steps"] = std::to_string(steps);
  r.check("max_tv", "<", tv_threshold);
  r.check("max_gibbs_error", "<=", gibbs_tol);
  return r;
}

// ---- noncompose-demo ---------------------------------------------------------------

MetricsReport noncompose_demo(Params& p, std::uint64_t seed, Output& out) {
  // Correlated p1 (mass on 00 and 11) against anti-correlated p2 (mass on 01
  // and 10), both asymmetric. States are ordered 00, 01, 10, 11.
  const auto w1 = p.get<std::vector<double>>("p1", {0.6, 0.1, 0.05, 0.25});
  const auto w2 = p.get<std::vector<double>>("p2", {0.1, 0.45, 0.35, 0.1});
  const int pairs = p.get<int>("pairs", 100);
  const double scale = p.get<double>("energy_scale", 1.0);
  const double witness_min = p.get<double>("witness_threshold", 0.01);
  const double pair_min = p.get<double>("pair_threshold", 1e-3);
  const double fraction = p.get<double>("min_fraction", 0.9);
  p.finish();
  const DiscreteSpace space({2, 2});
  if (w1.size() != 4 || w2.size() != 4) throw ConfigError("p1 and p2 need four probabilities");
  const auto witness = autoregressive_noncompose_demo(
      TabularDistribution::from_probabilities(space, w1),
      TabularDistribution::from_probabilities(space, w2));

  CsvTable t;
  t.header = {"pair", "discrepancy"};
  int above = 0;
  for (int i = 0; i < pairs; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    const auto a = random_table(space, scale, rng);
    const auto b = random_table(space, scale, rng);
    const double d = autoregressive_noncompose_demo(a, b).max_discrepancy;
    above += d > pair_min ? 1 : 0;
    t.rows.push_back({double(i), d});
  }
  write_csv(out.path("noncompose.csv"), t);
  write_json_file(out.path("witness.json"), {{"p1", w1},
                                             {"p2", w2},
                                             {"max_discrepancy", witness.max_discrepancy},
                                             {"position", witness.position},
                                             {"prefix", witness.prefix},
                                             {"value", witness.value},
                                             {"exact_conditional", witness.exact},
                                             {"naive_conditional", witness.naive}});

  MetricsReport r;
  r.set("witness_discrepancy", witness.max_discrepancy);
  r.set("witness_position", witness.position);
  r.set("pairs_above_threshold", above);
  r.metadata["pairs"] = std::to_string(pairs);
  r.check("witness_discrepancy", ">", witness_min);
  r.check("pairs_above_threshold", ">=", std::ceil(fraction * pairs));
  return r;
}

// ---- naive-caveat ----------------------------------------------------------------------

MetricsReport naive_caveat(Params& p, std::uint64_t seed, Output& out) {
  // Bimodal factor times a broad unimodal constraint.
  const GmmEnergy g1 = p.has("p1") ? gmm_from_json(p.raw("p1"))
                                   : GmmEnergy({0.5, 0.5},
                                               {Vector::Constant(1, -2.0), Vector::Constant(1, 2.0)},
                                               {0.25, 0.25});
  const GmmEnergy g2 = p.has("p2") ? gmm_from_json(p.raw("p2")) : GmmEnergy::gaussian1d(0.0, 1.0);
  const NoiseSchedule schedule = schedule_param(p, linear_schedule(50, 1e-4, 0.02));
  SamplerConfig sc = sampler_from_json(p.raw("sampler"));
  sc.seed = seed;
  const int n = p.get<int>("n", 10000);
  const int bins = p.get<int>("bins", 100);
  const auto range = range_param(p, "range", {-6.0, 6.0});
  const double min_ratio = p.get<double>("min_ratio", 2.0);
  p.finish();
  if (g1.dim() != g2.dim()) throw ConfigError("p1 and p2 differ in dimension");

  const FamilyPtr prod = compose_diffused(
      {{"p1", diffuse_gmm(g1, schedule)}, {"p2", diffuse_gmm(g2, schedule)}},
      CompositionSpec::product({CompositionSpec::leaf("p1"), CompositionSpec::leaf("p2")}));
  const GmmEnergy ref = product_of_gmms(g1, g2);
  HistogramSpec h;
  h.bins = bins;
  h.range = cube(g1.dim(), range.first, range.second);
  const CaveatReport c = naive_reverse_on_composed(
      *prod, sc, n, [&](const Vector& x) { return ref.density(x); }, h);

  write_samples_csv(out.path("samples_naive.csv"), c.naive);
  write_samples_csv(out.path("samples_annealed.csv"), c.annealed);
  MetricsReport r;
  r.set("kl_naive", c.kl_naive);
  r.set("kl_annealed", c.kl_annealed);
  r.set("kl_ratio", c.kl_ratio);
  r.metadata["samples"] = std::to_string(n);
  r.metadata["bins"] = std::to_string(bins);
  r.check("kl_ratio", ">=", min_ratio);
  return r;
}

// ---- plan-maze --------------------------------------------------------------------------

Vector vector_param(const json& j, const std::string& what, int size) {
  if (!j.is_array() || static_cast<int>(j.size()) != size) {
    throw ConfigError("'" + what + "' needs " + std::to_string(size) + " numbers");
  }
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), size);
}

json default_plan_problems() {
  return json::array({{{"name", "u-maze"},
                       {"maze", "u-maze"},
                       {"start", {1.5, 3.5, 0.0, 0.0}},
                       {"goal", {1.5, 1.5}},
                       {"runs", 100},
                       {"min_success", 0.8}},
                      {{"name", "empty"},
                       {"maze", {{"grid", {".....", ".....", ".....", ".....", "....."}}}},
                       {"start", {1.5, 1.5, 0.0, 0.0}},
                       {"goal", {3.5, 3.5}},
                       {"runs", 100},
                       {"min_success", 0.95}}});
}

MetricsReport plan_maze(Params& p, std::uint64_t seed, Output& out) {
  PlanConfig cfg;
  cfg.horizon = p.get<int>("horizon", cfg.horizon);
  cfg.particles = p.get<int>("particles", cfg.particles);
  cfg.steps = p.get<int>("steps", cfg.steps);
  cfg.temp_start = p.get<double>("temp_start", cfg.temp_start);
  cfg.temp_end = p.get<double>("temp_end", cfg.temp_end);
  cfg.success_radius = p.get<double>("success_radius", cfg.success_radius);
  cfg.max_waypoints = p.get<int>("max_waypoints", cfg.max_waypoints);
  cfg.sampler = sampler_from_json(p.raw("sampler"), cfg.sampler);
  const double stiffness = p.get<double>("stiffness", GoalFactor{}.stiffness);
  const json problems = p.raw("problems", default_plan_problems());
  p.finish();
  if (!problems.is_array() || problems.empty()) throw ConfigError("'problems' must be a list");

  MetricsReport r;
  for (std::size_t k = 0; k < problems.size(); ++k) {
    const json& pr = problems[k];
    const auto name = pr.value("name", "problem" + std::to_string(k));
    MazeEnv env;
    const json maze = pr.value("maze", json("u-maze"));
    env = maze.is_string() && maze.get<std::string>() == "u-maze" ? MazeEnv::u_maze()
                                                                   : maze_from_json(maze);
    GoalFactor f;
    f.start = vector_param(pr.value("start", json()), "start", 4);
    f.goal = vector_param(pr.value("goal", json()), "goal", 2);
    f.stiffness = stiffness;
    const int runs = pr.value("runs", 100);
    PlanConfig pc = cfg;
    pc.sampler.seed = mix_seed(seed, k);
    const PlanResult res = plan(env, f, pc, runs);

    std::vector<Trajectory> taus;
    double err = 0.0, pen = 0.0;
    for (const auto& run : res.runs) {
      taus.push_back(run.best);
      err += run.endpoint_error;
      if (run.success) pen = std::max(pen, run.penetration);
    }
    write_trajectories_csv(out.path("trajectories_" + name + ".csv"), taus);
    write_maze_svg(out.path("maze_" + name + ".svg"), env, taus, f.start, f.goal);
    r.set("success_rate_" + name, res.success_rate);
    r.set("mean_endpoint_error_" + name, err / runs);
    r.set("max_penetration_on_success_" + name, pen);
    r.metadata["runs_" + name] = std::to_string(runs);
    r.check("success_rate_" + name, ">=", pr.value("min_success", 0.8));
    r.check("max_penetration_on_success_" + name, "==", 0.0);
  }
  r.metadata["particles"] = std::to_string(cfg.particles);
  r.metadata["steps"] = std::to_string(cfg.steps);
  r.metadata["horizon"] = std::to_string(cfg.horizon);
  return r;
}

// ---- arrange-disks --------------------------------------------------------------------

json default_arrange_problems() {
  return json::array({{{"name", "three-disks"},
                       {"disks", 3},
                       {"radius", 1.0},
                       {"box", {0.0, 0.0, 10.0, 10.0}},
                       {"samples", 50},
                       {"op", ">="},
                       {"bound", 0.9}},
                      {{"name", "infeasible"},
                       {"disks", 4},
                       {"radius", 1.0},
                       {"box", {0.0, 0.0, 2.0, 2.0}},
                       {"samples", 50},
                       {"op", "=="},
                       {"bound", 0.0}}});
}

MetricsReport arrange_disks(Params& p, std::uint64_t seed, Output& out) {
  ArrangeConfig cfg;
  cfg.steps = p.get<int>("steps", cfg.steps);
  cfg.temp_start = p.get<double>("temp_start", cfg.temp_start);
  cfg.temp_end = p.get<double>("temp_end", cfg.temp_end);
  cfg.tolerance = p.get<double>("tolerance", cfg.tolerance);
  cfg.probe_restarts = p.get<int>("probe_restarts", cfg.probe_restarts);
  cfg.sampler = sampler_from_json(p.raw("sampler"), cfg.sampler);
  const json problems = p.raw("problems", default_arrange_problems());
  p.finish();
  if (!problems.is_array() || problems.empty()) throw ConfigError("'problems' must be a list");

  MetricsReport r;
  for (std::size_t k = 0; k < problems.size(); ++k) {
    const json& pr = problems[k];
    const auto name = pr.value("name", "problem" + std::to_string(k));
    const Vector b = vector_param(pr.value("box", json()), "box", 4);
    const Box2 box{b[0], b[1], b[2], b[3]};
    const ConstraintGraph g =
        ConstraintGraph::disks_in_box(pr.value("disks", 3), pr.value("radius", 1.0), box);
    ArrangeConfig ac = cfg;
    ac.sampler.seed = mix_seed(seed, k);
    const ArrangeResult res = arrange(g, ac, pr.value("samples", 50));
    write_samples_csv(out.path("arrangements_" + name + ".csv"), res.samples);
    const Box2 frame{box.x0 - 1.0, box.y0 - 1.0, box.x1 + 1.0, box.y1 + 1.0};
    write_disks_svg(out.path("disks_" + name + ".svg"), g, res.samples.row(0).transpose(), frame);
    r.set("satisfaction_rate_" + name, res.satisfaction_rate);
    r.set("probe_feasible_" + name, res.probe_feasible ? 1.0 : 0.0);
    r.check("satisfaction_rate_" + name, pr.value("op", std::string(">=")), pr.value("bound", 0.9));
  }
  r.metadata["steps"] = std::to_string(cfg.steps);
  return r;
}

using Runner = std::function<MetricsReport(Params&, std::uint64_t, Output&)>;

const std::map<std::string, Runner>& runners() {
  static const std::map<std::string, Runner> table{
      {"compose-2d", compose_2d},           {"fig4", fig4},
      {"appendix-equivalence", appendix_equivalence},
      {"discrete-product", discrete_product}, {"noncompose-demo", noncompose_demo},
      {"plan-maze", plan_maze},             {"arrange-disks", arrange_disks},
      {"naive-caveat", naive_caveat}};
  return table;
}

}  // namespace

MetricsReport run_experiment(const RunConfig& cfg) {
  const auto it = runners().find(cfg.experiment);
  if (it == runners().end()) {
    std::string names;
    for (const auto& n : experiment_names()) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError("unknown experiment '" + cfg.experiment + "'; valid names: " + names);
  }
  Params params(cfg.params, cfg.experiment);
  Output out(resolve_out_dir(cfg));
  const auto t0 = std::chrono::steady_clock::now();
  MetricsReport r;
  try {
    r = it->second(params, cfg.seed, out);
  } catch (const json::exception& e) {
    throw ConfigError(cfg.experiment + ": " + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.experiment = cfg.experiment;
  r.metadata["config_hash"] = cfg.hash();
  r.metadata["seed"] = std::to_string(cfg.seed);
  r.metadata["wall_clock_s"] = std::to_string(secs);
  r.metadata["files"] = out.list() + (out.list().empty() ? "" : ",") + "report.json";
  r.validate();
  json j = report_to_json(r);
  j["config"] = cfg.to_json();
  write_json_file(out.path("report.json"), j);
  return r;
}

}  // namespace compgen
