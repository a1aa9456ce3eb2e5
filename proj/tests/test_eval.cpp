#include "compgen/experiments.hpp"
#include "compgen/error.hpp"
#include "compgen/fig4.hpp"
#include "compgen/io.hpp"
#include "compgen/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace compgen;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("compgen_test_eval_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Matrix normal_samples(int n, double sd, Rng& rng) {
  Matrix m(n, 1);
  for (int i = 0; i < n; ++i) m(i, 0) = sd * rng.normal();
  return m;
}

double npdf(double x, double var) {
  return std::exp(-0.5 * x * x / var) / std::sqrt(2 * std::numbers::pi * var);
}

// With COMPGEN_OUT_DIR set, outputs would go elsewhere.
struct NoOutOverride {
  NoOutOverride() { unsetenv("COMPGEN_OUT_DIR"); }
};

}  // namespace

TEST_CASE("histogram KL") {
  Rng rng(1);
  const std::vector<std::pair<double, double>> r{{-5.0, 5.0}};
  const auto std_normal = [](const Vector& x) { return npdf(x[0], 1.0); };
  const auto narrow = [](const Vector& x) { return npdf(x[0], 0.5); };
  const Matrix s = normal_samples(100000, 1.0, rng);
  CHECK(histogram_kl(s, std_normal, 100, r) < 0.01);
  CHECK(histogram_kl(s, narrow, 100, r) > 0.1);
  CHECK(histogram_kl(s, narrow, 1, r) == doctest::Approx(0.0).scale(1e-12));
  CHECK_THROWS_AS(histogram_kl(normal_samples(10, 1.0, rng), std_normal, 10, r), InputError);
  // Reference with no mass where samples land.
  const auto right_only = [](const Vector& x) { return x[0] > 0 ? 1.0 : 0.0; };
  CHECK_THROWS_AS(histogram_kl(s, right_only, 10, r), InputError);
}

TEST_CASE("RBF MMD") {
  Rng rng(2);
  const Matrix a = normal_samples(1000, 1.0, rng);
  Matrix b = normal_samples(1000, 1.0, rng);
  CHECK(std::abs(mmd_rbf_biased(a, a)) < 1e-12);
  // Unbiased estimate of a set against itself: a degenerate value of order 1/n.
  const double self = mmd_rbf(a, a, 1.0);
  const double n = 1000;
  double off = 0.0;
  for (int i = 0; i < 1000; ++i) {
    for (int j = 0; j < 1000; ++j) {
      const double d = a(i, 0) - a(j, 0);
      off += i == j ? 0.0 : std::exp(-0.5 * d * d);
    }
  }
  // Kxx and Kyy drop the diagonal, Kxy keeps it: 2 off/(n(n-1)) - 2 (off + n)/n^2.
  const double want = 2 * off / (n * (n - 1)) - 2 * (off + n) / (n * n);
  CHECK(std::abs(self - want) < 1e-12);
  b.array() += 5.0;
  CHECK(mmd_rbf(a, b) > 0.5);
  CHECK(mmd_rbf(a, b) == mmd_rbf(b, a));
  CHECK(mmd_rbf(a, b, 0.7) == mmd_rbf(b, a, 0.7));
  CHECK_THROWS_AS(mmd_rbf(a, Matrix::Zero(1, 1)), InputError);
}

TEST_CASE("effective sample size") {
  Rng rng(3);
  const int n = 10000;
  std::vector<double> white(n), ar(n);
  for (auto& v : white) v = rng.normal();
  CHECK(std::abs(ess(white).ess - n) <= 0.1 * n);

  // AR(1) with rho 0.9 has ESS factor (1 - rho) / (1 + rho); average over
  // seeds to take the estimator's own noise out.
  double mean_ess = 0.0;
  for (int seed = 0; seed < 10; ++seed) {
    Rng r(mix_seed(4, seed));
    double x = r.normal() / std::sqrt(1 - 0.81);
    for (auto& v : ar) {
      x = 0.9 * x + r.normal();
      v = x;
    }
    mean_ess += ess(ar).ess / 10;
  }
  CHECK(mean_ess == doctest::Approx(n * 0.1 / 1.9).epsilon(0.2));

  const auto c = ess(std::vector<double>(500, 2.0));
  CHECK(c.constant);
  CHECK(c.ess == 500.0);
  CHECK_THROWS_AS(ess(std::vector<double>(50, 1.0)), InputError);
}

TEST_CASE("JSON round trips") {
  SUBCASE("gmm") {
    const GmmEnergy g({0.3, 0.7}, {(Vector(2) << 1, -2).finished(), (Vector(2) << 0.5, 0.1).finished()},
                      {0.4, 1.3});
    const GmmEnergy back = gmm_from_json(json::parse(gmm_to_json(g).dump()));
    const Vector x = (Vector(2) << 0.2, 0.9).finished();
    CHECK(back.energy(x) == g.energy(x));
    CHECK(gmm_from_json(json::parse(R"({"weights":[1],"means":[2.0],"variances":[0.5]})")).means()[0][0] == 2.0);
    CHECK_THROWS_AS(gmm_from_json(json::parse(R"({"weights":[1]})")), ConfigError);
  }
  SUBCASE("schedule") {
    const auto s = linear_schedule(37, 2e-4, 0.03);
    const auto b = schedule_from_json(schedule_to_json(s));
    CHECK(b.levels() == 37);
    for (int t = 0; t <= 37; ++t) CHECK(b.alpha_bar(t) == s.alpha_bar(t));
  }
  SUBCASE("composition spec") {
    const auto spec = CompositionSpec::product(
        {CompositionSpec::mixture({CompositionSpec::leaf("a"), CompositionSpec::leaf("b")}, {0.25, 0.75}),
         CompositionSpec::negation(CompositionSpec::leaf("c"), CompositionSpec::leaf("d"), 0.5)},
        {1.0, 2.0});
    const json j = spec_to_json(spec);
    CHECK(spec_to_json(spec_from_json(j)) == j);
    CHECK_THROWS_AS(spec_from_json(json::parse(R"({"op":"sum"})")), ConfigError);
  }
  SUBCASE("score net") {
    const ScoreNet net(2, {5, 3}, 7, ScoreNet::OutputScale::NoiseStd);
    const ScoreNet back = score_net_from_json(json::parse(score_net_to_json(net).dump()));
    CHECK(back == net);
    const ScoreNet raw(2, {4}, 8, ScoreNet::OutputScale::None);
    CHECK(score_net_from_json(score_net_to_json(raw)).output_scale() == ScoreNet::OutputScale::None);
  }
  SUBCASE("maze") {
    MazeEnv env = MazeEnv::u_maze();
    env.wall_weight = 37.5;
    const MazeEnv back = maze_from_json(maze_to_json(env));
    CHECK(back.grid() == env.grid());
    CHECK(back.wall_weight == 37.5);
    CHECK(back.sdf(1.3, 2.2) == env.sdf(1.3, 2.2));
  }
  SUBCASE("sampler") {
    SamplerConfig c;
    c.kernel = Kernel::HMC;
    c.noise = NoiseConvention::ScaledEta;
    c.step_size = 0.123;
    c.leapfrog_steps = 7;
    const auto b = sampler_from_json(sampler_to_json(c));
    CHECK(b.kernel == Kernel::HMC);
    CHECK(b.noise == NoiseConvention::ScaledEta);
    CHECK(b.step_size == 0.123);
    CHECK(b.leapfrog_steps == 7);
    CHECK_THROWS_AS(sampler_from_json(json::parse(R"({"kernel":"gibbs"})")), ConfigError);
    CHECK_THROWS_AS(sampler_from_json(json::parse(R"({"steps_per_level":0})")), ConfigError);
  }
  SUBCASE("report") {
    MetricsReport r;
    r.experiment = "x";
    r.set("a", 0.1);
    r.set("b", 3.0);
    r.check("a", "<", 0.2);
    r.check("b", ">=", 4.0);
    r.metadata["seed"] = "5";
    const auto back = report_from_json(json::parse(report_to_json(r).dump()));
    CHECK(back.metrics == r.metrics);
    CHECK(back.metadata == r.metadata);
    REQUIRE(back.thresholds.size() == 2);
    CHECK(back.thresholds[0].passed);
    CHECK_FALSE(back.thresholds[1].passed);
    CHECK_FALSE(back.all_passed());
    r.set("c", NAN);
    CHECK_THROWS_AS(r.validate(), InputError);
  }
}

TEST_CASE("CSV round trips") {
  const fs::path dir = scratch("csv");
  SUBCASE("doubles survive formatting") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
      const double v = std::ldexp(rng.normal(), static_cast<int>(rng.index(200)) - 100);
      CHECK(std::stod(format_double(v)) == v);
    }
  }
  SUBCASE("samples") {
    Rng rng(6);
    Matrix m(50, 3);
    for (int i = 0; i < 50; ++i) {
      for (int d = 0; d < 3; ++d) m(i, d) = rng.normal();
    }
    write_samples_csv((dir / "s.csv").string(), m);
    CHECK(read_samples_csv((dir / "s.csv").string()) == m);
    const CsvTable t = read_csv((dir / "s.csv").string());
    CHECK(t.header == std::vector<std::string>{"chain", "x_0", "x_1", "x_2"});
  }
  SUBCASE("tabular distribution") {
    const DiscreteSpace space({3, 2});
    const auto p = TabularDistribution::from_probabilities(space, {0.1, 0.0, 0.3, 0.2, 0.25, 0.15});
    write_tabular_csv((dir / "t.csv").string(), p);
    const auto back = read_tabular_csv((dir / "t.csv").string(), space);
    CHECK(back.probabilities() == p.probabilities());
  }
  SUBCASE("trajectories") {
    const MazeEnv env = MazeEnv::empty(4, 4);
    const auto a = polyline_trajectory(env, {Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(3.5, 2.5)}, 9);
    const auto b = polyline_trajectory(env, {Eigen::Vector2d(1.5, 0.5), Eigen::Vector2d(1.5, 3.5)}, 9);
    write_trajectories_csv((dir / "tr.csv").string(), {a, b});
    const auto back = read_trajectories_csv((dir / "tr.csv").string());
    REQUIRE(back.size() == 2);
    CHECK(back[0].states == a.states);
    CHECK(back[1].actions == b.actions);
  }
  SUBCASE("training curve") {
    TrainingCurve c{{0, 1, 2}, {1.5, 1.25, 0.875}};
    write_curve_csv((dir / "c.csv").string(), c);
    const auto back = read_curve_csv((dir / "c.csv").string());
    CHECK(back.epoch == c.epoch);
    CHECK(back.loss == c.loss);
  }
  SUBCASE("missing file") { CHECK_THROWS(read_csv((dir / "nope.csv").string())); }
}

TEST_CASE("run configs") {
  const json j = json::parse(R"({"experiment": "compose-2d", "seed": 4, "params": {"n": 10}})");
  const RunConfig c = RunConfig::from_json(j);
  CHECK(c.experiment == "compose-2d");
  CHECK(c.seed == 4);
  CHECK(RunConfig::from_json(c.to_json()).hash() == c.hash());
  RunConfig d = c;
  d.seed = 5;
  CHECK(d.hash() != c.hash());
  CHECK(c.hash().size() == 16);
  CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"experiment": "compose-2d"})")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"experiment": "x", "seed": 1, "extra": 2})")),
                  ConfigError);

  SUBCASE("output directory override") {
    RunConfig o = c;
    o.out_dir = "here";
    unsetenv("COMPGEN_OUT_DIR");
    CHECK(resolve_out_dir(o) == "here");
    setenv("COMPGEN_OUT_DIR", "/tmp/elsewhere", 1);
    CHECK(resolve_out_dir(o) == "/tmp/elsewhere");
    unsetenv("COMPGEN_OUT_DIR");
  }
}

TEST_CASE("run_experiment") {
  NoOutOverride guard;
  SUBCASE("unknown experiment lists the valid names") {
    RunConfig c;
    c.experiment = "nope";
    c.out_dir = scratch("unknown").string();
    try {
      run_experiment(c);
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      for (const auto& n : experiment_names()) CHECK(msg.find(n) != std::string::npos);
    }
  }
  SUBCASE("unknown parameters are rejected") {
    RunConfig c;
    c.experiment = "compose-2d";
    c.params = json::parse(R"({"bogus": 1})");
    c.out_dir = scratch("bogus").string();
    CHECK_THROWS_AS(run_experiment(c), ConfigError);
  }
  SUBCASE("compose-2d product of gaussians") {
    RunConfig c;
    c.experiment = "compose-2d";
    c.seed = 3;
    c.params = json::parse(R"({"n": 10000})");
    c.out_dir = scratch("compose_a").string();
    const auto a = run_experiment(c);
    CHECK(a.metrics.at("histogram_kl") < 0.02);
    CHECK(a.all_passed());
    CHECK(a.metadata.at("config_hash") == c.hash());

    RunConfig c2 = c;
    c2.out_dir = scratch("compose_b").string();
    const auto b = run_experiment(c2);
    CHECK(a.metrics == b.metrics);
    CHECK(slurp(fs::path(c.out_dir) / "samples.csv") == slurp(fs::path(c2.out_dir) / "samples.csv"));
    CHECK(fs::exists(fs::path(c.out_dir) / "scatter.svg"));

    // Emitted files read back with the toolkit's own readers.
    CHECK(read_samples_csv((fs::path(c.out_dir) / "samples.csv").string()).rows() == 10000);
    const json rep = read_json_file((fs::path(c.out_dir) / "report.json").string());
    CHECK(report_from_json(rep).metrics == a.metrics);
    CHECK(RunConfig::from_json(rep.at("config")).hash() == c.hash());
  }
  SUBCASE("noncompose demo writes re-readable tables") {
    RunConfig c;
    c.experiment = "noncompose-demo";
    c.seed = 1;
    c.out_dir = scratch("noncompose").string();
    const auto r = run_experiment(c);
    CHECK(r.all_passed());
    const auto t = read_csv((fs::path(c.out_dir) / "noncompose.csv").string());
    CHECK(t.rows.size() == 100);
    const auto again = run_experiment(c);
    CHECK(again.metrics == r.metrics);
  }
}
