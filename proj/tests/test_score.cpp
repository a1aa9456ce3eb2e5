#include "compgen/error.hpp"
#include "compgen/fig4.hpp"
#include "compgen/score_net.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace compgen;

namespace {

// Net whose last layer ignores its input and returns the bias.
ScoreNet constant_net(const Vector& out, ScoreNet::OutputScale scale) {
  ScoreNet net(static_cast<int>(out.size()), {4}, 1, scale);
  net.layers().back().weight.setZero();
  net.layers().back().bias = out;
  return net;
}

Matrix random_points(int n, int dim, Rng& rng) {
  Matrix m(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d) m(i, d) = rng.normal();
  }
  return m;
}

GmmEnergy ring8() {
  std::vector<double> w(8, 1.0 / 8);
  std::vector<Vector> mu;
  for (int k = 0; k < 8; ++k) {
    const double a = 2 * std::numbers::pi * k / 8;
    mu.push_back((Vector(2) << 2 * std::cos(a), 2 * std::sin(a)).finished());
  }
  return GmmEnergy(w, mu, std::vector<double>(8, 0.02));
}

double mean_of(const Matrix& m, int c) { return m.col(c).mean(); }
double var_of(const Matrix& m, int c) {
  const double mu = m.col(c).mean();
  return (m.col(c).array() - mu).square().mean();
}

}  // namespace

TEST_CASE("denoising loss") {
  const auto s = linear_schedule(20, 1e-3, 0.1);
  Rng rng(1);
  const Matrix batch = random_points(64, 2, rng);

  SUBCASE("net that returns the injected noise has zero loss") {
    const Vector c = (Vector(2) << 0.4, -1.1).finished();
    for (auto scale : {ScoreNet::OutputScale::None, ScoreNet::OutputScale::NoiseStd}) {
      const ScoreNet net = constant_net(c, scale);
      DsmDraw draw = draw_dsm_noise(64, 2, s, rng);
      for (int i = 0; i < 64; ++i) {
        const double f = scale == ScoreNet::OutputScale::None
                             ? 1.0
                             : std::sqrt(1.0 - s.alpha_bar(draw.levels[i]));
        draw.eps.col(i) = f * c;
      }
      CHECK(dsm_loss(net, batch, s, draw) < 1e-28);
    }
  }
  SUBCASE("zero output gives the chi-square mean D") {
    const ScoreNet net = constant_net(Vector::Zero(2), ScoreNet::OutputScale::NoiseStd);
    const Matrix big = random_points(100000, 2, rng);
    CHECK(dsm_loss(net, big, s, rng) == doctest::Approx(2.0).epsilon(0.02));
  }
  SUBCASE("matches a direct evaluation through forward") {
    const ScoreNet net(2, {8, 8}, 3);
    const DsmDraw draw = draw_dsm_noise(64, 2, s, rng);
    double want = 0.0;
    for (int i = 0; i < 64; ++i) {
      const double ab = s.alpha_bar(draw.levels[i]);
      const Vector xt = std::sqrt(ab) * batch.row(i).transpose() + std::sqrt(1 - ab) * draw.eps.col(i);
      want += (draw.eps.col(i) - net.forward(xt, ab)).squaredNorm() / 64;
    }
    CHECK(dsm_loss(net, batch, s, draw) == doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("levels are drawn uniformly on 1..T") {
    const DsmDraw draw = draw_dsm_noise(20000, 2, s, rng);
    std::vector<int> counts(21, 0);
    for (int t : draw.levels) {
      REQUIRE(t >= 1);
      REQUIRE(t <= 20);
      ++counts[t];
    }
    for (int t = 1; t <= 20; ++t) CHECK(std::abs(counts[t] - 1000) < 150);
  }
}

TEST_CASE("loss decreases while training on the ring of eight gaussians") {
  const auto s = linear_schedule(50, 1e-4, 0.05);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(mix_seed(20, seed));
    const Dataset2D data{sample_gmm(ring8(), 2048, rng), "ring of 8"};
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.seed = seed;
    const auto r = train(ScoreNet(2, {16, 16}, seed), data, s, cfg);
    REQUIRE(r.curve.loss.size() == 50);
    CHECK(r.curve.loss.back() < r.curve.loss.front());
  }
}

TEST_CASE("backprop gradients") {
  const auto s = linear_schedule(20, 1e-3, 0.1);
  Rng rng(2);

  SUBCASE("every parameter matches central differences on a width-8 net") {
    for (auto scale : {ScoreNet::OutputScale::None, ScoreNet::OutputScale::NoiseStd}) {
      for (int trial = 0; trial < 3; ++trial) {
        ScoreNet net(2, {8, 8}, 30 + trial, scale);
        // Nonzero biases so their gradients are exercised away from zero.
        for (auto& l : net.layers()) {
          for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.3 * rng.normal();
        }
        const Matrix batch = random_points(32, 2, rng);
        const DsmDraw draw = draw_dsm_noise(32, 2, s, rng);
        const Vector g = backprop_grads(net, batch, s, draw).flat();
        const Vector p0 = net.flat();
        REQUIRE(g.size() == static_cast<Eigen::Index>(net.parameter_count()));
        const double h = 1e-4;
        int bad = 0;
        for (Eigen::Index k = 0; k < p0.size(); ++k) {
          Vector p = p0;
          p[k] += h;
          net.set_flat(p);
          const double up = dsm_loss(net, batch, s, draw);
          p[k] -= 2 * h;
          net.set_flat(p);
          const double down = dsm_loss(net, batch, s, draw);
          const double fd = (up - down) / (2 * h);
          // Relative error, with a floor at the central-difference truncation scale.
          if (std::abs(g[k] - fd) > 1e-3 * std::max(std::abs(fd), 1e-5)) ++bad;
        }
        net.set_flat(p0);
        CHECK(bad == 0);
      }
    }
  }
  SUBCASE("zero-weight output layer: bias gradient is the mean residual") {
    const Vector b = (Vector(2) << 0.2, -0.7).finished();
    const Matrix batch = random_points(50, 2, rng);
    const DsmDraw draw = draw_dsm_noise(50, 2, s, rng);
    for (auto scale : {ScoreNet::OutputScale::None, ScoreNet::OutputScale::NoiseStd}) {
      const ScoreNet net = constant_net(b, scale);
      // loss = mean_i |eps_i - f_i b|^2, so dL/db = -2 mean_i f_i (eps_i - f_i b).
      Vector want = Vector::Zero(2);
      for (int i = 0; i < 50; ++i) {
        const double f = scale == ScoreNet::OutputScale::None
                             ? 1.0
                             : std::sqrt(1.0 - s.alpha_bar(draw.levels[i]));
        want -= 2.0 * f * (draw.eps.col(i) - f * b) / 50;
      }
      const auto lg = backprop_grads(net, batch, s, draw);
      CHECK((lg.grads.back().bias - want).cwiseAbs().maxCoeff() < 1e-13);
      CHECK(lg.grads.back().weight.cwiseAbs().maxCoeff() > 0.0);
    }
  }
  SUBCASE("duplicated rows leave the mean gradient unchanged") {
    const ScoreNet net(2, {8, 8}, 4);
    const Matrix batch = random_points(16, 2, rng);
    const DsmDraw draw = draw_dsm_noise(16, 2, s, rng);
    Matrix twice(32, 2);
    twice << batch, batch;
    DsmDraw d2;
    d2.levels = draw.levels;
    d2.levels.insert(d2.levels.end(), draw.levels.begin(), draw.levels.end());
    d2.eps.resize(2, 32);
    d2.eps << draw.eps, draw.eps;
    const auto a = backprop_grads(net, batch, s, draw);
    const auto c = backprop_grads(net, twice, s, d2);
    CHECK(a.loss == doctest::Approx(c.loss).epsilon(1e-14));
    CHECK((a.flat() - c.flat()).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("mismatched draw is an input error") {
    const ScoreNet net(2, {8}, 5);
    const Matrix batch = random_points(8, 2, rng);
    CHECK_THROWS_AS(backprop_grads(net, batch, s, draw_dsm_noise(7, 2, s, rng)), InputError);
  }
}

TEST_CASE("training") {
  const auto s = linear_schedule(100, 1e-4, 0.05);
  const Vector mean = (Vector(2) << 1.0, -0.5).finished();
  const GmmEnergy target = GmmEnergy::gaussian(mean, 0.5);
  Rng rng(6);
  const Dataset2D data{sample_gmm(target, 10000, rng), "single gaussian"};

  SUBCASE("single gaussian end to end") {
    TrainConfig cfg;
    cfg.steps = 10000;
    cfg.batch_size = 512;
    cfg.seed = 7;
    const auto r = train(ScoreNet(2, {32, 32}, 8), data, s, cfg);
    const auto net = std::make_shared<const ScoreNet>(r.net);
    const auto fam = std::make_shared<ScoreNetFamily>(net, s);
    SamplerConfig sc;
    sc.seed = 9;
    // K = 5 leaves a visible lag behind the levels even on the exact family.
    sc.steps_per_level = 20;
    const Matrix x = annealed_compose_sample(*fam, sc, 4000).good_samples();
    REQUIRE(x.rows() == 4000);
    for (int d = 0; d < 2; ++d) {
      CHECK(std::abs(mean_of(x, d) - mean[d]) <= 0.1 * std::abs(mean[d]));
      CHECK(std::abs(var_of(x, d) - 0.5) <= 0.05);
    }

    SUBCASE("implied score at t = 1 tracks the analytic score") {
      const double ab = s.alpha_bar(1);
      const double var1 = ab * 0.5 + (1 - ab);
      std::vector<double> got, want;
      Vector g(2);
      for (double u = -1.0; u <= 3.0; u += 0.25) {
        for (double v = -2.5; v <= 1.5; v += 0.25) {
          const Vector x0 = (Vector(2) << u, v).finished();
          fam->level_gradient(x0, 1, g);
          const Vector a = (x0 - std::sqrt(ab) * mean) / var1;
          for (int d = 0; d < 2; ++d) {
            got.push_back(g[d]);
            want.push_back(a[d]);
          }
        }
      }
      const auto n = static_cast<double>(got.size());
      double mg = 0, mw = 0;
      for (std::size_t i = 0; i < got.size(); ++i) mg += got[i] / n, mw += want[i] / n;
      double sgw = 0, sgg = 0, sww = 0;
      for (std::size_t i = 0; i < got.size(); ++i) {
        sgw += (got[i] - mg) * (want[i] - mw);
        sgg += (got[i] - mg) * (got[i] - mg);
        sww += (want[i] - mw) * (want[i] - mw);
      }
      CHECK(sgw / std::sqrt(sgg * sww) > 0.95);
    }
  }
  SUBCASE("fixed seed reproduces the weights") {
    TrainConfig cfg;
    cfg.steps = 200;
    cfg.seed = 10;
    const ScoreNet init(2, {16, 16}, 11);
    const auto a = train(init, data, s, cfg);
    const auto b = train(init, data, s, cfg);
    CHECK(a.net == b.net);
    CHECK(a.curve.loss == b.curve.loss);
    CHECK_FALSE(a.net == init);
  }
  SUBCASE("zero epochs returns the initial net") {
    TrainConfig cfg;
    cfg.epochs = 0;
    const ScoreNet init(2, {16, 16}, 12);
    const auto r = train(init, data, s, cfg);
    CHECK(r.net == init);
    CHECK(r.curve.loss.empty());
  }
  SUBCASE("divergence is reported") {
    TrainConfig cfg;
    cfg.steps = 50;
    cfg.learning_rate = 1e300;
    CHECK_THROWS_AS(train(ScoreNet(2, {8}, 13), data, s, cfg), TrainingError);
  }
  SUBCASE("invalid configurations") {
    TrainConfig cfg;
    cfg.batch_size = 20000;
    CHECK_THROWS_AS(train(ScoreNet(2, {8}, 14), data, s, cfg), ConfigError);
    cfg.batch_size = 128;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(train(ScoreNet(2, {8}, 14), data, s, cfg), ConfigError);
    cfg.learning_rate = 1e-3;
    cfg.final_lr_fraction = 0.0;
    CHECK_THROWS_AS(train(ScoreNet(2, {8}, 14), data, s, cfg), ConfigError);
    CHECK_THROWS_AS(ScoreNet(2, {}, 1), ConfigError);
  }
}

TEST_CASE("learned family") {
  const auto s = linear_schedule(10, 1e-3, 0.1);
  const auto net = std::make_shared<const ScoreNet>(ScoreNet(2, {8}, 15));
  const ScoreNetFamily fam(net, s);
  const Vector x = (Vector(2) << 0.3, -0.2).finished();
  CHECK_FALSE(fam.has_energy());
  CHECK(fam.min_level() == 1);
  CHECK_THROWS_AS(fam.level_energy(x, 3), InputError);
  Vector g(2);
  fam.level_gradient(x, 3, g);
  CHECK((g - fam.eps(x, 3) / std::sqrt(1 - s.alpha_bar(3))).cwiseAbs().maxCoeff() < 1e-14);
  Matrix xs(2, 3), gs;
  xs << 0.3, 1.0, -2.0, -0.2, 0.5, 0.0;
  fam.level_gradient_batch(xs, 3, gs);
  fam.level_gradient(xs.col(2), 3, g);
  CHECK((gs.col(2) - g).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("fig4 plumbing") {
  Fig4Config cfg;
  cfg.n_grid = {250, 1000};
  cfg.seeds = 1;
  cfg.train.steps = 150;
  cfg.hidden = {16, 16};
  cfg.eval_samples = 1000;
  SUBCASE("product") {
    const auto r = fig4_experiment(cfg);
    REQUIRE(r.rows.size() == 2);
    for (const auto& row : r.rows) {
      CHECK(std::isfinite(row.kl_compositional));
      CHECK(std::isfinite(row.kl_monolithic));
      CHECK(row.kl_compositional >= 0.0);
    }
  }
  SUBCASE("mixture") {
    cfg.composition = Fig4Config::Composition::Mixture;
    cfg.n_grid = {250};
    const auto r = fig4_experiment(cfg);
    REQUIRE(r.rows.size() == 1);
    CHECK(std::isfinite(r.rows[0].kl_compositional));
  }
  SUBCASE("exact product draws") {
    Rng rng(16);
    const Matrix x = sample_composed(cfg, 20000, rng);
    const GmmEnergy t = fig4_target(cfg);
    const Vector m = t.mixture_mean(), v = t.mixture_variance();
    for (int d = 0; d < 2; ++d) {
      CHECK(std::abs(mean_of(x, d) - m[d]) < 0.03);
      CHECK(var_of(x, d) == doctest::Approx(v[d]).epsilon(0.05));
    }
  }
}

TEST_CASE("both branches saturate with plenty of data") {
  // One seed at N = 10^5 with enough optimizer steps to use the data.
  Fig4Config cfg;
  cfg.n_grid = {100000};
  cfg.seeds = 1;
  cfg.train.steps = 50000;
  cfg.single_sampler = Fig4Config::Sampler::Reverse;
  cfg.eval_samples = 10000;
  const auto r = fig4_experiment(cfg);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].kl_compositional < 0.05);
  CHECK(r.rows[0].kl_monolithic < 0.05);
}
