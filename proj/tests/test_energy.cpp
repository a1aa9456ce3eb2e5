#include "compgen/diffused.hpp"
#include "compgen/error.hpp"
#include "compgen/gmm.hpp"
#include "compgen/schedule.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace compgen;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }

// Trapezoid-free midpoint quadrature of f on [lo, hi].
template <class F>
double integrate(F f, double lo, double hi, double h) {
  double s = 0.0;
  for (double x = lo + h / 2; x < hi; x += h) s += f(x);
  return s * h;
}

GmmEnergy random_gmm(Rng& rng, int dim, int k) {
  std::vector<double> w(k);
  std::vector<Vector> mu(k);
  std::vector<double> var(k);
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    w[i] = 0.2 + rng.uniform();
    total += w[i];
    mu[i] = Vector(dim);
    for (int d = 0; d < dim; ++d) mu[i][d] = 2.0 * rng.normal();
    var[i] = 0.3 + rng.uniform();
  }
  for (auto& x : w) x /= total;
  return GmmEnergy(w, mu, var);
}

}  // namespace

TEST_CASE("standard normal energy at zero is half log 2 pi") {
  const auto g = GmmEnergy::gaussian1d(0.0, 1.0);
  CHECK(g.energy(v1(0.0)) == doctest::Approx(0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
  CHECK(g.energy(v1(0.0)) == doctest::Approx(0.91894).epsilon(1e-5));
  CHECK(g.energy(v1(0.0)) == g.energy(v1(-0.0)));
}

TEST_CASE("two-mode mixture energy matches a quadrature-normalized density") {
  const GmmEnergy g({0.5, 0.5}, {v1(-1.0), v1(1.0)}, {1.0, 1.0});
  const auto f = [](double x) {
    return std::exp(-0.5 * (x + 1) * (x + 1)) + std::exp(-0.5 * (x - 1) * (x - 1));
  };
  const double z = integrate(f, -10.0, 10.0, 1e-3);
  CHECK(g.energy(v1(0.0)) == doctest::Approx(-std::log(f(0.0) / z)).epsilon(1e-8));
}

TEST_CASE("stable log-sum-exp keeps large energies finite") {
  const GmmEnergy g({0.5, 0.5}, {v1(-1.0), v1(1.0)}, {1.0, 1.0});
  const double e = g.energy(v1(60.0));
  CHECK(std::isfinite(e));
  CHECK(e > 700.0);
  Vector grad(1);
  g.gradient(v1(60.0), grad);
  CHECK(grad[0] == doctest::Approx(59.0).epsilon(1e-9));
}

TEST_CASE("gaussian gradient and symmetric mixture gradient") {
  CHECK(GmmEnergy::gaussian1d(0.0, 1.0).grad(v1(2.0))[0] == doctest::Approx(2.0));
  const GmmEnergy g({0.5, 0.5}, {v1(-1.5), v1(1.5)}, {0.7, 0.7});
  CHECK(std::abs(g.grad(v1(0.0))[0]) < 1e-15);
}

TEST_CASE("mixture gradients match central differences") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 1 + trial % 3;
    const GmmEnergy g = random_gmm(rng, dim, 1 + trial % 4);
    Vector x(dim);
    for (int d = 0; d < dim; ++d) x[d] = 1.5 * rng.normal();
    CHECK(gradient_check(g, x, 1e-5) < 1e-4);
  }
}

TEST_CASE("dimension mismatch is an input error") {
  const auto g = GmmEnergy::gaussian(Vector::Zero(2), 1.0);
  CHECK_THROWS_AS(g.energy(v1(0.0)), InputError);
  Vector grad;
  CHECK_THROWS_AS(g.gradient(Vector::Zero(3), grad), InputError);
  CHECK_THROWS_AS(GmmEnergy({0.5, 0.4}, {v1(0), v1(1)}, {1, 1}), InputError);
  CHECK_THROWS_AS(GmmEnergy({1.0}, {v1(0)}, {0.0}), InputError);
}

TEST_CASE("linear schedule arithmetic") {
  const auto one = linear_schedule(1, 0.1, 0.1);
  CHECK(one.levels() == 1);
  CHECK(one.beta(1) == doctest::Approx(0.1));
  CHECK(one.alpha_bar(1) == doctest::Approx(0.9));
  CHECK(one.alpha_bar(0) == 1.0);

  const auto two = linear_schedule(2, 0.1, 0.3);
  CHECK(two.beta(2) == doctest::Approx(0.3));
  CHECK(two.alpha_bar(2) == doctest::Approx(0.63).epsilon(1e-12));

  for (auto [T, b0, b1] : {std::tuple{50, 1e-4, 0.02}, std::tuple{1000, 1e-4, 0.02},
                           std::tuple{7, 0.3, 0.9}}) {
    const auto s = linear_schedule(T, b0, b1);
    for (int t = 1; t <= T; ++t) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
  }
  CHECK_THROWS_AS(linear_schedule(0, 0.1, 0.2), ConfigError);
  CHECK_THROWS_AS(linear_schedule(3, 0.3, 0.2), ConfigError);
  CHECK_THROWS_AS(linear_schedule(3, 0.0, 0.2), ConfigError);
  CHECK_THROWS_AS(linear_schedule(3, 0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(one.beta(2), InputError);
}

TEST_CASE("diffused mixture levels") {
  const GmmEnergy base({0.3, 0.7}, {v1(-1.0), v1(2.0)}, {0.5, 0.2});
  const auto fam = diffuse_gmm(base, linear_schedule(50, 1e-4, 0.02));

  SUBCASE("level zero is the base") {
    for (double x : {-2.0, 0.0, 0.7, 3.0}) {
      CHECK(fam->level_energy(v1(x), 0) == doctest::Approx(base.energy(v1(x))).epsilon(1e-14));
    }
  }
  SUBCASE("pure-noise limit approaches a standard normal") {
    const auto deep = diffuse_gmm(base, linear_schedule(1000, 1e-4, 0.02));
    const auto& top = deep->level(1000);
    // abar_1000 is about 4e-5, so the mean shrinks to sqrt(abar) * 1.1.
    const double ab = linear_schedule(1000, 1e-4, 0.02).alpha_bar(1000);
    CHECK(top.mixture_mean()[0] == doctest::Approx(std::sqrt(ab) * 1.1).epsilon(1e-12));
    CHECK(std::abs(top.mixture_mean()[0]) < 0.01);
    CHECK(top.mixture_variance()[0] == doctest::Approx(1.0).epsilon(1e-3));
  }
  SUBCASE("point mass at 2 at alpha_bar 0.25") {
    const auto lvl = diffuse_gmm_level(GmmEnergy::gaussian1d(2.0, 1e-14), 0.25);
    CHECK(lvl.means()[0][0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lvl.variances()[0] == doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("levels integrate to one") {
    for (int t = 0; t <= 50; ++t) {
      const double z = integrate([&](double x) { return std::exp(-fam->level_energy(v1(x), t)); },
                                 -12.0, 12.0, 1e-3);
      CHECK(z == doctest::Approx(1.0).epsilon(1e-3));
    }
  }
  SUBCASE("level gradients match central differences") {
    for (int t : {0, 1, 25, 50}) {
      for (double x : {-1.3, 0.2, 2.4}) CHECK(gradient_check(*fam->slice(t), v1(x), 1e-5) < 1e-4);
    }
  }
  CHECK_THROWS_AS(fam->level_energy(v1(0.0), 51), InputError);
}

TEST_CASE("level variance moves monotonically toward one") {
  // Level-t variance is abar (E sigma^2 + Var mu) + (1 - abar): it widens
  // with t when the base variance is at most 1 and shrinks toward 1 otherwise.
  Rng rng(5);
  const auto s = linear_schedule(100, 1e-4, 0.05);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> w{0.5, 0.5}, var{0.1 + 0.9 * rng.uniform(), 0.1 + 0.9 * rng.uniform()};
    const double spread = (trial % 2 == 0 ? 0.3 : 3.0) * rng.uniform();
    const GmmEnergy base(w, {v1(-spread), v1(spread)}, var);
    const auto fam = diffuse_gmm(base, s);
    const double v0 = base.mixture_variance()[0];
    for (int t = 1; t <= 100; ++t) {
      const double prev = fam->level(t - 1).mixture_variance()[0];
      const double cur = fam->level(t).mixture_variance()[0];
      if (v0 <= 1.0) {
        CHECK(cur >= prev - 1e-15);
      } else {
        CHECK(cur <= prev + 1e-15);
      }
    }
  }
}

TEST_CASE("denoiser view") {
  const auto s = linear_schedule(20, 1e-3, 0.1);
  SUBCASE("standard normal base gives zero at the origin") {
    const auto fam = diffuse_gmm(GmmEnergy::gaussian1d(0.0, 1.0), s);
    for (int t = 1; t <= 20; ++t) CHECK(fam->eps(v1(0.0), t).norm() == 0.0);
  }
  SUBCASE("near point mass at zero") {
    const auto fam = diffuse_gmm(GmmEnergy::gaussian1d(0.0, 1e-12), s);
    for (int t : {1, 10, 20}) {
      const double ab = s.alpha_bar(t);
      const Vector x = v1(0.8);
      const Vector fd = finite_difference_gradient(*fam->slice(t), x, 1e-5);
      CHECK(fam->eps(x, t)[0] == doctest::Approx(std::sqrt(1 - ab) * fd[0]).epsilon(1e-6));
      CHECK(fam->eps(x, t)[0] == doctest::Approx(0.8 / std::sqrt(1 - ab)).epsilon(1e-9));
    }
  }
  SUBCASE("round trip") {
    const Vector g = (Vector(3) << 0.3, -1.2, 7.5).finished();
    for (double ab : {0.999, 0.5, 1e-3}) {
      CHECK((score_from_eps(eps_from_score(g, ab), ab) - g).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("level range") {
    const auto fam = diffuse_gmm(GmmEnergy::gaussian1d(0.0, 1.0), s);
    CHECK_THROWS_AS(fam->eps(v1(0.0), 0), InputError);
    CHECK_THROWS_AS(fam->eps(v1(0.0), 21), InputError);
  }
}
