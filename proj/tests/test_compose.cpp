#include "compgen/compose.hpp"
#include "compgen/error.hpp"
#include "compgen/gmm.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace compgen;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }

EnergyPtr gauss(double mean, double var) {
  return std::make_shared<GmmEnergy>(GmmEnergy::gaussian1d(mean, var));
}

template <class F>
double integrate(F f, double lo, double hi, double h) {
  double s = 0.0;
  for (double x = lo + h / 2; x < hi; x += h) s += f(x);
  return s * h;
}

double normal_pdf(double x, double m, double var) {
  return std::exp(-0.5 * (x - m) * (x - m) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace

TEST_CASE("product of equal standard normals differs from N(0, 0.5) by a constant") {
  const auto p = product_energy({{gauss(0, 1), 1.0}, {gauss(0, 1), 1.0}});
  const auto half = GmmEnergy::gaussian1d(0.0, 0.5);
  const double c = p->energy(v1(0.0)) - half.energy(v1(0.0));
  for (double x : {-3.0, -0.4, 1.0, 2.5}) {
    CHECK(p->energy(v1(x)) - half.energy(v1(x)) == doctest::Approx(c).epsilon(1e-12));
  }
}

TEST_CASE("normalized product of 1D gaussians matches the precision-weighted closed form") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const double m1 = 2 * rng.normal(), m2 = 2 * rng.normal();
    const double s1 = 0.2 + rng.uniform(), s2 = 0.2 + rng.uniform();
    const auto p = product_energy({{gauss(m1, s1), 1.0}, {gauss(m2, s2), 1.0}});
    const double var = 1.0 / (1.0 / s1 + 1.0 / s2);
    const double mean = var * (m1 / s1 + m2 / s2);
    // Shift by the energy at the mean to keep the quadrature well scaled.
    const double e0 = p->energy(v1(mean));
    const auto f = [&](double x) { return std::exp(-(p->energy(v1(x)) - e0)); };
    const double z = integrate(f, mean - 15.0, mean + 15.0, 1e-4);
    for (double dx : {-1.0, -0.2, 0.0, 0.5, 1.3}) {
      const double x = mean + dx * std::sqrt(var);
      CHECK(std::abs(f(x) / z - normal_pdf(x, mean, var)) < 1e-10);
    }
  }
  // N(-1, 1) N(1, 1): mean 0, variance 1/2.
  const auto p = product_energy({{gauss(-1, 1), 1.0}, {gauss(1, 1), 1.0}});
  const GmmEnergy closed = product_of_gmms(GmmEnergy::gaussian1d(-1, 1), GmmEnergy::gaussian1d(1, 1));
  CHECK(closed.means()[0][0] == doctest::Approx(0.0));
  CHECK(closed.variances()[0] == doctest::Approx(0.5));
  CHECK(p->grad(v1(0.0))[0] == doctest::Approx(0.0));
}

TEST_CASE("single-term compositions are identities") {
  const auto g = gauss(0.3, 0.7);
  const auto p = product_energy({{g, 1.0}});
  const auto m = mixture_energy({{g, 1.0}});
  for (double x : {-2.0, 0.1, 1.7}) {
    CHECK(p->energy(v1(x)) == g->energy(v1(x)));
    CHECK(p->grad(v1(x))[0] == g->grad(v1(x))[0]);
    CHECK(m->energy(v1(x)) == doctest::Approx(g->energy(v1(x))).epsilon(1e-14));
    CHECK(m->grad(v1(x))[0] == doctest::Approx(g->grad(v1(x))[0]).epsilon(1e-14));
  }
}

TEST_CASE("weighted product gradient is the weighted sum of gradients") {
  const EnergyPtr a = gauss(-1, 0.5);
  const EnergyPtr b = std::make_shared<GmmEnergy>(GmmEnergy({0.4, 0.6}, {v1(-2), v1(1)}, {0.3, 0.8}));
  const auto p = product_energy({{a, 0.7}, {b, 2.5}});
  for (double x : {-1.5, 0.0, 0.9}) {
    const double want = 0.7 * a->grad(v1(x))[0] + 2.5 * b->grad(v1(x))[0];
    CHECK(std::abs(p->grad(v1(x))[0] - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    CHECK(gradient_check(*p, v1(x)) < 1e-4);
  }
}

TEST_CASE("mixture of identical components equals the component") {
  const auto g = gauss(0.5, 2.0);
  const auto m = mixture_energy({{g, 0.5}, {g, 0.5}});
  for (double x : {-4.0, 0.0, 3.0}) CHECK(m->energy(v1(x)) == doctest::Approx(g->energy(v1(x))).epsilon(1e-14));
}

TEST_CASE("two-mode mixture energy matches quadrature") {
  const auto m = mixture_energy({{gauss(-2, 1), 0.5}, {gauss(2, 1), 0.5}});
  const auto f = [](double x) {
    return std::exp(-0.5 * (x + 2) * (x + 2)) + std::exp(-0.5 * (x - 2) * (x - 2));
  };
  const double z = integrate(f, -12.0, 12.0, 1e-3);
  CHECK(m->energy(v1(0.0)) == doctest::Approx(-std::log(f(0.0) / z)).epsilon(1e-8));
  for (double x : {-3.0, -0.5, 0.0, 2.2}) CHECK(gradient_check(*m, v1(x)) < 1e-4);
}

TEST_CASE("mixture bounds") {
  // With probability weights 1/n the mixture lies in [min E, min E + log n].
  // Subtracting log n gives the weight-one log-sum-exp, which lies in
  // [min E - log n, min E].
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 4;
    std::vector<WeightedEnergy> terms;
    for (int i = 0; i < n; ++i) terms.push_back({gauss(3 * rng.normal(), 0.2 + rng.uniform()), 1.0 / n});
    const auto m = mixture_energy(terms);
    const Vector x = v1(4 * rng.normal());
    double lo = INFINITY;
    for (const auto& t : terms) lo = std::min(lo, t.energy->energy(x));
    const double e = m->energy(x);
    CHECK(e >= lo - 1e-12);
    CHECK(e <= lo + std::log(double(n)) + 1e-12);
    const double unweighted = e - std::log(double(n));
    CHECK(lo >= unweighted - 1e-12);
    CHECK(unweighted >= lo - std::log(double(n)) - 1e-12);
  }
}

TEST_CASE("negation") {
  const auto base = gauss(0, 1);
  SUBCASE("alpha zero leaves the base unchanged") {
    const auto n = negation_energy(base, gauss(1, 2), 0.0);
    for (double x : {-1.0, 0.0, 2.0}) CHECK(n->energy(v1(x)) == base->energy(v1(x)));
  }
  SUBCASE("precision algebra") {
    const auto n = negation_energy(base, gauss(0, 2), 0.5);
    // precision 1 - 0.5 * 0.5 = 0.75: the negation is N(0, 4/3) up to a constant.
    const auto ref = GmmEnergy::gaussian1d(0.0, 4.0 / 3.0);
    const double c = n->energy(v1(0.0)) - ref.energy(v1(0.0));
    for (double x : {-2.0, 0.7, 3.0}) {
      CHECK(n->energy(v1(x)) - ref.energy(v1(x)) == doctest::Approx(c).epsilon(1e-12));
    }
    CHECK(gradient_check(*n, v1(0.8)) < 1e-4);
  }
  SUBCASE("negative precision on analytic operands is a construction error") {
    CHECK_THROWS_AS(negation_energy(base, gauss(0, 1), 2.0), ConstructionError);
  }
  SUBCASE("negative exponent is rejected") {
    CHECK_THROWS_AS(negation_energy(base, gauss(0, 1), -0.1), InputError);
  }
}

TEST_CASE("malformed compositions") {
  CHECK_THROWS_AS(product_energy({}), InputError);
  CHECK_THROWS_AS(mixture_energy({}), InputError);
  const auto two = std::make_shared<GmmEnergy>(GmmEnergy::gaussian(Vector::Zero(2), 1.0));
  CHECK_THROWS_AS(product_energy({{gauss(0, 1), 1.0}, {two, 1.0}}), InputError);
  CHECK_THROWS_AS(product_energy({{gauss(0, 1), 0.0}}), InputError);
  CHECK_THROWS_AS(mixture_energy({{gauss(0, 1), 0.3}, {gauss(1, 1), 0.3}}), InputError);

  CHECK_THROWS_AS(CompositionSpec::mixture({CompositionSpec::leaf("a"), CompositionSpec::leaf("b")},
                                           {0.2, 0.2})
                      .validate(),
                  ConfigError);
  CHECK_THROWS_AS(build_energy(CompositionSpec::leaf("missing"), {{"a", gauss(0, 1)}}), ConfigError);
  CHECK_THROWS_AS(op_from_name("sum"), ConfigError);
}

TEST_CASE("spec trees evaluate like the direct operators") {
  const std::map<std::string, EnergyPtr> reg{{"a", gauss(-1, 1)}, {"b", gauss(1, 0.5)}, {"c", gauss(0, 3)}};
  const auto spec = CompositionSpec::product(
      {CompositionSpec::mixture({CompositionSpec::leaf("a"), CompositionSpec::leaf("b")}, {0.3, 0.7}),
       CompositionSpec::leaf("c")},
      {1.0, 0.5});
  const auto e = build_energy(spec, reg);
  const auto direct = product_energy(
      {{mixture_energy({{reg.at("a"), 0.3}, {reg.at("b"), 0.7}}), 1.0}, {reg.at("c"), 0.5}});
  for (double x : {-2.0, 0.0, 1.5}) CHECK(e->energy(v1(x)) == doctest::Approx(direct->energy(v1(x))).epsilon(1e-14));
  CHECK(spec.refs() == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("composition of diffused families") {
  const auto s = linear_schedule(30, 1e-3, 0.05);
  const FamilyPtr a = diffuse_gmm(GmmEnergy::gaussian1d(0, 1), s);
  const FamilyPtr b = diffuse_gmm(GmmEnergy::gaussian1d(0, 1), s);
  const auto spec = CompositionSpec::product({CompositionSpec::leaf("a"), CompositionSpec::leaf("b")});
  const auto prod = compose_diffused({{"a", a}, {"b", b}}, spec);

  SUBCASE("level zero equals the product of level-zero slices") {
    const auto direct = product_energy({{a->slice(0), 1.0}, {b->slice(0), 1.0}});
    for (double x : {-1.0, 0.3}) CHECK(prod->level_energy(v1(x), 0) == direct->energy(v1(x)));
  }
  SUBCASE("precision two at every level") {
    for (int t = 0; t <= 30; ++t) {
      for (double x : {-1.2, 0.5, 2.0}) CHECK(prod->level_grad(v1(x), t)[0] == doctest::Approx(2.0 * x).epsilon(1e-12));
    }
  }
  SUBCASE("uniform family is the identity") {
    const FamilyPtr u = std::make_shared<UniformFamily>(1, s);
    const auto same = compose_diffused({{"a", a}, {"u", u}},
                                       CompositionSpec::product({CompositionSpec::leaf("a"), CompositionSpec::leaf("u")}));
    for (int t : {0, 7, 30}) {
      for (double x : {-0.8, 1.9}) {
        CHECK(same->level_energy(v1(x), t) == a->level_energy(v1(x), t));
        CHECK(same->level_grad(v1(x), t)[0] == a->level_grad(v1(x), t)[0]);
      }
    }
  }
  SUBCASE("schedules must match") {
    const FamilyPtr c = diffuse_gmm(GmmEnergy::gaussian1d(0, 1), linear_schedule(30, 1e-3, 0.06));
    CHECK_THROWS_AS(compose_diffused({{"a", a}, {"b", c}}, spec), InputError);
  }
}
