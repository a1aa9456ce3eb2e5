#include "compgen/discrete.hpp"
#include "compgen/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace compgen;

namespace {

TabularDistribution random_table(const DiscreteSpace& space, double scale, Rng& rng) {
  std::vector<double> e(space.size());
  for (auto& v : e) v = scale * rng.normal();
  return TabularDistribution(space, e);
}

// Independent bits with P(bit i = 1) = q_i.
TabularDistribution bits(const std::vector<double>& q) {
  const DiscreteSpace space(std::vector<int>(q.size(), 2));
  std::vector<double> probs(space.size());
  for (std::size_t s = 0; s < space.size(); ++s) {
    const State x = space.state(s);
    double p = 1.0;
    for (std::size_t i = 0; i < q.size(); ++i) p *= x[i] ? q[i] : 1 - q[i];
    probs[s] = p;
  }
  return TabularDistribution::from_probabilities(space, probs);
}

std::vector<double> gibbs_histogram(const TabularDistribution& target, int sweeps, std::uint64_t seed) {
  Rng rng(seed);
  State x(target.space().dims(), 0);
  std::vector<double> counts(target.space().size(), 0.0);
  for (int k = 0; k < sweeps; ++k) {
    gibbs_step(target, x, rng);
    counts[target.space().index(x)] += 1.0 / sweeps;
  }
  return counts;
}

}  // namespace

TEST_CASE("mixed radix indexing") {
  const DiscreteSpace space({3, 2, 4});
  CHECK(space.size() == 24);
  for (std::size_t i = 0; i < space.size(); ++i) CHECK(space.index(space.state(i)) == i);
  CHECK(space.index({0, 0, 1}) == 1);
  CHECK(space.index({1, 0, 0}) == 8);
  CHECK_THROWS_AS(space.check({3, 0, 0}), InputError);
  CHECK_THROWS_AS(space.check({0, 0}), InputError);
  CHECK_THROWS_AS(DiscreteSpace({2, 1}), InputError);
}

TEST_CASE("normalized views sum to one") {
  Rng rng(1);
  const auto t = random_table(DiscreteSpace({4, 4, 4}), 3.0, rng);
  double s = 0.0;
  for (double p : t.probabilities()) s += p;
  CHECK(std::abs(s - 1.0) < 1e-12);
}

TEST_CASE("enumerated products") {
  Rng rng(2);
  const DiscreteSpace space({3, 3});
  const auto p = random_table(space, 1.0, rng);
  SUBCASE("uniform factor is the identity") {
    const auto r = enumerate_product(p, TabularDistribution::uniform(space));
    CHECK(exact_tv(r, p) < 1e-14);
  }
  SUBCASE("two Bernoulli(0.8)") {
    const DiscreteSpace bit({2});
    const auto b = TabularDistribution::from_probabilities(bit, {0.2, 0.8});
    CHECK(enumerate_product(b, b).probabilities()[1] == doctest::Approx(0.9412).epsilon(1e-4));
    CHECK(enumerate_product(b, b).probabilities()[1] == doctest::Approx(0.64 / 0.68).epsilon(1e-12));
  }
  SUBCASE("self product squares the probabilities") {
    const auto sq = enumerate_product(p, p).probabilities();
    const auto q = p.probabilities();
    double z = 0.0;
    for (double v : q) z += v * v;
    for (std::size_t i = 0; i < q.size(); ++i) CHECK(sq[i] == doctest::Approx(q[i] * q[i] / z).epsilon(1e-12));
  }
  SUBCASE("space mismatch") {
    CHECK_THROWS_AS(enumerate_product(p, TabularDistribution::uniform(DiscreteSpace({3, 2}))), InputError);
  }
}

TEST_CASE("total variation") {
  const DiscreteSpace bit({2});
  const auto a = TabularDistribution::from_probabilities(bit, {0.1, 0.9});
  const auto b = TabularDistribution::from_probabilities(bit, {0.5, 0.5});
  CHECK(exact_tv(a, a) == 0.0);
  CHECK(exact_tv(a, b) == doctest::Approx(0.4).epsilon(1e-12));
  const auto left = TabularDistribution::from_probabilities(bit, {1.0, 0.0});
  const auto right = TabularDistribution::from_probabilities(bit, {0.0, 1.0});
  CHECK(exact_tv(left, right) == doctest::Approx(1.0));
  CHECK_THROWS_AS(exact_tv(a, TabularDistribution::uniform(DiscreteSpace({3}))), InputError);
}

TEST_CASE("Gibbs sweeps") {
  SUBCASE("factorized target: one sweep from any state is an exact draw") {
    const auto target = bits({0.2, 0.7, 0.5});
    std::vector<double> counts(target.space().size(), 0.0);
    Rng rng(3);
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
      State x{1, 0, 1};
      gibbs_step(target, x, rng);
      counts[target.space().index(x)] += 1.0 / n;
    }
    CHECK(exact_tv(counts, target) < 0.01);
  }
  SUBCASE("perfect correlation copies the other bit") {
    const auto target = TabularDistribution::from_probabilities(DiscreteSpace({2, 2}), {0.5, 0, 0, 0.5});
    Rng rng(4);
    for (int k = 0; k < 100; ++k) {
      State x{1, 1};
      gibbs_step(target, x, rng);
      CHECK(x == State{1, 1});
      State y{0, 0};
      gibbs_step(target, y, rng);
      CHECK(y == State{0, 0});
    }
  }
  SUBCASE("long run on three K=4 dimensions") {
    Rng rng(5);
    const auto target = random_table(DiscreteSpace({4, 4, 4}), 1.0, rng);
    CHECK(exact_tv(gibbs_histogram(target, 100000, 6), target) < 0.02);
  }
  SUBCASE("exact push-forward keeps the target invariant") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<int> cards(1 + trial % 4);
      for (auto& k : cards) k = 2 + static_cast<int>(rng.index(3));
      const auto target = random_table(DiscreteSpace(cards), 1.5, rng);
      const auto p = target.probabilities();
      const auto q = gibbs_pushforward(target, p);
      for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-10);
    }
  }
  SUBCASE("black-box energy matches the table") {
    Rng rng(8);
    const auto target = random_table(DiscreteSpace({3, 2, 3}), 1.0, rng);
    const StateEnergy e = [&](const State& s) { return target.energy(s); };
    Rng r1(9), r2(9);
    State a{0, 0, 0}, b{0, 0, 0};
    for (int k = 0; k < 1000; ++k) {
      gibbs_step(target, a, r1);
      gibbs_step(target.space(), e, b, r2);
      CHECK(a == b);
    }
  }
}

TEST_CASE("independence MH composition") {
  CHECK(mh_compose_acceptance(1.0, 0.5) == 1.0);
  CHECK(mh_compose_acceptance(1.0, 1.0) == 1.0);
  CHECK(mh_compose_acceptance(0.0, 0.7) == doctest::Approx(0.49659).epsilon(1e-5));
  CHECK(mh_compose_acceptance(0.0, 0.7) == doctest::Approx(std::exp(-0.7)).epsilon(1e-15));

  SUBCASE("12-bit space") {
    // Independent bits keep the effective support small enough for
    // 10^6 correlated draws to resolve TV below 0.02.
    std::vector<double> q1, q2;
    Rng rng(10);
    for (int i = 0; i < 12; ++i) {
      q1.push_back(0.05 + 0.1 * rng.uniform());
      q2.push_back(0.2 + 0.6 * rng.uniform());
    }
    const auto p1 = bits(q1), p2 = bits(q2);
    const auto chain = run_mh_compose(p1, p2, 1'000'000, 11);
    CHECK(p1.space().size() == 4096);
    CHECK(exact_tv(chain.empirical, enumerate_product(p1, p2)) < 0.02);
  }
  SUBCASE("random small instances") {
    for (int i = 0; i < 20; ++i) {
      Rng rng(mix_seed(12, i));
      std::vector<int> cards(1 + rng.index(4));
      for (auto& k : cards) k = 2 + static_cast<int>(rng.index(3));
      const DiscreteSpace space(cards);
      const auto p1 = random_table(space, 1.0, rng), p2 = random_table(space, 1.0, rng);
      const auto chain = run_mh_compose(p1, p2, 1'000'000, mix_seed(13, i));
      CHECK(exact_tv(chain.empirical, enumerate_product(p1, p2)) < 0.03);
    }
  }
}

TEST_CASE("autoregressive factorization round trip") {
  Rng rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> cards(1 + trial % 4);
    for (auto& k : cards) k = 2 + static_cast<int>(rng.index(3));
    const auto t = random_table(DiscreteSpace(cards), 1.5, rng);
    const AutoregressiveFactorization ar(t);
    const auto p = t.probabilities();
    for (std::size_t s = 0; s < p.size(); ++s) CHECK(std::abs(ar.joint(t.space().state(s)) - p[s]) < 1e-12);
    CHECK(exact_tv(ar.to_tabular(), t) < 1e-12);
    State prefix;
    for (int i = 0; i < t.space().dims(); ++i) {
      double sum = 0.0;
      for (double v : ar.conditional_row(prefix)) sum += v;
      CHECK(std::abs(sum - 1.0) < 1e-12);
      prefix.push_back(0);
    }
  }
}

TEST_CASE("autoregressive non-composability") {
  const DiscreteSpace two({2, 2});
  SUBCASE("fully factorized factors compose") {
    const auto p = bits({0.3, 0.8}), q = bits({0.6, 0.1});
    CHECK(autoregressive_noncompose_demo(p, q).max_discrepancy < 1e-14);
  }
  SUBCASE("uniform second factor composes") {
    const auto p = TabularDistribution::from_probabilities(two, {0.45, 0.05, 0.05, 0.45});
    CHECK(autoregressive_noncompose_demo(p, TabularDistribution::uniform(two)).max_discrepancy < 1e-14);
  }
  SUBCASE("correlated against anti-correlated") {
    const auto p1 = TabularDistribution::from_probabilities(two, {0.6, 0.1, 0.05, 0.25});
    const auto p2 = TabularDistribution::from_probabilities(two, {0.1, 0.45, 0.35, 0.1});
    const auto r = autoregressive_noncompose_demo(p1, p2);
    CHECK(r.max_discrepancy > 0.01);
    CHECK(r.position == 0);
    // Enumeration by hand: p_prod(x0 = 0) versus renormalized marginals.
    const double prod[4] = {0.06, 0.045, 0.0175, 0.025};
    const double exact0 = (prod[0] + prod[1]) / (prod[0] + prod[1] + prod[2] + prod[3]);
    const double naive0 = 0.7 * 0.55 / (0.7 * 0.55 + 0.3 * 0.45);
    CHECK(r.max_discrepancy == doctest::Approx(std::abs(exact0 - naive0)).epsilon(1e-12));
  }
  SUBCASE("generic random pairs do not compose") {
    int above = 0;
    for (int i = 0; i < 100; ++i) {
      Rng rng(mix_seed(15, i));
      above += autoregressive_noncompose_demo(random_table(two, 1.0, rng), random_table(two, 1.0, rng))
                           .max_discrepancy > 1e-3;
    }
    CHECK(above >= 90);
  }
  SUBCASE("oversized spaces are rejected") {
    const DiscreteSpace big(std::vector<int>(21, 2));
    CHECK(big.size() > DiscreteSpace::kOracleLimit);
    const auto u = TabularDistribution::uniform(big);
    CHECK_THROWS_AS(autoregressive_noncompose_demo(u, u), InputError);
  }
}
