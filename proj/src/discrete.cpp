#include "compgen/discrete.hpp"

#include "compgen/error.hpp"
#include "compgen/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace compgen {

DiscreteSpace::DiscreteSpace(std::vector<int> cardinalities)
    : cards_(std::move(cardinalities)) {
  if (cards_.empty()) throw InputError("discrete space needs at least one dimension");
  for (int k : cards_) {
    if (k < 2) throw InputError("every dimension needs cardinality >= 2");
    if (size_ > std::numeric_limits<std::size_t>::max() / k) {
      throw InputError("discrete space too large");
    }
    size_ *= static_cast<std::size_t>(k);
  }
}

void DiscreteSpace::check(const State& s) const {
  if (s.size() != cards_.size()) throw InputError("state has the wrong number of dimensions");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] < 0 || s[i] >= cards_[i]) throw InputError("state value out of range");
  }
}

std::size_t DiscreteSpace::index(const State& s) const {
  check(s);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < s.size(); ++i) idx = idx * cards_[i] + s[i];
  return idx;
}

State DiscreteSpace::state(std::size_t index) const {
  if (index >= size_) throw InputError("state index out of range");
  State s(cards_.size());
  for (int i = dims() - 1; i >= 0; --i) {
    s[i] = static_cast<int>(index % cards_[i]);
    index /= cards_[i];
  }
  return s;
}

TabularDistribution::TabularDistribution(DiscreteSpace space,
                                         std::vector<double> energies)
    : space_(std::move(space)), energies_(std::move(energies)) {
  if (energies_.size() != space_.size()) {
    throw InputError("energy table size " + std::to_string(energies_.size()) +
                     " does not match space size " + std::to_string(space_.size()));
  }
  bool any_finite = false;
  for (double e : energies_) {
    if (std::isnan(e) || e == -std::numeric_limits<double>::infinity()) {
      throw InputError("energy table entries must be finite or +inf");
    }
    any_finite = any_finite || std::isfinite(e);
  }
  if (!any_finite) throw InputError("energy table has no finite entry");
}

TabularDistribution TabularDistribution::from_probabilities(
    DiscreteSpace space, const std::vector<double>& probs) {
  std::vector<double> e(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] < 0.0) throw InputError("negative probability");
    e[i] = probs[i] > 0.0 ? -std::log(probs[i]) : std::numeric_limits<double>::infinity();
  }
  return TabularDistribution(std::move(space), std::move(e));
}

TabularDistribution TabularDistribution::uniform(DiscreteSpace space) {
  std::vector<double> e(space.size(), 0.0);
  return TabularDistribution(std::move(space), std::move(e));
}

std::vector<double> TabularDistribution::probabilities() const {
  std::vector<double> logp(energies_.size());
  for (std::size_t i = 0; i < logp.size(); ++i) logp[i] = -energies_[i];
  const double lse = log_sum_exp(logp.data(), logp.size());
  for (double& v : logp) v = std::exp(v - lse);
  return logp;
}

TableSampler::TableSampler(const TabularDistribution& dist) : space_(dist.space()) {
  const std::vector<double> p = dist.probabilities();
  cdf_.resize(p.size());
  std::partial_sum(p.begin(), p.end(), cdf_.begin());
  cdf_.back() = 1.0;
}

std::size_t TableSampler::sample_index(Rng& rng) const {
  const double u = rng.uniform();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return std::min(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
}

TabularDistribution enumerate_product(const TabularDistribution& p1,
                                      const TabularDistribution& p2) {
  if (!(p1.space() == p2.space())) throw InputError("product of tables on different spaces");
  std::vector<double> e(p1.energies().size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = p1.energy(i) + p2.energy(i);
  return TabularDistribution(p1.space(), std::move(e));
}

double exact_tv(const std::vector<double>& p, const TabularDistribution& q) {
  if (p.size() != q.space().size()) throw InputError("tv between different spaces");
  const std::vector<double> qp = q.probabilities();
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - qp[i]);
  return 0.5 * tv;
}

double exact_tv(const TabularDistribution& p, const TabularDistribution& q) {
  if (!(p.space() == q.space())) throw InputError("tv between different spaces");
  return exact_tv(p.probabilities(), q);
}

namespace {

// Samples from weights proportional to exp(-energies).
int sample_conditional(const std::vector<double>& energies, Rng& rng) {
  double lo = std::numeric_limits<double>::infinity();
  for (double e : energies) lo = std::min(lo, e);
  double total = 0.0;
  std::vector<double> w(energies.size());
  for (std::size_t v = 0; v < w.size(); ++v) total += (w[v] = std::exp(-(energies[v] - lo)));
  double u = rng.uniform() * total;
  for (std::size_t v = 0; v < w.size(); ++v) {
    if (u < w[v]) return static_cast<int>(v);
    u -= w[v];
  }
  // Rounding fallthrough: last value with positive weight.
  for (int v = static_cast<int>(w.size()) - 1; v >= 0; --v) {
    if (w[v] > 0.0) return v;
  }
  return 0;
}

void resample_dim(const DiscreteSpace& space, const StateEnergy& energy, State& x,
                  int i, Rng& rng) {
  std::vector<double> cond(space.cardinality(i));
  const int original = x[i];
  for (int v = 0; v < space.cardinality(i); ++v) {
    x[i] = v;
    cond[v] = energy(x);
  }
  x[i] = original;
  x[i] = sample_conditional(cond, rng);
}

}  // namespace

void gibbs_step(const DiscreteSpace& space, const StateEnergy& energy, State& x,
                Rng& rng, const GibbsOptions& options) {
  space.check(x);
  std::vector<int> order(space.dims());
  std::iota(order.begin(), order.end(), 0);
  if (options.random_scan) std::shuffle(order.begin(), order.end(), rng.engine());
  for (int i : order) resample_dim(space, energy, x, i, rng);
}

void gibbs_step(const TabularDistribution& target, State& x, Rng& rng,
                const GibbsOptions& options) {
  gibbs_step(target.space(), [&](const State& s) { return target.energy(s); }, x,
             rng, options);
}

std::vector<double> gibbs_pushforward(const TabularDistribution& target,
                                      const std::vector<double>& dist) {
  const DiscreteSpace& space = target.space();
  if (dist.size() != space.size()) throw InputError("push-forward of a mismatched vector");
  std::vector<double> cur = dist;
  std::vector<double> next(space.size());
  for (int i = 0; i < space.dims(); ++i) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t idx = 0; idx < space.size(); ++idx) {
      if (cur[idx] == 0.0) continue;
      State s = space.state(idx);
      std::vector<double> cond(space.cardinality(i));
      for (int v = 0; v < space.cardinality(i); ++v) {
        s[i] = v;
        cond[v] = -target.energy(s);
      }
      const double lse = log_sum_exp(cond.data(), cond.size());
      for (int v = 0; v < space.cardinality(i); ++v) {
        s[i] = v;
        next[space.index(s)] += cur[idx] * std::exp(cond[v] - lse);
      }
    }
    cur.swap(next);
  }
  return cur;
}

double mh_compose_acceptance(double e2_current, double e2_proposed) {
  const double ratio = std::exp(e2_current - e2_proposed);
  return std::clamp(ratio, 0.0, 1.0);
}

MhStep mh_compose_step(const ProposalSampler& proposal, const StateEnergy& e2,
                       State& x, Rng& rng) {
  State candidate = proposal(rng);
  const double a = mh_compose_acceptance(e2(x), e2(candidate));
  if (rng.uniform() < a) {
    x = std::move(candidate);
    return {true, a};
  }
  return {false, a};
}

MhChainResult run_mh_compose(const TabularDistribution& p1,
                             const TabularDistribution& p2, std::size_t steps,
                             std::uint64_t seed) {
  if (!(p1.space() == p2.space())) throw InputError("mh composition on different spaces");
  const TableSampler sampler(p1);
  Rng rng(seed);
  // Index-level loop: same rule as mh_compose_step without state vectors.
  std::size_t x = sampler.sample_index(rng);
  std::vector<double> counts(p1.space().size(), 0.0);
  std::size_t accepted = 0;
  for (std::size_t n = 0; n < steps; ++n) {
    const std::size_t y = sampler.sample_index(rng);
    const double a = mh_compose_acceptance(p2.energy(x), p2.energy(y));
    if (rng.uniform() < a) {
      x = y;
      ++accepted;
    }
    counts[x] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(steps);
  return {std::move(counts), steps ? static_cast<double>(accepted) / steps : 0.0};
}

AutoregressiveFactorization::AutoregressiveFactorization(
    const TabularDistribution& joint)
    : space_(joint.space()) {
  if (space_.size() > DiscreteSpace::kOracleLimit) {
    throw InputError("space too large for exact autoregressive factorization");
  }
  const std::vector<double> p = joint.probabilities();
  const int L = space_.dims();
  tables_.resize(L);
  // marginal over x_{0:i}: contiguous blocks of the joint.
  std::size_t prefixes = 1;
  for (int i = 0; i < L; ++i) {
    const int k = space_.cardinality(i);
    std::size_t block = 1;
    for (int j = i + 1; j < L; ++j) block *= space_.cardinality(j);
    tables_[i].assign(prefixes * k, 0.0);
    for (std::size_t pre = 0; pre < prefixes; ++pre) {
      double row_total = 0.0;
      for (int v = 0; v < k; ++v) {
        const std::size_t start = (pre * k + v) * block;
        double m = 0.0;
        for (std::size_t r = 0; r < block; ++r) m += p[start + r];
        tables_[i][pre * k + v] = m;
        row_total += m;
      }
      for (int v = 0; v < k; ++v) {
        // Unreachable prefixes get a uniform row.
        tables_[i][pre * k + v] =
            row_total > 0.0 ? tables_[i][pre * k + v] / row_total : 1.0 / k;
      }
    }
    prefixes *= k;
  }
}

std::size_t AutoregressiveFactorization::prefix_index(const State& prefix) const {
  if (prefix.size() >= static_cast<std::size_t>(space_.dims())) {
    throw InputError("prefix longer than the sequence");
  }
  std::size_t idx = 0;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (prefix[i] < 0 || prefix[i] >= space_.cardinality(static_cast<int>(i))) {
      throw InputError("prefix value out of range");
    }
    idx = idx * space_.cardinality(static_cast<int>(i)) + prefix[i];
  }
  return idx;
}

double AutoregressiveFactorization::conditional(const State& prefix, int value) const {
  const int i = static_cast<int>(prefix.size());
  const std::size_t pre = prefix_index(prefix);
  if (value < 0 || value >= space_.cardinality(i)) throw InputError("value out of range");
  return tables_[i][pre * space_.cardinality(i) + value];
}

std::vector<double> AutoregressiveFactorization::conditional_row(const State& prefix) const {
  const int i = static_cast<int>(prefix.size());
  const std::size_t pre = prefix_index(prefix);
  const int k = space_.cardinality(i);
  return {tables_[i].begin() + pre * k, tables_[i].begin() + (pre + 1) * k};
}

double AutoregressiveFactorization::joint(const State& s) const {
  space_.check(s);
  double p = 1.0;
  State prefix;
  for (int i = 0; i < space_.dims(); ++i) {
    p *= conditional(prefix, s[i]);
    prefix.push_back(s[i]);
  }
  return p;
}

TabularDistribution AutoregressiveFactorization::to_tabular() const {
  std::vector<double> p(space_.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = joint(space_.state(i));
  return TabularDistribution::from_probabilities(space_, p);
}

NonComposeReport autoregressive_noncompose_demo(const TabularDistribution& p1,
                                                const TabularDistribution& p2) {
  if (!(p1.space() == p2.space())) throw InputError("demo needs a shared space");
  const DiscreteSpace& space = p1.space();
  if (space.size() > DiscreteSpace::kOracleLimit) {
    throw InputError("space too large for enumeration (" + std::to_string(space.size()) +
                     " states > " + std::to_string(DiscreteSpace::kOracleLimit) + ")");
  }
  const AutoregressiveFactorization f1(p1), f2(p2);
  const AutoregressiveFactorization exact(enumerate_product(p1, p2));

  NonComposeReport report;
  const int L = space.dims();
  std::size_t prefixes = 1;
  for (int i = 0; i < L; ++i) {
    const int k = space.cardinality(i);
    for (std::size_t pre = 0; pre < prefixes; ++pre) {
      State prefix(i);
      std::size_t rest = pre;
      for (int j = i - 1; j >= 0; --j) {
        prefix[j] = static_cast<int>(rest % space.cardinality(j));
        rest /= space.cardinality(j);
      }
      const std::vector<double> a = f1.conditional_row(prefix);
      const std::vector<double> b = f2.conditional_row(prefix);
      const std::vector<double> e = exact.conditional_row(prefix);
      double z = 0.0;
      for (int v = 0; v < k; ++v) z += a[v] * b[v];
      for (int v = 0; v < k; ++v) {
        const double naive = z > 0.0 ? a[v] * b[v] / z : 1.0 / k;
        const double gap = std::abs(naive - e[v]);
        if (gap > report.max_discrepancy || report.position < 0) {
          report.max_discrepancy = gap;
          report.position = i;
          report.prefix = prefix;
          report.value = v;
          report.exact = e[v];
          report.naive = naive;
        }
      }
    }
    prefixes *= k;
  }
  return report;
}

}  // namespace compgen
