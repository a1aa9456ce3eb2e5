#pragma once

#include "compgen/rng.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace compgen {

using State = std::vector<int>;

/// Product space of L categorical dimensions with K_i values each. States are
/// indexed in mixed radix with dimension 0 most significant, so states that
/// share a prefix are contiguous.
class DiscreteSpace {
 public:
  explicit DiscreteSpace(std::vector<int> cardinalities);

  int dims() const { return static_cast<int>(cards_.size()); }
  int cardinality(int i) const { return cards_[i]; }
  const std::vector<int>& cardinalities() const { return cards_; }
  std::size_t size() const { return size_; }

  std::size_t index(const State& s) const;
  State state(std::size_t index) const;
  /// Throws InputError if s is not a state of this space.
  void check(const State& s) const;

  bool operator==(const DiscreteSpace& o) const { return cards_ == o.cards_; }

  /// Largest space the exact-enumeration operations accept.
  static constexpr std::size_t kOracleLimit = 1'000'000;

 private:
  std::vector<int> cards_;
  std::size_t size_ = 1;
};

/// Exact distribution on a finite space, stored as an energy table.
class TabularDistribution {
 public:
  TabularDistribution(DiscreteSpace space, std::vector<double> energies);

  /// From (not necessarily normalized) probabilities; zero maps to +inf energy.
  static TabularDistribution from_probabilities(DiscreteSpace space,
                                                const std::vector<double>& probs);
  static TabularDistribution uniform(DiscreteSpace space);

  const DiscreteSpace& space() const { return space_; }
  const std::vector<double>& energies() const { return energies_; }
  double energy(std::size_t index) const { return energies_[index]; }
  double energy(const State& s) const { return energies_[space_.index(s)]; }

  /// Normalized probabilities exp(-E) / Z (sum to 1 within 1e-12).
  std::vector<double> probabilities() const;

 private:
  DiscreteSpace space_;
  std::vector<double> energies_;
};

/// Inverse-CDF sampler over a normalized table.
class TableSampler {
 public:
  explicit TableSampler(const TabularDistribution& dist);
  std::size_t sample_index(Rng& rng) const;
  State sample(Rng& rng) const { return space_.state(sample_index(rng)); }

 private:
  DiscreteSpace space_;
  std::vector<double> cdf_;
};

/// Energy table E_1 + E_2 on a shared space: the exact product distribution.
TabularDistribution enumerate_product(const TabularDistribution& p1,
                                      const TabularDistribution& p2);

/// 1/2 sum |p - q| of the normalized views.
double exact_tv(const TabularDistribution& p, const TabularDistribution& q);
/// TV between a probability vector and the normalized view of q.
double exact_tv(const std::vector<double>& p, const TabularDistribution& q);

using StateEnergy = std::function<double(const State&)>;

struct GibbsOptions {
  bool random_scan = false;  ///< random dimension order each sweep
};

/// One Gibbs sweep: every dimension (in order 0..L-1 unless random scan) is
/// resampled from its exact conditional given the others.
void gibbs_step(const DiscreteSpace& space, const StateEnergy& energy, State& x,
                Rng& rng, const GibbsOptions& options = {});
void gibbs_step(const TabularDistribution& target, State& x, Rng& rng,
                const GibbsOptions& options = {});

/// Exact push-forward of a distribution (probability vector over the space)
/// through one fixed-order Gibbs sweep for `target`.
std::vector<double> gibbs_pushforward(const TabularDistribution& target,
                                      const std::vector<double>& dist);

/// Clipped Metropolis acceptance for an independence proposal from
/// exp(-E_1): a = clip(exp(E_2(x_t) - E_2(x')), 0, 1).
double mh_compose_acceptance(double e2_current, double e2_proposed);

struct MhStep {
  bool accepted = false;
  double accept_prob = 0.0;
};

using ProposalSampler = std::function<State(Rng&)>;

/// Proposes x' ~ exp(-E_1) (independent of x) and accepts with
/// mh_compose_acceptance. The chain's stationary law is exp(-(E_1 + E_2)) / Z
/// when the proposal is exact; for state-dependent proposals this rule is
/// only approximate.
MhStep mh_compose_step(const ProposalSampler& proposal, const StateEnergy& e2,
                       State& x, Rng& rng);

struct MhChainResult {
  std::vector<double> empirical;  // visit frequencies per state index
  double acceptance_rate = 0.0;
};

/// Runs mh_compose_step for `steps` transitions from an exact draw of p1 and
/// returns visit frequencies (the initial state is not counted).
MhChainResult run_mh_compose(const TabularDistribution& p1,
                             const TabularDistribution& p2, std::size_t steps,
                             std::uint64_t seed);

/// Conditionals p(x_i | x_{0:i-1}) of a tabular distribution.
class AutoregressiveFactorization {
 public:
  explicit AutoregressiveFactorization(const TabularDistribution& joint);

  const DiscreteSpace& space() const { return space_; }
  /// p(x_i = v | prefix), prefix.size() == i.
  double conditional(const State& prefix, int value) const;
  /// Row p(. | prefix).
  std::vector<double> conditional_row(const State& prefix) const;
  /// Chain-rule joint probability of a full state.
  double joint(const State& s) const;
  /// Rebuilt distribution from the conditionals.
  TabularDistribution to_tabular() const;

 private:
  std::size_t prefix_index(const State& prefix) const;

  DiscreteSpace space_;
  // tables_[i][prefix_index * K_i + v]
  std::vector<std::vector<double>> tables_;
};

struct NonComposeReport {
  double max_discrepancy = 0.0;
  int position = -1;          ///< where the maximum occurs
  State prefix;               ///< witnessing prefix x_{0:i-1}
  int value = -1;             ///< witnessing x_i
  double exact = 0.0;         ///< p_product(x_i | prefix)
  double naive = 0.0;         ///< renormalized p1(x_i | prefix) p2(x_i | prefix)
};

/// Compares exact conditionals of the normalized product p1 p2 against the
/// renormalized per-step product of the two factors' own conditionals.
NonComposeReport autoregressive_noncompose_demo(const TabularDistribution& p1,
                                                const TabularDistribution& p2);

}  // namespace compgen
