#pragma once

#include "compgen/diffused.hpp"
#include "compgen/energy.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace compgen {

/// (energy, weight) pair used by products and mixtures.
struct WeightedEnergy {
  EnergyPtr energy;
  double weight = 1.0;
};

/// E(x) = sum_i w_i E_i(x), the density prod_i p_i(x)^{w_i} (unnormalized).
/// Weights must be > 0.
EnergyPtr product_energy(const std::vector<WeightedEnergy>& terms);

/// E(x) = -log sum_i w_i exp(-E_i(x)); weights must form a probability vector.
/// The gradient is the posterior-weighted combination of child gradients.
EnergyPtr mixture_energy(const std::vector<WeightedEnergy>& terms);

struct NegationCheck {
  /// Throw on detected negative curvature. When unset, only a warning is
  /// printed unless both operands are analytic mixtures.
  bool strict = false;
  /// Number of random probe points and the radius of the probe ball.
  int probes = 16;
  double radius = 10.0;
  std::uint64_t seed = 0x6e6567;
};

/// E(x) = E_base(x) - alpha * E_negated(x). alpha >= 0 (alpha = 0 reproduces
/// the base). At construction the curvature of the result is probed along
/// random directions; negative curvature means the result is not integrable.
/// For analytic mixture operands that is a ConstructionError, otherwise a
/// warning on stderr.
EnergyPtr negation_energy(EnergyPtr base, EnergyPtr negated, double alpha,
                          const NegationCheck& check = {});

/// Operator tree over named energies or families.
struct CompositionSpec {
  enum class Op { Leaf, Product, Mixture, Negation };

  Op op = Op::Leaf;
  /// Product: one positive weight per child. Mixture: a probability vector.
  /// Negation: a single entry, the exponent alpha on the second child.
  std::vector<double> weights;
  std::vector<CompositionSpec> children;
  /// Registry key for leaves.
  std::string ref;

  static CompositionSpec leaf(std::string ref);
  static CompositionSpec product(std::vector<CompositionSpec> children,
                                 std::vector<double> weights = {});
  static CompositionSpec mixture(std::vector<CompositionSpec> children,
                                 std::vector<double> weights = {});
  static CompositionSpec negation(CompositionSpec base, CompositionSpec negated,
                                  double alpha);

  /// Throws ConfigError describing the first malformed node.
  void validate() const;
  /// All leaf references, depth first.
  std::vector<std::string> refs() const;
};

const char* op_name(CompositionSpec::Op op);
CompositionSpec::Op op_from_name(const std::string& name);

/// Evaluates spec over registered energies.
EnergyPtr build_energy(const CompositionSpec& spec,
                       const std::map<std::string, EnergyPtr>& registry,
                       const NegationCheck& check = {});

/// Applies spec to the energies of every level: the level-t energy of the
/// result is spec evaluated on the children's level-t energies. At t > 0 this
/// is not the forward diffusion of the composed base density; it is only a
/// sequence of intermediate targets that ends at the right distribution.
FamilyPtr compose_diffused(const std::map<std::string, FamilyPtr>& families,
                           const CompositionSpec& spec);

}  // namespace compgen
