#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>

namespace compgen {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A scalar energy E(x) on R^D with its gradient. The density it represents
/// is p(x) ∝ exp(-E(x)); implementations may or may not be normalized.
///
/// Implementations are immutable after construction and every method is
/// reentrant, so one instance can be shared by any number of chains.
class EnergyFunction {
 public:
  virtual ~EnergyFunction() = default;

  virtual int dim() const = 0;

  /// Energies that only expose a gradient (learned score models) return
  /// false here; calling energy() on them throws.
  virtual bool has_energy() const { return true; }

  virtual double energy(const Vector& x) const = 0;
  virtual void gradient(const Vector& x, Vector& grad) const = 0;

  /// Fused evaluation. The default calls the two methods above.
  virtual double energy_and_gradient(const Vector& x, Vector& grad) const {
    gradient(x, grad);
    return energy(x);
  }

  Vector grad(const Vector& x) const {
    Vector g(dim());
    gradient(x, g);
    return g;
  }

  /// Throws InputError unless x.size() == dim().
  void check_dim(const Vector& x) const;
};

using EnergyPtr = std::shared_ptr<const EnergyFunction>;

/// E(x) = 0: the uniform (improper) density, the additive identity of products.
class ZeroEnergy final : public EnergyFunction {
 public:
  explicit ZeroEnergy(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  double energy(const Vector& x) const override;
  void gradient(const Vector& x, Vector& grad) const override;

 private:
  int dim_;
};

/// Energy defined by callables. Handy for tests and ad-hoc factors.
class FunctionEnergy final : public EnergyFunction {
 public:
  using EnergyFn = std::function<double(const Vector&)>;
  using GradFn = std::function<void(const Vector&, Vector&)>;

  FunctionEnergy(int dim, EnergyFn energy, GradFn grad)
      : dim_(dim), energy_(std::move(energy)), grad_(std::move(grad)) {}

  int dim() const override { return dim_; }
  double energy(const Vector& x) const override;
  void gradient(const Vector& x, Vector& grad) const override;

 private:
  int dim_;
  EnergyFn energy_;
  GradFn grad_;
};

/// Central finite-difference gradient of energy(). Used by gradient checks.
Vector finite_difference_gradient(const EnergyFunction& e, const Vector& x,
                                  double h = 1e-5);

/// Largest entrywise relative error |g - fd| / max(|fd|, floor) between the
/// analytic and finite-difference gradients at x.
double gradient_check(const EnergyFunction& e, const Vector& x, double h = 1e-5,
                      double floor = 1e-3);

}  // namespace compgen
