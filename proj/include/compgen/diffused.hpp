#pragma once

#include "compgen/energy.hpp"
#include "compgen/gmm.hpp"
#include "compgen/schedule.hpp"

#include <memory>
#include <vector>

namespace compgen {

/// A sequence of energies E(x, t), t = 0..T, one per noise level of a
/// schedule. Level 0 is the data distribution and level T is close to
/// N(0, I). The denoiser view is
///
///   eps(x, t) = sqrt(1 - alpha_bar_t) * grad_x E(x, t),
///
/// the denoising score matching identity; it is definitional in both
/// directions.
class DiffusedEnergyFamily
    : public std::enable_shared_from_this<DiffusedEnergyFamily> {
 public:
  virtual ~DiffusedEnergyFamily() = default;

  virtual const NoiseSchedule& schedule() const = 0;
  virtual int dim() const = 0;
  virtual bool has_energy() const { return true; }
  /// Lowest level the family can evaluate. Learned denoisers are undefined
  /// at t = 0 because sqrt(1 - alpha_bar_0) = 0.
  virtual int min_level() const { return 0; }

  virtual double level_energy(const Vector& x, int t) const = 0;
  virtual void level_gradient(const Vector& x, int t, Vector& grad) const = 0;
  virtual double level_energy_and_gradient(const Vector& x, int t,
                                           Vector& grad) const {
    level_gradient(x, t, grad);
    return level_energy(x, t);
  }

  /// Gradients for a batch of points stored as the columns of xs.
  virtual void level_gradient_batch(const Matrix& xs, int t, Matrix& grads) const;

  /// Denoiser prediction; 1 <= t <= T.
  virtual Vector eps(const Vector& x, int t) const;

  Vector level_grad(const Vector& x, int t) const {
    Vector g(dim());
    level_gradient(x, t, g);
    return g;
  }

  /// The level-t energy as a standalone EnergyFunction sharing this family.
  EnergyPtr slice(int t) const;

  /// Throws InputError unless min_level() <= t <= T.
  void check_level(int t) const;
};

using FamilyPtr = std::shared_ptr<const DiffusedEnergyFamily>;

/// Conversions between a level score gradient and a denoiser prediction.
Vector eps_from_score(const Vector& level_grad, double alpha_bar);
Vector score_from_eps(const Vector& eps, double alpha_bar);

/// Denoiser prediction of a family at level t (1 <= t <= T).
Vector eps_from_score(const DiffusedEnergyFamily& family, const Vector& x, int t);

/// Exact diffusion of an isotropic mixture under the forward kernel
/// q(x_t | x_0) = N(sqrt(abar_t) x_0, (1 - abar_t) I): level t is the mixture
/// with means sqrt(abar_t) mu_k and variances abar_t sigma_k^2 + 1 - abar_t.
class DiffusedGmm final : public DiffusedEnergyFamily {
 public:
  DiffusedGmm(GmmEnergy base, NoiseSchedule schedule);

  const NoiseSchedule& schedule() const override { return schedule_; }
  int dim() const override { return levels_.front().dim(); }
  double level_energy(const Vector& x, int t) const override;
  void level_gradient(const Vector& x, int t, Vector& grad) const override;
  double level_energy_and_gradient(const Vector& x, int t,
                                   Vector& grad) const override;

  const GmmEnergy& level(int t) const;
  const GmmEnergy& base() const { return levels_.front(); }

 private:
  NoiseSchedule schedule_;
  std::vector<GmmEnergy> levels_;  // index t = 0..T
};

std::shared_ptr<const DiffusedGmm> diffuse_gmm(const GmmEnergy& gmm,
                                               const NoiseSchedule& schedule);

/// The level-t mixture of the forward diffusion of gmm.
GmmEnergy diffuse_gmm_level(const GmmEnergy& gmm, double alpha_bar);

/// E(x, t) = 0 at every level: the identity element for family products.
class UniformFamily final : public DiffusedEnergyFamily {
 public:
  UniformFamily(int dim, NoiseSchedule schedule)
      : dim_(dim), schedule_(std::move(schedule)) {}
  const NoiseSchedule& schedule() const override { return schedule_; }
  int dim() const override { return dim_; }
  double level_energy(const Vector& x, int t) const override;
  void level_gradient(const Vector& x, int t, Vector& grad) const override;

 private:
  int dim_;
  NoiseSchedule schedule_;
};

}  // namespace compgen
