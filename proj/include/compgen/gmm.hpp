#pragma once

#include "compgen/energy.hpp"
#include "compgen/rng.hpp"

#include <vector>

namespace compgen {

/// One isotropic Gaussian component N(mean, variance * I).
struct GaussianComponent {
  double weight = 1.0;
  Vector mean;
  double variance = 1.0;
};

/// Negative log density of a normalized isotropic Gaussian mixture:
///
///   E(x) = -log sum_k w_k N(x; mu_k, sigma_k^2 I)
///
/// Evaluated with a max-shifted log-sum-exp so energies far above 700 stay
/// finite. This is the analytic testbed for every continuous experiment.
class GmmEnergy final : public EnergyFunction {
 public:
  /// Throws InputError for empty/ragged input, negative weights, weights not
  /// summing to 1 within 1e-12, or non-positive variances.
  GmmEnergy(std::vector<double> weights, std::vector<Vector> means,
            std::vector<double> variances);

  /// Single Gaussian N(mean, variance * I).
  static GmmEnergy gaussian(const Vector& mean, double variance);
  /// 1D convenience: N(mean, variance).
  static GmmEnergy gaussian1d(double mean, double variance);

  int dim() const override { return dim_; }
  double energy(const Vector& x) const override;
  void gradient(const Vector& x, Vector& grad) const override;
  double energy_and_gradient(const Vector& x, Vector& grad) const override;

  /// Normalized density exp(-E(x)).
  double density(const Vector& x) const;

  /// Posterior component responsibilities at x.
  std::vector<double> responsibilities(const Vector& x) const;

  Vector sample(Rng& rng) const;

  std::size_t components() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Vector>& means() const { return means_; }
  const std::vector<double>& variances() const { return variances_; }

  /// Mean vector and per-coordinate variance of the mixture.
  Vector mixture_mean() const;
  Vector mixture_variance() const;

 private:
  // log(w_k) + log N(x; mu_k, sigma_k^2 I)
  double log_term(std::size_t k, const Vector& x) const;

  int dim_;
  std::vector<double> weights_;
  std::vector<Vector> means_;
  std::vector<double> variances_;
  std::vector<double> log_norms_;  // log w_k - D/2 log(2 pi sigma_k^2)
};

/// Closed-form normalized product of two isotropic mixtures: a mixture with
/// one component per (i, j) pair. Used as the exact reference for product
/// compositions.
GmmEnergy product_of_gmms(const GmmEnergy& a, const GmmEnergy& b);

/// Closed-form mixture sum_i w_i p_i of isotropic mixtures.
GmmEnergy mixture_of_gmms(const std::vector<GmmEnergy>& parts,
                          const std::vector<double>& weights);

/// Stable log(sum exp(v)).
double log_sum_exp(const double* values, std::size_t n);

}  // namespace compgen
