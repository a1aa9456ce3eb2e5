#include "compgen/gmm.hpp"

#include "compgen/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace compgen {

double log_sum_exp(const double* values, std::size_t n) {
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, values[i]);
  if (!std::isfinite(peak)) return peak;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(values[i] - peak);
  return peak + std::log(sum);
}

GmmEnergy::GmmEnergy(std::vector<double> weights, std::vector<Vector> means,
                     std::vector<double> variances)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      variances_(std::move(variances)) {
  if (weights_.empty()) throw InputError("mixture needs at least one component");
  if (means_.size() != weights_.size() || variances_.size() != weights_.size()) {
    throw InputError("mixture weights, means and variances differ in length");
  }
  dim_ = static_cast<int>(means_.front().size());
  if (dim_ < 1) throw InputError("mixture dimension must be >= 1");
  double total = 0.0;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (means_[k].size() != dim_) throw InputError("mixture means differ in dimension");
    if (!(weights_[k] >= 0.0)) throw InputError("mixture weights must be nonnegative");
    if (!(variances_[k] > 0.0)) throw InputError("mixture variances must be positive");
    if (!means_[k].allFinite()) throw InputError("mixture means must be finite");
    total += weights_[k];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InputError("mixture weights sum to " + std::to_string(total) + ", not 1");
  }
  log_norms_.resize(weights_.size());
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    log_norms_[k] = std::log(weights_[k]) -
                    0.5 * dim_ * std::log(2.0 * std::numbers::pi * variances_[k]);
  }
}

GmmEnergy GmmEnergy::gaussian(const Vector& mean, double variance) {
  return GmmEnergy({1.0}, {mean}, {variance});
}

GmmEnergy GmmEnergy::gaussian1d(double mean, double variance) {
  return gaussian(Vector::Constant(1, mean), variance);
}

double GmmEnergy::log_term(std::size_t k, const Vector& x) const {
  return log_norms_[k] - 0.5 * (x - means_[k]).squaredNorm() / variances_[k];
}

double GmmEnergy::energy(const Vector& x) const {
  check_dim(x);
  const std::size_t n = weights_.size();
  if (n == 1) return -log_term(0, x);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) peak = std::max(peak, log_term(k, x));
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) sum += std::exp(log_term(k, x) - peak);
  return -(peak + std::log(sum));
}

void GmmEnergy::gradient(const Vector& x, Vector& grad) const {
  energy_and_gradient(x, grad);
}

double GmmEnergy::energy_and_gradient(const Vector& x, Vector& grad) const {
  check_dim(x);
  const std::size_t n = weights_.size();
  if (n == 1) {
    grad = (x - means_[0]) / variances_[0];
    return -log_term(0, x);
  }
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) peak = std::max(peak, log_term(k, x));
  double sum = 0.0;
  grad.setZero(dim_);
  for (std::size_t k = 0; k < n; ++k) {
    const double r = std::exp(log_term(k, x) - peak);
    sum += r;
    grad.noalias() += (r / variances_[k]) * (x - means_[k]);
  }
  grad /= sum;
  return -(peak + std::log(sum));
}

double GmmEnergy::density(const Vector& x) const { return std::exp(-energy(x)); }

std::vector<double> GmmEnergy::responsibilities(const Vector& x) const {
  check_dim(x);
  std::vector<double> r(weights_.size());
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = log_term(k, x);
  const double lse = log_sum_exp(r.data(), r.size());
  for (double& v : r) v = std::exp(v - lse);
  return r;
}

Vector GmmEnergy::sample(Rng& rng) const {
  std::size_t k = 0;
  if (weights_.size() > 1) {
    double u = rng.uniform();
    k = weights_.size() - 1;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (u < weights_[i]) {
        k = i;
        break;
      }
      u -= weights_[i];
    }
  }
  Vector x(dim_);
  const double sd = std::sqrt(variances_[k]);
  for (int d = 0; d < dim_; ++d) x[d] = means_[k][d] + sd * rng.normal();
  return x;
}

Vector GmmEnergy::mixture_mean() const {
  Vector m = Vector::Zero(dim_);
  for (std::size_t k = 0; k < weights_.size(); ++k) m += weights_[k] * means_[k];
  return m;
}

Vector GmmEnergy::mixture_variance() const {
  const Vector m = mixture_mean();
  Vector v = Vector::Zero(dim_);
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    v += weights_[k] *
         ((means_[k] - m).array().square() + variances_[k]).matrix();
  }
  return v;
}

GmmEnergy product_of_gmms(const GmmEnergy& a, const GmmEnergy& b) {
  if (a.dim() != b.dim()) throw InputError("product of mixtures with different dims");
  const int dim = a.dim();
  std::vector<double> log_w;
  std::vector<Vector> means;
  std::vector<double> vars;
  for (std::size_t i = 0; i < a.components(); ++i) {
    for (std::size_t j = 0; j < b.components(); ++j) {
      const double va = a.variances()[i];
      const double vb = b.variances()[j];
      const double v = 1.0 / (1.0 / va + 1.0 / vb);
      means.push_back(v * (a.means()[i] / va + b.means()[j] / vb));
      vars.push_back(v);
      // N(x; ma, va) N(x; mb, vb) = N(ma; mb, va + vb) N(x; m, v)
      const double s = va + vb;
      const double cross = -0.5 * dim * std::log(2.0 * std::numbers::pi * s) -
                           0.5 * (a.means()[i] - b.means()[j]).squaredNorm() / s;
      log_w.push_back(std::log(a.weights()[i]) + std::log(b.weights()[j]) + cross);
    }
  }
  const double lse = log_sum_exp(log_w.data(), log_w.size());
  std::vector<double> w(log_w.size());
  double total = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) total += (w[k] = std::exp(log_w[k] - lse));
  for (double& x : w) x /= total;
  return GmmEnergy(std::move(w), std::move(means), std::move(vars));
}

GmmEnergy mixture_of_gmms(const std::vector<GmmEnergy>& parts,
                          const std::vector<double>& weights) {
  if (parts.empty() || parts.size() != weights.size()) {
    throw InputError("mixture_of_gmms needs one weight per part");
  }
  std::vector<double> w;
  std::vector<Vector> means;
  std::vector<double> vars;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (std::size_t k = 0; k < parts[p].components(); ++k) {
      w.push_back(weights[p] * parts[p].weights()[k]);
      means.push_back(parts[p].means()[k]);
      vars.push_back(parts[p].variances()[k]);
    }
  }
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
  return GmmEnergy(std::move(w), std::move(means), std::move(vars));
}

}  // namespace compgen
