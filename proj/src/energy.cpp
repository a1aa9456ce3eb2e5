#include "compgen/energy.hpp"

#include "compgen/error.hpp"

#include <algorithm>
#include <cmath>

namespace compgen {

void EnergyFunction::check_dim(const Vector& x) const {
  if (x.size() != dim()) {
    throw InputError("dimension mismatch: energy has dim " +
                     std::to_string(dim()) + ", point has dim " +
                     std::to_string(x.size()));
  }
}

double ZeroEnergy::energy(const Vector& x) const {
  check_dim(x);
  return 0.0;
}

void ZeroEnergy::gradient(const Vector& x, Vector& grad) const {
  check_dim(x);
  grad.setZero(dim_);
}

double FunctionEnergy::energy(const Vector& x) const {
  check_dim(x);
  return energy_(x);
}

void FunctionEnergy::gradient(const Vector& x, Vector& grad) const {
  check_dim(x);
  grad.resize(dim_);
  grad_(x, grad);
}

Vector finite_difference_gradient(const EnergyFunction& e, const Vector& x,
                                  double h) {
  Vector fd(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = e.energy(probe);
    probe[i] = x[i] - h;
    const double down = e.energy(probe);
    probe[i] = x[i];
    fd[i] = (up - down) / (2.0 * h);
  }
  return fd;
}

double gradient_check(const EnergyFunction& e, const Vector& x, double h,
                      double floor) {
  const Vector g = e.grad(x);
  const Vector fd = finite_difference_gradient(e, x, h);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double scale = std::max(std::abs(fd[i]), floor);
    worst = std::max(worst, std::abs(g[i] - fd[i]) / scale);
  }
  return worst;
}

}  // namespace compgen
