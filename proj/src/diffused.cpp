#include "compgen/diffused.hpp"

#include "compgen/error.hpp"

#include <cmath>
#include <string>

namespace compgen {

namespace {

class LevelSlice final : public EnergyFunction {
 public:
  LevelSlice(FamilyPtr family, int t) : family_(std::move(family)), t_(t) {}
  int dim() const override { return family_->dim(); }
  bool has_energy() const override { return family_->has_energy(); }
  double energy(const Vector& x) const override {
    check_dim(x);
    return family_->level_energy(x, t_);
  }
  void gradient(const Vector& x, Vector& grad) const override {
    check_dim(x);
    family_->level_gradient(x, t_, grad);
  }
  double energy_and_gradient(const Vector& x, Vector& grad) const override {
    check_dim(x);
    return family_->level_energy_and_gradient(x, t_, grad);
  }

 private:
  FamilyPtr family_;
  int t_;
};

}  // namespace

void DiffusedEnergyFamily::check_level(int t) const {
  if (t < min_level() || t > schedule().levels()) {
    throw InputError("level " + std::to_string(t) + " outside " +
                     std::to_string(min_level()) + ".." +
                     std::to_string(schedule().levels()));
  }
}

void DiffusedEnergyFamily::level_gradient_batch(const Matrix& xs, int t,
                                                Matrix& grads) const {
  grads.resize(xs.rows(), xs.cols());
  Vector x(xs.rows());
  Vector g(xs.rows());
  for (Eigen::Index j = 0; j < xs.cols(); ++j) {
    x = xs.col(j);
    level_gradient(x, t, g);
    grads.col(j) = g;
  }
}

Vector DiffusedEnergyFamily::eps(const Vector& x, int t) const {
  if (t < 1 || t > schedule().levels()) {
    throw InputError("denoiser level " + std::to_string(t) + " outside 1.." +
                     std::to_string(schedule().levels()));
  }
  return eps_from_score(level_grad(x, t), schedule().alpha_bar(t));
}

EnergyPtr DiffusedEnergyFamily::slice(int t) const {
  check_level(t);
  return std::make_shared<LevelSlice>(shared_from_this(), t);
}

Vector eps_from_score(const Vector& level_grad, double alpha_bar) {
  return std::sqrt(1.0 - alpha_bar) * level_grad;
}

Vector score_from_eps(const Vector& eps, double alpha_bar) {
  return eps / std::sqrt(1.0 - alpha_bar);
}

Vector eps_from_score(const DiffusedEnergyFamily& family, const Vector& x, int t) {
  return family.eps(x, t);
}

GmmEnergy diffuse_gmm_level(const GmmEnergy& gmm, double alpha_bar) {
  std::vector<Vector> means;
  std::vector<double> vars;
  const double scale = std::sqrt(alpha_bar);
  for (std::size_t k = 0; k < gmm.components(); ++k) {
    means.push_back(scale * gmm.means()[k]);
    vars.push_back(alpha_bar * gmm.variances()[k] + (1.0 - alpha_bar));
  }
  return GmmEnergy(gmm.weights(), std::move(means), std::move(vars));
}

DiffusedGmm::DiffusedGmm(GmmEnergy base, NoiseSchedule schedule)
    : schedule_(std::move(schedule)) {
  levels_.reserve(schedule_.levels() + 1);
  levels_.push_back(std::move(base));
  for (int t = 1; t <= schedule_.levels(); ++t) {
    levels_.push_back(diffuse_gmm_level(levels_.front(), schedule_.alpha_bar(t)));
  }
}

const GmmEnergy& DiffusedGmm::level(int t) const {
  check_level(t);
  return levels_[t];
}

double DiffusedGmm::level_energy(const Vector& x, int t) const {
  return level(t).energy(x);
}

void DiffusedGmm::level_gradient(const Vector& x, int t, Vector& grad) const {
  level(t).gradient(x, grad);
}

double DiffusedGmm::level_energy_and_gradient(const Vector& x, int t,
                                              Vector& grad) const {
  return level(t).energy_and_gradient(x, grad);
}

std::shared_ptr<const DiffusedGmm> diffuse_gmm(const GmmEnergy& gmm,
                                               const NoiseSchedule& schedule) {
  return std::make_shared<DiffusedGmm>(gmm, schedule);
}

double UniformFamily::level_energy(const Vector& x, int t) const {
  check_level(t);
  if (x.size() != dim_) throw InputError("dimension mismatch in uniform family");
  return 0.0;
}

void UniformFamily::level_gradient(const Vector& x, int t, Vector& grad) const {
  check_level(t);
  if (x.size() != dim_) throw InputError("dimension mismatch in uniform family");
  grad.setZero(dim_);
}

}  // namespace compgen
