#include "compgen/constraints.hpp"

#include "compgen/error.hpp"
#include "compgen/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace compgen {

int ConstraintGraph::add_disk(const std::string& name, double radius) {
  if (!(radius > 0.0)) throw ConstructionError("disk radius must be positive");
  for (const auto& d : disks_) {
    if (d.name == name) throw ConstructionError("duplicate variable '" + name + "'");
  }
  disks_.push_back({name, radius});
  return static_cast<int>(disks_.size()) - 1;
}

int ConstraintGraph::variable_index(const std::string& name) const {
  for (std::size_t i = 0; i < disks_.size(); ++i) {
    if (disks_[i].name == name) return static_cast<int>(i);
  }
  throw ConstructionError("constraint references undeclared variable '" + name + "'");
}

void ConstraintGraph::add_non_overlap(const std::string& a, const std::string& b,
                                      double weight) {
  if (!(weight > 0.0)) throw ConstructionError("constraint weight must be positive");
  const int i = variable_index(a), j = variable_index(b);
  if (i == j) throw ConstructionError("non-overlap needs two distinct disks");
  Constraint c;
  c.kind = Constraint::Kind::NonOverlap;
  c.vars = {i, j};
  c.weight = weight;
  constraints_.push_back(c);
}

void ConstraintGraph::add_inside(const std::string& a, const Box2& box, double weight) {
  if (!(weight > 0.0)) throw ConstructionError("constraint weight must be positive");
  if (!(box.x1 > box.x0) || !(box.y1 > box.y0)) throw ConstructionError("empty box");
  Constraint c;
  c.kind = Constraint::Kind::Inside;
  c.vars = {variable_index(a)};
  c.box = box;
  c.weight = weight;
  constraints_.push_back(c);
}

ConstraintGraph ConstraintGraph::disks_in_box(int n, double radius, const Box2& box,
                                              double weight) {
  if (n < 1) throw ConstructionError("need at least one disk");
  ConstraintGraph g;
  for (int i = 0; i < n; ++i) g.add_disk("disk" + std::to_string(i), radius);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      g.add_non_overlap("disk" + std::to_string(i), "disk" + std::to_string(j), weight);
    }
  }
  for (int i = 0; i < n; ++i) g.add_inside("disk" + std::to_string(i), box, weight);
  return g;
}

ConstraintGraph ConstraintGraph::without(std::size_t k) const {
  if (k >= constraints_.size()) throw InputError("no such constraint");
  ConstraintGraph g = *this;
  g.constraints_.erase(g.constraints_.begin() + static_cast<std::ptrdiff_t>(k));
  return g;
}

namespace {

void check_assignment(const ConstraintGraph& g, const Vector& x) {
  if (x.size() != g.dim()) {
    throw InputError("assignment has " + std::to_string(x.size()) + " values, the graph needs " +
                     std::to_string(g.dim()) + " (two per disk)");
  }
}

// Energy of constraint c; accumulates its gradient when grad is non-null.
// residual receives the hinge value reported by constraint_residuals.
double eval_constraint(const ConstraintGraph& g, const ConstraintGraph::Constraint& c,
                       const Vector& x, Vector* grad, double* residual) {
  const auto& disks = g.disks();
  if (c.kind == ConstraintGraph::Constraint::Kind::NonOverlap) {
    const int i = c.vars[0], j = c.vars[1];
    const Eigen::Vector2d d = x.segment<2>(2 * i) - x.segment<2>(2 * j);
    const double dist = d.norm();
    const double h = std::max(0.0, disks[i].radius + disks[j].radius - dist);
    if (residual) *residual = h;
    if (grad && h > 0.0 && dist > 0.0) {
      const Eigen::Vector2d gd = -2.0 * c.weight * h * d / dist;
      grad->segment<2>(2 * i) += gd;
      grad->segment<2>(2 * j) -= gd;
    }
    return c.weight * h * h;
  }
  const int i = c.vars[0];
  const double r = disks[i].radius;
  const double px = x[2 * i], py = x[2 * i + 1];
  const double over[4] = {c.box.x0 + r - px, px + r - c.box.x1, c.box.y0 + r - py,
                          py + r - c.box.y1};
  double e = 0.0, worst = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double h = std::max(0.0, over[k]);
    worst = std::max(worst, h);
    e += c.weight * h * h;
    if (grad && h > 0.0) {
      const double sign = (k % 2 == 0) ? -1.0 : 1.0;
      (*grad)[2 * i + k / 2] += sign * 2.0 * c.weight * h;
    }
  }
  if (residual) *residual = worst;
  return e;
}

class ConstraintEnergy final : public EnergyFunction {
 public:
  explicit ConstraintEnergy(ConstraintGraph g) : g_(std::move(g)) {}
  int dim() const override { return g_.dim(); }
  double energy(const Vector& x) const override { return constraint_energy(g_, x); }
  void gradient(const Vector& x, Vector& grad) const override { energy_and_gradient(x, grad); }
  double energy_and_gradient(const Vector& x, Vector& grad) const override {
    check_assignment(g_, x);
    grad.setZero(dim());
    double e = 0.0;
    for (const auto& c : g_.constraints()) e += eval_constraint(g_, c, x, &grad, nullptr);
    return e;
  }

 private:
  ConstraintGraph g_;
};

}  // namespace

std::vector<double> constraint_residuals(const ConstraintGraph& g, const Vector& x) {
  check_assignment(g, x);
  std::vector<double> out;
  for (const auto& c : g.constraints()) {
    double r = 0.0;
    eval_constraint(g, c, x, nullptr, &r);
    out.push_back(r);
  }
  return out;
}

double constraint_energy(const ConstraintGraph& g, const Vector& x) {
  check_assignment(g, x);
  double e = 0.0;
  for (const auto& c : g.constraints()) e += eval_constraint(g, c, x, nullptr, nullptr);
  return e;
}

EnergyPtr constraint_energy_fn(const ConstraintGraph& g) {
  if (g.dim() == 0) throw ConstructionError("constraint graph has no variables");
  return std::make_shared<ConstraintEnergy>(g);
}

void ArrangeConfig::validate() const {
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(temp_start > 0.0) || !(temp_end > 0.0)) throw ConfigError("temperatures must be positive");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (probe_restarts < 0) throw ConfigError("probe_restarts must be >= 0");
  if (sampler.kernel != Kernel::ULA && sampler.kernel != Kernel::MALA) {
    throw ConfigError("arrange supports the ULA and MALA kernels");
  }
  sampler.validate();
}

namespace {

// Uniform start: each disk inside the bounding box of its containment
// constraints, or [-5, 5]^2 when it has none.
Vector random_start(const ConstraintGraph& g, Rng& rng) {
  Vector x(g.dim());
  for (std::size_t i = 0; i < g.disks().size(); ++i) {
    Box2 b{-5.0, -5.0, 5.0, 5.0};
    bool first = true;
    for (const auto& c : g.constraints()) {
      if (c.kind != ConstraintGraph::Constraint::Kind::Inside || c.vars[0] != int(i)) continue;
      if (first) {
        b = c.box;
        first = false;
      } else {
        b = {std::max(b.x0, c.box.x0), std::max(b.y0, c.box.y0), std::min(b.x1, c.box.x1),
             std::min(b.y1, c.box.y1)};
      }
    }
    x[2 * i] = b.x0 + (b.x1 - b.x0) * rng.uniform();
    x[2 * i + 1] = b.y0 + (b.y1 - b.y0) * rng.uniform();
  }
  return x;
}

double max_residual(const ConstraintGraph& g, const Vector& x) {
  const auto r = constraint_residuals(g, x);
  return r.empty() ? 0.0 : *std::max_element(r.begin(), r.end());
}

}  // namespace

bool feasibility_probe(const ConstraintGraph& g, const ArrangeConfig& cfg) {
  cfg.validate();
  const EnergyPtr e = constraint_energy_fn(g);
  Rng rng(mix_seed(cfg.sampler.seed, 0x9e37u));
  Vector grad;
  for (int k = 0; k < cfg.probe_restarts; ++k) {
    Vector x = random_start(g, rng);
    for (int it = 0; it < 2000; ++it) {
      e->gradient(x, grad);
      x -= cfg.sampler.step_size * grad;
    }
    if (max_residual(g, x) < cfg.tolerance) return true;
  }
  return false;
}

ArrangeResult arrange(const ConstraintGraph& g, const ArrangeConfig& cfg, int n) {
  cfg.validate();
  if (n < 1) throw ConfigError("arrange needs n >= 1");
  ArrangeResult res;
  res.probe_feasible = feasibility_probe(g, cfg);
  if (!res.probe_feasible) {
    std::cerr << "warning: feasibility probe found no satisfying assignment; sampling anyway\n";
  }
  const EnergyPtr e = constraint_energy_fn(g);
  const double ratio =
      cfg.steps > 1 ? std::pow(cfg.temp_end / cfg.temp_start, 1.0 / (cfg.steps - 1)) : 1.0;
  res.samples.resize(n, g.dim());
  int ok = 0;
  for (int i = 0; i < n; ++i) {
    ChainState c(Vector(), mix_seed(cfg.sampler.seed, static_cast<std::uint64_t>(i)));
    c.x = random_start(g, c.rng);
    SamplerConfig sc = cfg.sampler;
    double temp = cfg.temp_start;
    for (int k = 0; k < cfg.steps; ++k, temp *= ratio) {
      sc.temperature = temp;
      sc.step_size = cfg.sampler.step_size * temp;
      mcmc_step(*e, c, sc);
    }
    res.samples.row(i) = c.x.transpose();
    const double r = max_residual(g, c.x);
    res.max_residual.push_back(r);
    res.satisfied.push_back(r < cfg.tolerance);
    ok += r < cfg.tolerance ? 1 : 0;
  }
  res.satisfaction_rate = static_cast<double>(ok) / n;
  return res;
}

}  // namespace compgen
