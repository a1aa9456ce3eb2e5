#pragma once

#include "compgen/continuous.hpp"
#include "compgen/energy.hpp"

#include <string>
#include <vector>

namespace compgen {

struct Box2 {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
};

/// Decision variables are disk centers (2D each); the disk radii are the
/// conditioning variables. Each constraint is a squared-hinge energy on the
/// variables it references:
///   non-overlap(i, j):  w * max(0, r_i + r_j - |c_i - c_j|)^2
///   inside(i, box):     w * sum over the four sides of the disk's overshoot^2
class ConstraintGraph {
 public:
  struct Disk {
    std::string name;
    double radius = 1.0;
  };
  struct Constraint {
    enum class Kind { NonOverlap, Inside };
    Kind kind = Kind::NonOverlap;
    std::vector<int> vars;
    Box2 box;
    double weight = 1.0;
  };

  /// Returns the index of the new decision variable.
  int add_disk(const std::string& name, double radius);
  /// Throws ConstructionError for names that were not declared.
  void add_non_overlap(const std::string& a, const std::string& b, double weight = 1.0);
  void add_inside(const std::string& a, const Box2& box, double weight = 1.0);
  /// Non-overlap for every pair and containment for every disk.
  static ConstraintGraph disks_in_box(int n, double radius, const Box2& box,
                                      double weight = 1.0);

  int variable_index(const std::string& name) const;
  const std::vector<Disk>& disks() const { return disks_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  /// Dimension of an assignment: two coordinates per disk.
  int dim() const { return 2 * static_cast<int>(disks_.size()); }
  /// Copy without constraint k.
  ConstraintGraph without(std::size_t k) const;

 private:
  std::vector<Disk> disks_;
  std::vector<Constraint> constraints_;
};

/// Hinge residual of each constraint (the quantity inside the square; for
/// containment the largest side overshoot).
std::vector<double> constraint_residuals(const ConstraintGraph& g, const Vector& assignment);
/// Sum of the constraint energies. Throws InputError when the assignment does
/// not cover every decision variable.
double constraint_energy(const ConstraintGraph& g, const Vector& assignment);
EnergyPtr constraint_energy_fn(const ConstraintGraph& g);

struct ArrangeConfig {
  int steps = 2000;
  double temp_start = 1.0;   ///< geometric temperature ladder
  double temp_end = 1e-8;
  double tolerance = 1e-3;   ///< satisfied when every residual is below this
  int probe_restarts = 20;   ///< feasibility probe attempts
  SamplerConfig sampler = [] {
    SamplerConfig s;
    s.step_size = 0.05;
    return s;
  }();

  void validate() const;
};

struct ArrangeResult {
  Matrix samples;              // n x dim
  std::vector<double> max_residual;
  std::vector<bool> satisfied;
  double satisfaction_rate = 0.0;
  bool probe_feasible = false;
};

/// Randomized feasibility probe: gradient descent from random starts inside
/// the containment boxes. True when some start reaches every residual below
/// tolerance.
bool feasibility_probe(const ConstraintGraph& g, const ArrangeConfig& cfg);

/// MCMC on the composed constraint energy from uniform random starts inside
/// the containment boxes, down the temperature ladder. A failed feasibility
/// probe only prints a warning.
ArrangeResult arrange(const ConstraintGraph& g, const ArrangeConfig& cfg, int n);

}  // namespace compgen
