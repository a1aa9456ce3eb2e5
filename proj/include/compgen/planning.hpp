#pragma once

#include "compgen/continuous.hpp"
#include "compgen/energy.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace compgen {

/// Point mass in a grid maze. Cell (r, c) covers x in [c, c + 1) and
/// y in [r, r + 1); grid[r][c] == '#' marks a wall. Everything outside the
/// grid rectangle counts as wall.
///
/// Dynamics (semi-implicit double integrator), state s = (px, py, vx, vy),
/// action a = (ax, ay):
///   v' = v + dt a,  p' = p + dt v'
class MazeEnv {
 public:
  MazeEnv() = default;
  explicit MazeEnv(std::vector<std::string> grid);

  static MazeEnv u_maze();
  static MazeEnv empty(int rows, int cols);

  int rows() const { return static_cast<int>(grid_.size()); }
  int cols() const { return rows() == 0 ? 0 : static_cast<int>(grid_[0].size()); }
  const std::vector<std::string>& grid() const { return grid_; }
  bool wall_cell(int r, int c) const;

  bool is_free(double x, double y) const;
  /// Signed distance to the wall region: positive in free space, negative
  /// inside walls. When grad is non-null it receives d sdf / d p.
  double sdf(double x, double y, double* grad = nullptr) const;

  /// Deterministic dynamics step.
  Vector step(const Vector& s, const Vector& a) const;

  double dt = 1.0;
  double force_bound = 0.5;          ///< per-component bound on |a|
  double dynamics_precision = 10.0;  ///< precision of the Gaussian transition
  double force_weight = 100.0;       ///< weight of the force-bound hinge
  double wall_weight = 100.0;        ///< weight of the wall penalty
  double wall_margin = 0.1;          ///< penalty starts this far from walls
  int wall_substeps = 4;             ///< penalty points per segment (1: states only)

 private:
  std::vector<std::string> grid_;
  std::vector<std::array<double, 4>> walls_;  // boxes: x0, y0, x1, y1
  std::vector<std::array<double, 4>> free_;
};

/// States s_0..s_T and actions a_1..a_T.
struct Trajectory {
  Matrix states;   // (T + 1) x 4
  Matrix actions;  // T x 2, row i - 1 holds a_i

  int horizon() const { return static_cast<int>(actions.rows()); }
  /// Flat layout: s_0..s_T then a_1..a_T.
  Vector flatten() const;
  static Trajectory unflatten(const Vector& z, int horizon);
  static int flat_size(int horizon) { return 4 * (horizon + 1) + 2 * horizon; }
  void check() const;
};

/// Exact rollout of actions from s0.
Trajectory rollout(const MazeEnv& env, const Vector& s0, const Matrix& actions);

/// Dynamically feasible trajectory through the given waypoints at constant
/// speed along the polyline: velocities are position differences, actions
/// velocity differences.
Trajectory polyline_trajectory(const MazeEnv& env, const std::vector<Vector>& waypoints,
                               int horizon);

struct GoalFactor {
  Vector start;  ///< start state; only its position enters the energy
  Vector goal;   ///< goal position
  double stiffness = 10.0;

  void validate() const;
};

/// sum_i (prec / 2) |s_i - f(s_{i-1}, a_i)|^2 + force_weight * sum hinge(|a| - bound)^2
double markov_traj_energy(const MazeEnv& env, const Trajectory& tau);
/// stiffness * (|pos(s_0) - start|^2 + |pos(s_T) - goal|^2)
double goal_energy(const GoalFactor& factor, const Trajectory& tau);
/// wall_weight * sum_q max(0, margin - sdf(q))^2 over the states and
/// wall_substeps - 1 interior points of every segment between them.
double wall_energy(const MazeEnv& env, const Trajectory& tau);
/// Largest penetration depth max(0, -sdf) over the states and over
/// `substeps` evenly spaced points on each segment between consecutive states.
double wall_penetration(const MazeEnv& env, const Trajectory& tau, int substeps = 8);

/// The three factors as energies over Trajectory::flatten().
EnergyPtr markov_energy_fn(const MazeEnv& env, int horizon);
EnergyPtr goal_energy_fn(const GoalFactor& factor, int horizon);
EnergyPtr wall_energy_fn(const MazeEnv& env, int horizon);
/// product_energy of the three factors, weights 1.
EnergyPtr plan_energy_fn(const MazeEnv& env, const GoalFactor& factor, int horizon);

struct PlanConfig {
  int horizon = 64;
  int particles = 8;            ///< parallel chains per run
  int steps = 1500;             ///< MCMC steps per chain
  double temp_start = 1.0;      ///< geometric temperature ladder
  double temp_end = 1e-3;
  double success_radius = 0.3;
  int max_waypoints = 2;        ///< random free via points of the initial paths
  /// step_size is the drift step at every temperature.
  SamplerConfig sampler = [] {
    SamplerConfig s;
    s.step_size = 4e-3;
    return s;
  }();

  void validate() const;
};

struct PlanRun {
  Trajectory best;  ///< lowest-energy final particle
  double energy = 0.0;
  double endpoint_error = 0.0;
  double penetration = 0.0;
  bool success = false;
};

struct PlanResult {
  std::vector<PlanRun> runs;
  double success_rate = 0.0;
};

/// Samples plans for n_runs independent seeds. Each run starts `particles`
/// chains at random polylines through free via points, runs MCMC on the
/// composed energy down a temperature ladder, and keeps the lowest-energy
/// particle. Success: endpoint within success_radius of the goal and no point
/// of the state polyline inside a wall.
PlanResult plan(const MazeEnv& env, const GoalFactor& factor, const PlanConfig& cfg,
                int n_runs);

}  // namespace compgen
