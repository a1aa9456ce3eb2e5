#include "compgen/planning.hpp"

#include "compgen/compose.hpp"
#include "compgen/error.hpp"
#include "compgen/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace compgen {

namespace {

using Box = std::array<double, 4>;

// Distance from (x, y) to an axis-aligned box and its gradient (zero inside).
double box_distance(const Box& b, double x, double y, double* grad) {
  const double dx = x < b[0] ? x - b[0] : (x > b[2] ? x - b[2] : 0.0);
  const double dy = y < b[1] ? y - b[1] : (y > b[3] ? y - b[3] : 0.0);
  const double d = std::hypot(dx, dy);
  if (grad) {
    grad[0] = d > 0.0 ? dx / d : 0.0;
    grad[1] = d > 0.0 ? dy / d : 0.0;
  }
  return d;
}

}  // namespace

MazeEnv::MazeEnv(std::vector<std::string> grid) : grid_(std::move(grid)) {
  if (grid_.empty() || grid_[0].empty()) throw ConfigError("maze grid is empty");
  const int w = cols(), h = rows();
  for (const auto& row : grid_) {
    if (static_cast<int>(row.size()) != w) throw ConfigError("maze rows differ in length");
    for (char ch : row) {
      if (ch != '#' && ch != '.') throw ConfigError("maze cells must be '#' or '.'");
    }
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Box b{double(c), double(r), double(c + 1), double(r + 1)};
      (wall_cell(r, c) ? walls_ : free_).push_back(b);
    }
  }
  if (free_.empty()) throw ConfigError("maze has no free cells");
  // The outside of the rectangle is wall as well.
  constexpr double kFar = 1e6;
  walls_.push_back({-kFar, -kFar, 0.0, kFar});
  walls_.push_back({double(w), -kFar, kFar, kFar});
  walls_.push_back({-kFar, -kFar, kFar, 0.0});
  walls_.push_back({-kFar, double(h), kFar, kFar});
}

MazeEnv MazeEnv::u_maze() {
  return MazeEnv({"#####", "#...#", "###.#", "#...#", "#####"});
}

MazeEnv MazeEnv::empty(int rows, int cols) {
  if (rows < 1 || cols < 1) throw ConfigError("maze size must be positive");
  return MazeEnv(std::vector<std::string>(rows, std::string(cols, '.')));
}

bool MazeEnv::wall_cell(int r, int c) const {
  if (r < 0 || c < 0 || r >= rows() || c >= cols()) return true;
  return grid_[r][c] == '#';
}

bool MazeEnv::is_free(double x, double y) const {
  if (!std::isfinite(x) || !std::isfinite(y)) return false;
  return !wall_cell(static_cast<int>(std::floor(y)), static_cast<int>(std::floor(x)));
}

double MazeEnv::sdf(double x, double y, double* grad) const {
  const bool free = is_free(x, y);
  double best = std::numeric_limits<double>::infinity();
  double g[2] = {0.0, 0.0};
  auto consider = [&](const Box& b) {
    double gb[2] = {0.0, 0.0};
    const double d = box_distance(b, x, y, grad ? gb : nullptr);
    if (d < best) {
      best = d;
      g[0] = gb[0];
      g[1] = gb[1];
    }
  };
  // Anything closer than one cell lies in the 3 x 3 neighbourhood, so the
  // full scan is only needed when no neighbour is of the opposite kind.
  const int r0 = static_cast<int>(std::floor(std::clamp(y, -2.0, rows() + 1.0)));
  const int c0 = static_cast<int>(std::floor(std::clamp(x, -2.0, cols() + 1.0)));
  for (int r = r0 - 1; r <= r0 + 1; ++r) {
    for (int c = c0 - 1; c <= c0 + 1; ++c) {
      if (wall_cell(r, c) == free) consider({double(c), double(r), double(c + 1), double(r + 1)});
    }
  }
  if (!(best < 1.0)) {
    for (const auto& b : free ? walls_ : free_) consider(b);
  }
  // Outside walls the distance grows away from them; inside, the depth grows
  // away from free space, so the signed distance flips sign and gradient.
  const double sign = free ? 1.0 : -1.0;
  if (grad) {
    grad[0] = sign * g[0];
    grad[1] = sign * g[1];
  }
  return sign * best;
}

Vector MazeEnv::step(const Vector& s, const Vector& a) const {
  if (s.size() != 4 || a.size() != 2) throw InputError("state is 4D and action 2D");
  Vector out(4);
  out.tail<2>() = s.tail<2>() + dt * a;
  out.head<2>() = s.head<2>() + dt * out.tail<2>();
  return out;
}

Vector Trajectory::flatten() const {
  check();
  const int t = horizon();
  Vector z(flat_size(t));
  for (int i = 0; i <= t; ++i) z.segment<4>(4 * i) = states.row(i).transpose();
  for (int i = 0; i < t; ++i) z.segment<2>(4 * (t + 1) + 2 * i) = actions.row(i).transpose();
  return z;
}

Trajectory Trajectory::unflatten(const Vector& z, int horizon) {
  if (horizon < 1) throw InputError("horizon must be >= 1");
  if (z.size() != flat_size(horizon)) throw InputError("flat trajectory has the wrong length");
  Trajectory tau;
  tau.states.resize(horizon + 1, 4);
  tau.actions.resize(horizon, 2);
  for (int i = 0; i <= horizon; ++i) tau.states.row(i) = z.segment<4>(4 * i).transpose();
  for (int i = 0; i < horizon; ++i) {
    tau.actions.row(i) = z.segment<2>(4 * (horizon + 1) + 2 * i).transpose();
  }
  return tau;
}

void Trajectory::check() const {
  if (states.cols() != 4 || actions.cols() != 2) {
    throw InputError("trajectory states are 4D and actions 2D");
  }
  if (actions.rows() < 1 || states.rows() != actions.rows() + 1) {
    throw InputError("trajectory needs T >= 1 actions and T + 1 states");
  }
  if (!states.allFinite() || !actions.allFinite()) throw InputError("trajectory is not finite");
}

Trajectory rollout(const MazeEnv& env, const Vector& s0, const Matrix& actions) {
  if (s0.size() != 4 || actions.cols() != 2 || actions.rows() < 1) {
    throw InputError("rollout needs a 4D state and T x 2 actions");
  }
  Trajectory tau;
  tau.actions = actions;
  tau.states.resize(actions.rows() + 1, 4);
  tau.states.row(0) = s0.transpose();
  for (Eigen::Index i = 0; i < actions.rows(); ++i) {
    tau.states.row(i + 1) =
        env.step(tau.states.row(i).transpose(), actions.row(i).transpose()).transpose();
  }
  return tau;
}

Trajectory polyline_trajectory(const MazeEnv& env, const std::vector<Vector>& waypoints,
                               int horizon) {
  if (horizon < 1) throw InputError("horizon must be >= 1");
  if (waypoints.empty()) throw InputError("polyline needs at least one waypoint");
  std::vector<double> cum{0.0};
  for (std::size_t k = 1; k < waypoints.size(); ++k) {
    cum.push_back(cum.back() + (waypoints[k] - waypoints[k - 1]).norm());
  }
  const double total = cum.back();
  Matrix pos(horizon + 1, 2);
  std::size_t seg = 0;
  for (int i = 0; i <= horizon; ++i) {
    const double s = total * i / horizon;
    while (seg + 2 < waypoints.size() && cum[seg + 1] < s) ++seg;
    if (waypoints.size() == 1 || total == 0.0) {
      pos.row(i) = waypoints[0].transpose();
      continue;
    }
    const double len = cum[seg + 1] - cum[seg];
    const double u = len > 0.0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 0.0;
    pos.row(i) = ((1.0 - u) * waypoints[seg] + u * waypoints[seg + 1]).transpose();
  }
  Trajectory tau;
  tau.states = Matrix::Zero(horizon + 1, 4);
  tau.actions = Matrix::Zero(horizon, 2);
  tau.states.block(0, 0, horizon + 1, 2) = pos;
  for (int i = 1; i <= horizon; ++i) {
    tau.states.block<1, 2>(i, 2) = (pos.row(i) - pos.row(i - 1)) / env.dt;
    tau.actions.row(i - 1) =
        (tau.states.block<1, 2>(i, 2) - tau.states.block<1, 2>(i - 1, 2)) / env.dt;
  }
  return tau;
}

void GoalFactor::validate() const {
  if (start.size() != 4) throw ConfigError("goal factor start must be a 4D state");
  if (goal.size() != 2) throw ConfigError("goal factor goal must be a 2D position");
  if (!(stiffness > 0.0)) throw ConfigError("goal stiffness must be positive");
}

namespace {

// Shared evaluation so the scalar and gradient paths cannot drift apart.
// grad, when non-null, has the flat layout of Trajectory::flatten().
double markov_eval(const MazeEnv& env, const Vector& z, int t, Vector* grad) {
  const double dt = env.dt, prec = env.dynamics_precision;
  const Eigen::Index a0 = 4 * (t + 1);
  double e = 0.0;
  for (int i = 1; i <= t; ++i) {
    const auto prev = z.segment<4>(4 * (i - 1));
    const auto a = z.segment<2>(a0 + 2 * (i - 1));
    Eigen::Vector4d pred;
    pred.tail<2>() = prev.tail<2>() + dt * a;
    pred.head<2>() = prev.head<2>() + dt * pred.tail<2>();
    const Eigen::Vector4d r = z.segment<4>(4 * i) - pred;
    e += 0.5 * prec * r.squaredNorm();
    if (grad) {
      grad->segment<4>(4 * i) += prec * r;
      // Transposed Jacobians of pred with respect to s_{i-1} and a_i.
      grad->segment<2>(4 * (i - 1)) -= prec * r.head<2>();
      grad->segment<2>(4 * (i - 1) + 2) -= prec * (dt * r.head<2>() + r.tail<2>());
      grad->segment<2>(a0 + 2 * (i - 1)) -= prec * (dt * dt * r.head<2>() + dt * r.tail<2>());
    }
    for (int k = 0; k < 2; ++k) {
      const double h = std::abs(a[k]) - env.force_bound;
      if (h > 0.0) {
        e += env.force_weight * h * h;
        if (grad) (*grad)[a0 + 2 * (i - 1) + k] += 2.0 * env.force_weight * h * (a[k] > 0 ? 1.0 : -1.0);
      }
    }
  }
  return e;
}

double goal_eval(const GoalFactor& f, const Vector& z, int t, Vector* grad) {
  const Eigen::Vector2d d0 = z.segment<2>(0) - f.start.head<2>();
  const Eigen::Vector2d d1 = z.segment<2>(4 * t) - f.goal;
  if (grad) {
    grad->segment<2>(0) += 2.0 * f.stiffness * d0;
    grad->segment<2>(4 * t) += 2.0 * f.stiffness * d1;
  }
  return f.stiffness * (d0.squaredNorm() + d1.squaredNorm());
}

double wall_eval(const MazeEnv& env, const Vector& z, int t, Vector* grad) {
  // Penalize the states and evenly spaced points on the segments between
  // them, so a path cannot hop over a thin wall between two steps.
  const int sub = env.wall_substeps;
  double e = 0.0;
  auto point = [&](int i, double u) {
    const double x = u == 0.0 ? z[4 * i] : (1.0 - u) * z[4 * (i - 1)] + u * z[4 * i];
    const double y = u == 0.0 ? z[4 * i + 1] : (1.0 - u) * z[4 * (i - 1) + 1] + u * z[4 * i + 1];
    double g[2];
    const double h = env.wall_margin - env.sdf(x, y, grad ? g : nullptr);
    if (h <= 0.0) return;
    e += env.wall_weight * h * h;
    if (!grad) return;
    const double c = -2.0 * env.wall_weight * h;
    if (u == 0.0) {
      (*grad)[4 * i] += c * g[0];
      (*grad)[4 * i + 1] += c * g[1];
      return;
    }
    (*grad)[4 * (i - 1)] += (1.0 - u) * c * g[0];
    (*grad)[4 * (i - 1) + 1] += (1.0 - u) * c * g[1];
    (*grad)[4 * i] += u * c * g[0];
    (*grad)[4 * i + 1] += u * c * g[1];
  };
  point(0, 0.0);
  for (int i = 1; i <= t; ++i) {
    for (int k = 1; k < sub; ++k) point(i, static_cast<double>(k) / sub);
    point(i, 0.0);
  }
  return e;
}

template <class Eval>
class TrajectoryEnergy final : public EnergyFunction {
 public:
  TrajectoryEnergy(int horizon, Eval eval) : horizon_(horizon), eval_(std::move(eval)) {}
  int dim() const override { return Trajectory::flat_size(horizon_); }
  double energy(const Vector& x) const override {
    check_dim(x);
    return eval_(x, horizon_, nullptr);
  }
  void gradient(const Vector& x, Vector& grad) const override {
    energy_and_gradient(x, grad);
  }
  double energy_and_gradient(const Vector& x, Vector& grad) const override {
    check_dim(x);
    grad.setZero(dim());
    return eval_(x, horizon_, &grad);
  }

 private:
  int horizon_;
  Eval eval_;
};

template <class Eval>
EnergyPtr make_trajectory_energy(int horizon, Eval eval) {
  if (horizon < 1) throw InputError("horizon must be >= 1");
  return std::make_shared<TrajectoryEnergy<Eval>>(horizon, std::move(eval));
}

}  // namespace

double markov_traj_energy(const MazeEnv& env, const Trajectory& tau) {
  return markov_eval(env, tau.flatten(), tau.horizon(), nullptr);
}

double goal_energy(const GoalFactor& factor, const Trajectory& tau) {
  factor.validate();
  return goal_eval(factor, tau.flatten(), tau.horizon(), nullptr);
}

double wall_energy(const MazeEnv& env, const Trajectory& tau) {
  if (env.wall_substeps < 1) throw ConfigError("wall_substeps must be >= 1");
  return wall_eval(env, tau.flatten(), tau.horizon(), nullptr);
}

double wall_penetration(const MazeEnv& env, const Trajectory& tau, int substeps) {
  tau.check();
  if (substeps < 1) throw InputError("substeps must be >= 1");
  double worst = std::max(0.0, -env.sdf(tau.states(0, 0), tau.states(0, 1)));
  for (Eigen::Index i = 1; i < tau.states.rows(); ++i) {
    for (int k = 1; k <= substeps; ++k) {
      const double u = static_cast<double>(k) / substeps;
      const double x = (1.0 - u) * tau.states(i - 1, 0) + u * tau.states(i, 0);
      const double y = (1.0 - u) * tau.states(i - 1, 1) + u * tau.states(i, 1);
      worst = std::max(worst, -env.sdf(x, y));
    }
  }
  return worst;
}

EnergyPtr markov_energy_fn(const MazeEnv& env, int horizon) {
  return make_trajectory_energy(horizon, [env](const Vector& z, int t, Vector* g) {
    return markov_eval(env, z, t, g);
  });
}

EnergyPtr goal_energy_fn(const GoalFactor& factor, int horizon) {
  factor.validate();
  return make_trajectory_energy(horizon, [factor](const Vector& z, int t, Vector* g) {
    return goal_eval(factor, z, t, g);
  });
}

EnergyPtr wall_energy_fn(const MazeEnv& env, int horizon) {
  if (env.wall_substeps < 1) throw ConfigError("wall_substeps must be >= 1");
  return make_trajectory_energy(horizon, [env](const Vector& z, int t, Vector* g) {
    return wall_eval(env, z, t, g);
  });
}

EnergyPtr plan_energy_fn(const MazeEnv& env, const GoalFactor& factor, int horizon) {
  return product_energy({{markov_energy_fn(env, horizon), 1.0},
                         {goal_energy_fn(factor, horizon), 1.0},
                         {wall_energy_fn(env, horizon), 1.0}});
}

void PlanConfig::validate() const {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (particles < 1 || steps < 1) throw ConfigError("particles and steps must be >= 1");
  if (!(temp_start > 0.0) || !(temp_end > 0.0)) throw ConfigError("temperatures must be positive");
  if (!(success_radius > 0.0)) throw ConfigError("success radius must be positive");
  if (max_waypoints < 0) throw ConfigError("max_waypoints must be >= 0");
  if (sampler.kernel != Kernel::ULA && sampler.kernel != Kernel::MALA) {
    throw ConfigError("planning supports the ULA and MALA kernels");
  }
  sampler.validate();
}

namespace {

Vector random_free_point(const MazeEnv& env, Rng& rng) {
  for (int tries = 0; tries < 100000; ++tries) {
    const double x = env.cols() * rng.uniform();
    const double y = env.rows() * rng.uniform();
    if (env.sdf(x, y) > env.wall_margin) return Eigen::Vector2d(x, y);
  }
  throw ConfigError("could not find a free point in the maze");
}

}  // namespace

PlanResult plan(const MazeEnv& env, const GoalFactor& factor, const PlanConfig& cfg,
                int n_runs) {
  cfg.validate();
  factor.validate();
  if (n_runs < 1) throw ConfigError("plan needs n_runs >= 1");
  const Eigen::Vector2d start = factor.start.head<2>();
  if (!env.is_free(start[0], start[1]) || !env.is_free(factor.goal[0], factor.goal[1])) {
    throw ConfigError("start and goal must lie in free space");
  }
  const EnergyPtr target = plan_energy_fn(env, factor, cfg.horizon);
  const double ratio = cfg.steps > 1 ? std::pow(cfg.temp_end / cfg.temp_start,
                                                1.0 / (cfg.steps - 1))
                                     : 1.0;
  PlanResult result;
  int successes = 0;
  for (int run = 0; run < n_runs; ++run) {
    const std::uint64_t run_seed = mix_seed(cfg.sampler.seed, static_cast<std::uint64_t>(run));
    PlanRun best;
    best.energy = std::numeric_limits<double>::infinity();
    for (int p = 0; p < cfg.particles; ++p) {
      ChainState c(Vector(), mix_seed(run_seed, static_cast<std::uint64_t>(p)));
      std::vector<Vector> waypoints{start};
      const int vias = static_cast<int>(c.rng.index(cfg.max_waypoints + 1));
      for (int k = 0; k < vias; ++k) waypoints.push_back(random_free_point(env, c.rng));
      waypoints.push_back(factor.goal);
      c.x = polyline_trajectory(env, waypoints, cfg.horizon).flatten();

      SamplerConfig sc = cfg.sampler;
      double temp = cfg.temp_start;
      bool ok = true;
      for (int k = 0; k < cfg.steps; ++k, temp *= ratio) {
        // Drift step fixed at step_size; noise shrinks with the temperature.
        sc.temperature = temp;
        sc.step_size = cfg.sampler.step_size * temp;
        try {
          mcmc_step(*target, c, sc);
        } catch (const ChainError&) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      const double e = target->energy(c.x);
      if (e < best.energy) {
        best.energy = e;
        best.best = Trajectory::unflatten(c.x, cfg.horizon);
      }
    }
    if (std::isfinite(best.energy)) {
      const Eigen::Vector2d end = best.best.states.block<1, 2>(cfg.horizon, 0).transpose();
      best.endpoint_error = (end - factor.goal).norm();
      best.penetration = wall_penetration(env, best.best);
      best.success = best.endpoint_error <= cfg.success_radius && best.penetration == 0.0;
    }
    successes += best.success ? 1 : 0;
    result.runs.push_back(std::move(best));
  }
  result.success_rate = static_cast<double>(successes) / n_runs;
  return result;
}

}  // namespace compgen
