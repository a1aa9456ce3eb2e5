#include "compgen/continuous.hpp"

#include "compgen/error.hpp"
#include "compgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace compgen {

const char* kernel_name(Kernel k) {
  switch (k) {
    case Kernel::ULA: return "ula";
    case Kernel::MALA: return "mala";
    case Kernel::HMC: return "hmc";
    case Kernel::UHMC: return "uhmc";
  }
  return "?";
}

Kernel kernel_from_name(const std::string& name) {
  if (name == "ula") return Kernel::ULA;
  if (name == "mala") return Kernel::MALA;
  if (name == "hmc") return Kernel::HMC;
  if (name == "uhmc") return Kernel::UHMC;
  throw ConfigError("unknown kernel '" + name + "' (expected ula, mala, hmc, uhmc)");
}

void SamplerConfig::validate() const {
  if (!(step_size > 0.0)) throw ConfigError("step size must be positive");
  if (!(step_scale > 0.0)) throw ConfigError("step scale must be positive");
  if (steps_per_level < 1) throw ConfigError("steps per level K must be >= 1");
  if (leapfrog_steps < 1) throw ConfigError("leapfrog steps L must be >= 1");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
}

double langevin_noise_scale(double eta, NoiseConvention convention) {
  return convention == NoiseConvention::Standard ? std::sqrt(2.0 * eta)
                                                 : std::sqrt(2.0) * eta;
}

namespace {

void fill_normal(Vector& v, int dim, Rng& rng) {
  v.resize(dim);
  for (int d = 0; d < dim; ++d) v[d] = rng.normal();
}

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw ChainError(std::string("non-finite ") + what + " in chain");
}

}  // namespace

StepResult ula_step(const EnergyFunction& e, ChainState& state,
                    const SamplerConfig& cfg) {
  e.check_dim(state.x);
  const double eta = cfg.step_size;
  e.gradient(state.x, state.grad);
  require_finite(state.grad, "gradient");
  fill_normal(state.noise, e.dim(), state.rng);
  const double c = langevin_noise_scale(eta, cfg.noise);
  state.x.noalias() -= (eta / cfg.temperature) * state.grad;
  state.x.noalias() += c * state.noise;
  require_finite(state.x, "state");
  ++state.proposed;
  ++state.accepted;
  return {};
}

GaussianKernelMoments ula_step_moments(const EnergyFunction& e, const Vector& x,
                                       const SamplerConfig& cfg) {
  GaussianKernelMoments m;
  m.mean = x - (cfg.step_size / cfg.temperature) * e.grad(x);
  m.stddev = langevin_noise_scale(cfg.step_size, cfg.noise);
  return m;
}

double mala_log_accept_ratio(const EnergyFunction& e, const Vector& x,
                             const Vector& y, const SamplerConfig& cfg) {
  const double eta = cfg.step_size;
  const double c = langevin_noise_scale(eta, cfg.noise);
  const double inv_t = 1.0 / cfg.temperature;
  Vector gx(x.size()), gy(y.size());
  const double ux = inv_t * e.energy_and_gradient(x, gx);
  const double uy = inv_t * e.energy_and_gradient(y, gy);
  const double fwd = (y - x + eta * inv_t * gx).squaredNorm();
  const double rev = (x - y + eta * inv_t * gy).squaredNorm();
  return -uy + ux - (rev - fwd) / (2.0 * c * c);
}

StepResult mala_step(const EnergyFunction& e, ChainState& state,
                     const SamplerConfig& cfg) {
  e.check_dim(state.x);
  const int dim = e.dim();
  const double eta = cfg.step_size;
  const double c = langevin_noise_scale(eta, cfg.noise);
  const double inv_t = 1.0 / cfg.temperature;

  const double ux = inv_t * e.energy_and_gradient(state.x, state.grad);
  if (!std::isfinite(ux)) throw ChainError("non-finite energy at the current state");
  require_finite(state.grad, "gradient");
  fill_normal(state.noise, dim, state.rng);
  state.proposal = state.x - (eta * inv_t) * state.grad + c * state.noise;
  state.proposal_grad.resize(dim);
  const double uy = inv_t * e.energy_and_gradient(state.proposal, state.proposal_grad);

  const double u = state.rng.uniform();
  ++state.proposed;
  if (!std::isfinite(uy) || !state.proposal_grad.allFinite()) return {false, 0.0};

  // log q(x | y) - log q(y | x); the forward residual is exactly c * noise.
  const double fwd = c * c * state.noise.squaredNorm();
  const double rev =
      (state.x - state.proposal + (eta * inv_t) * state.proposal_grad).squaredNorm();
  const double log_ratio = -uy + ux - (rev - fwd) / (2.0 * c * c);
  const double accept = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
  if (u < accept) {
    state.x.swap(state.proposal);
    ++state.accepted;
    return {true, accept};
  }
  return {false, accept};
}

LeapfrogResult leapfrog(const EnergyFunction& e, const Vector& x,
                        const Vector& momentum, double step, int steps,
                        double temperature) {
  LeapfrogResult r;
  r.x = x;
  r.momentum = momentum;
  const double inv_t = 1.0 / temperature;
  Vector g(x.size());
  const double u0 = inv_t * e.energy_and_gradient(r.x, g);
  r.initial_hamiltonian = u0 + 0.5 * momentum.squaredNorm();
  r.momentum.noalias() -= 0.5 * step * inv_t * g;
  double u = u0;
  for (int i = 0; i < steps; ++i) {
    r.x.noalias() += step * r.momentum;
    u = inv_t * e.energy_and_gradient(r.x, g);
    if (!std::isfinite(u) || !g.allFinite()) {
      r.finite = false;
      return r;
    }
    const double kick = i + 1 == steps ? 0.5 * step : step;
    r.momentum.noalias() -= kick * inv_t * g;
  }
  r.final_hamiltonian = u + 0.5 * r.momentum.squaredNorm();
  r.finite = std::isfinite(r.final_hamiltonian) && r.x.allFinite();
  return r;
}

StepResult hmc_step(const EnergyFunction& e, ChainState& state,
                    const SamplerConfig& cfg) {
  e.check_dim(state.x);
  if (cfg.leapfrog_steps < 1) throw ConfigError("leapfrog steps L must be >= 1");
  if (!(cfg.step_size > 0.0)) throw ConfigError("leapfrog step must be positive");
  fill_normal(state.momentum, e.dim(), state.rng);
  const LeapfrogResult r = leapfrog(e, state.x, state.momentum, cfg.step_size,
                                    cfg.leapfrog_steps, cfg.temperature);
  const double u = state.rng.uniform();
  ++state.proposed;
  if (!r.finite) return {false, 0.0};
  const double delta = r.initial_hamiltonian - r.final_hamiltonian;
  const double accept =
      cfg.kernel == Kernel::UHMC ? 1.0 : (delta >= 0.0 ? 1.0 : std::exp(delta));
  if (u < accept) {
    state.x = r.x;
    ++state.accepted;
    return {true, accept};
  }
  return {false, accept};
}

StepResult mcmc_step(const EnergyFunction& e, ChainState& state,
                     const SamplerConfig& cfg) {
  switch (cfg.kernel) {
    case Kernel::ULA: return ula_step(e, state, cfg);
    case Kernel::MALA: return mala_step(e, state, cfg);
    case Kernel::HMC:
    case Kernel::UHMC: return hmc_step(e, state, cfg);
  }
  throw ConfigError("unknown kernel");
}

GaussianKernelMoments reverse_step_moments(const DiffusedEnergyFamily& family,
                                           const Vector& x, int t,
                                           ReverseNoise noise, double noise_scale) {
  const NoiseSchedule& s = family.schedule();
  if (t < 1 || t > s.levels()) {
    throw InputError("reverse step level " + std::to_string(t) + " outside 1.." +
                     std::to_string(s.levels()));
  }
  const double beta = s.beta(t);
  GaussianKernelMoments m;
  m.mean = x - (beta / std::sqrt(1.0 - s.alpha_bar(t))) * family.eps(x, t);
  m.stddev = noise_scale * (noise == ReverseNoise::SqrtBeta ? std::sqrt(beta) : beta);
  return m;
}

void reverse_step(const DiffusedEnergyFamily& family, ChainState& state,
                  ReverseNoise noise, double noise_scale) {
  const GaussianKernelMoments m =
      reverse_step_moments(family, state.x, state.level, noise, noise_scale);
  require_finite(m.mean, "reverse mean");
  fill_normal(state.noise, family.dim(), state.rng);
  state.x = m.mean + m.stddev * state.noise;
  ++state.proposed;
  ++state.accepted;
}

std::size_t SampleBatch::failures() const {
  return static_cast<std::size_t>(std::count(failed.begin(), failed.end(), true));
}

Matrix SampleBatch::good_samples() const {
  Matrix out(samples.rows() - static_cast<Eigen::Index>(failures()), samples.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    if (!failed[i]) out.row(r++) = samples.row(i);
  }
  return out;
}

namespace {

void init_chains(std::vector<ChainState>& chains, int n, int dim,
                 std::uint64_t seed, int level) {
  chains.resize(n);
  for (int i = 0; i < n; ++i) {
    chains[i] = ChainState(Vector(dim), mix_seed(seed, i), level);
    for (int d = 0; d < dim; ++d) chains[i].x[d] = chains[i].rng.normal();
  }
}

SampleBatch collect(const std::vector<ChainState>& chains, int dim,
                    const std::vector<bool>& failed,
                    const std::vector<std::string>& errors) {
  SampleBatch b;
  b.samples.resize(static_cast<Eigen::Index>(chains.size()), dim);
  for (std::size_t i = 0; i < chains.size(); ++i) {
    b.samples.row(static_cast<Eigen::Index>(i)) = chains[i].x.transpose();
  }
  b.failed = failed;
  b.errors = errors;
  return b;
}

}  // namespace

SampleBatch annealed_compose_sample(const DiffusedEnergyFamily& family,
                                    const SamplerConfig& cfg, int n_samples,
                                    const AnnealOptions& options) {
  cfg.validate();
  if (n_samples < 1) throw ConfigError("annealed sampling needs n >= 1");
  const bool needs_energy = cfg.kernel != Kernel::ULA;
  if (needs_energy && !family.has_energy()) {
    throw ConfigError(std::string(kernel_name(cfg.kernel)) +
                      " needs energies; this family only provides gradients");
  }
  const NoiseSchedule& s = family.schedule();
  const int dim = family.dim();
  const int top = s.levels();

  std::vector<ChainState> chains;
  init_chains(chains, n_samples, dim, cfg.seed, top);
  std::vector<bool> failed(n_samples, false);
  std::vector<std::string> errors(n_samples);

  std::vector<int> levels;
  for (int t = top; t >= std::max(1, family.min_level()); --t) levels.push_back(t);
  if (options.final_clean_level && family.min_level() == 0) levels.push_back(0);

  std::vector<LevelDiagnostics> diags;
  Matrix xs(dim, n_samples), grads;
  for (int t : levels) {
    SamplerConfig level_cfg = cfg;
    const double eta = cfg.step_scale * s.beta(std::max(t, 1));
    // HMC with one leapfrog step matches MALA when step^2 = 2 eta.
    level_cfg.step_size =
        (cfg.kernel == Kernel::HMC || cfg.kernel == Kernel::UHMC) ? std::sqrt(2.0 * eta)
                                                                   : eta;
    std::uint64_t accepted = 0, proposed = 0;
    for (auto& c : chains) {
      accepted -= c.accepted;
      proposed -= c.proposed;
      c.level = t;
    }
    if (cfg.kernel == Kernel::ULA) {
      // Batched gradients; per-chain noise keeps chains independent.
      const double c_noise = langevin_noise_scale(eta, cfg.noise);
      Vector xi(dim);
      for (int k = 0; k < cfg.steps_per_level; ++k) {
        for (int i = 0; i < n_samples; ++i) xs.col(i) = chains[i].x;
        family.level_gradient_batch(xs, t, grads);
        for (int i = 0; i < n_samples; ++i) {
          if (failed[i]) continue;
          ChainState& c = chains[i];
          for (int d = 0; d < dim; ++d) xi[d] = c.rng.normal();
          if (!grads.col(i).allFinite()) {
            failed[i] = true;
            errors[i] = "non-finite gradient at level " + std::to_string(t);
            continue;
          }
          c.x.noalias() -= (eta / cfg.temperature) * grads.col(i);
          c.x.noalias() += c_noise * xi;
          ++c.proposed;
          ++c.accepted;
          if (!c.x.allFinite()) {
            failed[i] = true;
            errors[i] = "non-finite state at level " + std::to_string(t);
          }
        }
      }
    } else {
      const EnergyPtr target = family.slice(t);
      for (int i = 0; i < n_samples; ++i) {
        if (failed[i]) continue;
        try {
          for (int k = 0; k < cfg.steps_per_level; ++k) {
            mcmc_step(*target, chains[i], level_cfg);
          }
        } catch (const ChainError& err) {
          failed[i] = true;
          errors[i] = std::string(err.what()) + " at level " + std::to_string(t);
        }
      }
    }
    for (auto& c : chains) {
      accepted += c.accepted;
      proposed += c.proposed;
    }
    diags.push_back({t, level_cfg.step_size,
                     proposed == 0 ? 1.0 : static_cast<double>(accepted) / proposed});
  }

  SampleBatch batch = collect(chains, dim, failed, errors);
  batch.levels = std::move(diags);

  if (options.ess_trace_steps >= 100) {
    // Diagnostic continuation of the first healthy chain on the last level;
    // the returned samples are not affected.
    auto it = std::find(failed.begin(), failed.end(), false);
    if (it != failed.end()) {
      ChainState trace = chains[static_cast<std::size_t>(it - failed.begin())];
      const int t = levels.back();
      const EnergyPtr target = family.slice(t);
      SamplerConfig trace_cfg = cfg;
      trace_cfg.step_size = batch.levels.back().step_size;
      std::vector<double> values;
      try {
        for (int k = 0; k < options.ess_trace_steps; ++k) {
          mcmc_step(*target, trace, trace_cfg);
          values.push_back(trace.x[0]);
        }
        batch.ess = ess(values).ess;
      } catch (const ChainError&) {
        batch.ess = 0.0;
      }
    }
  }
  return batch;
}

SampleBatch reverse_diffusion_sample(const DiffusedEnergyFamily& family,
                                     std::uint64_t seed, int n_samples) {
  if (n_samples < 1) throw ConfigError("reverse diffusion needs n >= 1");
  const NoiseSchedule& s = family.schedule();
  const int dim = family.dim();
  std::vector<ChainState> chains;
  init_chains(chains, n_samples, dim, seed, s.levels());
  std::vector<bool> failed(n_samples, false);
  std::vector<std::string> errors(n_samples);
  Matrix xs(dim, n_samples), grads;
  Vector z(dim);
  for (int t = s.levels(); t >= 1; --t) {
    const double beta = s.beta(t);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha(t));
    for (int i = 0; i < n_samples; ++i) xs.col(i) = chains[i].x;
    family.level_gradient_batch(xs, t, grads);
    // beta_t / sqrt(1 - abar_t) * eps = beta_t * grad E(x, t)
    for (int i = 0; i < n_samples; ++i) {
      if (failed[i]) continue;
      ChainState& c = chains[i];
      for (int d = 0; d < dim; ++d) z[d] = c.rng.normal();
      c.x = (c.x - beta * grads.col(i)) * inv_sqrt_alpha;
      if (t > 1) c.x.noalias() += std::sqrt(beta) * z;
      if (!c.x.allFinite()) {
        failed[i] = true;
        errors[i] = "non-finite state at level " + std::to_string(t);
      }
    }
  }
  return collect(chains, dim, failed, errors);
}

CaveatReport naive_reverse_on_composed(const DiffusedEnergyFamily& family,
                                       const SamplerConfig& cfg, int n_samples,
                                       const DensityFn& reference,
                                       const HistogramSpec& hist) {
  CaveatReport r;
  r.naive = reverse_diffusion_sample(family, cfg.seed, n_samples);
  r.annealed = annealed_compose_sample(family, cfg, n_samples);
  r.kl_naive = histogram_kl(r.naive.good_samples(), reference, hist.bins, hist.range);
  r.kl_annealed =
      histogram_kl(r.annealed.good_samples(), reference, hist.bins, hist.range);
  r.kl_ratio = r.kl_naive / std::max(r.kl_annealed, 1e-12);
  return r;
}

}  // namespace compgen
