#pragma once

#include "compgen/diffused.hpp"
#include "compgen/energy.hpp"
#include "compgen/rng.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace compgen {

/// How the injected Gaussian noise of a Langevin step is scaled.
enum class NoiseConvention {
  Standard,      ///< sqrt(2 eta) xi: the ULA that targets exp(-E)
  ScaledEta,  ///< sqrt(2) eta xi, as some derivations write it
};

enum class Kernel { ULA, MALA, HMC, UHMC };

const char* kernel_name(Kernel k);
Kernel kernel_from_name(const std::string& name);

struct SamplerConfig {
  /// Langevin step eta (ULA/MALA) or leapfrog step (HMC). In the annealed
  /// sampler the per-level step is step_scale * beta_t instead.
  double step_size = 0.01;
  int steps_per_level = 5;
  NoiseConvention noise = NoiseConvention::Standard;
  double temperature = 1.0;
  int leapfrog_steps = 10;
  std::uint64_t seed = 0;
  Kernel kernel = Kernel::ULA;
  double step_scale = 1.0;

  /// Throws ConfigError for non-positive steps, K < 1 or L < 1.
  void validate() const;
};

/// State of one chain. Holds the chain's own generator and scratch space.
struct ChainState {
  Vector x;
  int level = 0;
  Rng rng;
  std::uint64_t accepted = 0;
  std::uint64_t proposed = 0;

  ChainState() = default;
  ChainState(Vector x0, std::uint64_t seed, int level = 0)
      : x(std::move(x0)), level(level), rng(seed) {}

  double acceptance_rate() const {
    return proposed == 0 ? 1.0 : static_cast<double>(accepted) / proposed;
  }

  // scratch reused across steps
  Vector grad, proposal, proposal_grad, noise, momentum;
};

struct StepResult {
  bool accepted = true;
  double accept_prob = 1.0;
};

/// Mean and isotropic standard deviation of a Gaussian transition kernel.
struct GaussianKernelMoments {
  Vector mean;
  double stddev = 0.0;
};

/// Noise coefficient c in x' = m(x) + c xi for a Langevin step of size eta.
double langevin_noise_scale(double eta, NoiseConvention convention);

/// x' = x - eta grad E(x) / temperature + c xi. Throws ChainError when the
/// gradient or the new state is not finite.
StepResult ula_step(const EnergyFunction& e, ChainState& state,
                    const SamplerConfig& cfg);

/// ULA proposal plus a Metropolis correction with the exact forward and
/// reverse Gaussian proposal densities; leaves exp(-E / temperature)
/// invariant under either noise convention.
StepResult mala_step(const EnergyFunction& e, ChainState& state,
                     const SamplerConfig& cfg);

/// Log acceptance ratio of a MALA move x -> y (exposed for tests).
double mala_log_accept_ratio(const EnergyFunction& e, const Vector& x,
                             const Vector& y, const SamplerConfig& cfg);

/// Leapfrog HMC with fresh N(0, I) momentum. cfg.kernel == UHMC accepts every
/// finite trajectory; non-finite trajectories are always rejected.
StepResult hmc_step(const EnergyFunction& e, ChainState& state,
                    const SamplerConfig& cfg);

/// Result of integrating one leapfrog trajectory (exposed for tests).
struct LeapfrogResult {
  Vector x, momentum;
  double initial_hamiltonian = 0.0;
  double final_hamiltonian = 0.0;
  bool finite = true;
};
LeapfrogResult leapfrog(const EnergyFunction& e, const Vector& x,
                        const Vector& momentum, double step, int steps,
                        double temperature = 1.0);

/// Dispatch on cfg.kernel.
StepResult mcmc_step(const EnergyFunction& e, ChainState& state,
                     const SamplerConfig& cfg);

/// Standard deviation convention of the fixed-level reverse kernel.
enum class ReverseNoise {
  SqrtBeta,  ///< std sqrt(beta_t): the usual "variance beta_t" reading
  Beta,      ///< std beta_t: the additive term beta_t xi read literally
};

/// Moments of the fixed-level reverse kernel at x:
///   mean = x - beta_t / sqrt(1 - abar_t) * eps(x, t)
///   std  = noise_scale * (sqrt(beta_t) or beta_t)
GaussianKernelMoments reverse_step_moments(const DiffusedEnergyFamily& family,
                                           const Vector& x, int t,
                                           ReverseNoise noise, double noise_scale);

/// Moments of ula_step at x computed from the energy gradient.
GaussianKernelMoments ula_step_moments(const EnergyFunction& e, const Vector& x,
                                       const SamplerConfig& cfg);

/// One reverse-diffusion step that stays at level state.level (no 1/sqrt(alpha)
/// rescale, since the chain does not move between levels).
void reverse_step(const DiffusedEnergyFamily& family, ChainState& state,
                  ReverseNoise noise, double noise_scale);

struct LevelDiagnostics {
  int level = 0;
  double step_size = 0.0;
  double acceptance_rate = 1.0;
};

struct SampleBatch {
  Matrix samples;                  // n x D, row i = chain i
  std::vector<bool> failed;        // per chain
  std::vector<std::string> errors; // per chain, empty when ok
  std::vector<LevelDiagnostics> levels;
  double ess = 0.0;                // of coordinate 0 along the diagnostic trace
  std::size_t failures() const;
  /// Rows of chains that finished.
  Matrix good_samples() const;
};

/// Extra options that are not part of the per-step config.
struct AnnealOptions {
  /// Run K steps on the level-0 slice when the family defines it.
  bool final_clean_level = true;
  /// Steps of the extra trace used for the ESS diagnostic (0 disables it).
  int ess_trace_steps = 200;
};

/// Annealed MCMC over a (composed) family: x ~ N(0, I), then for t = T..1
/// run K steps of the configured kernel targeting exp(-E(., t)) with
/// eta_t = step_scale * beta_t, and finally K steps on the t = 0 slice (with
/// eta = step_scale * beta_1). Chain i uses seed mix_seed(cfg.seed, i).
/// Divergent chains are recorded as failures; the rest of the batch continues.
SampleBatch annealed_compose_sample(const DiffusedEnergyFamily& family,
                                    const SamplerConfig& cfg, int n_samples,
                                    const AnnealOptions& options = {});

/// Plain ancestral reverse diffusion on a family's score, one step per level:
///   x_{t-1} = (x_t - beta_t / sqrt(1 - abar_t) eps(x_t, t)) / sqrt(alpha_t)
///             + sqrt(beta_t) z   (no noise on the last step).
SampleBatch reverse_diffusion_sample(const DiffusedEnergyFamily& family,
                                     std::uint64_t seed, int n_samples);

using DensityFn = std::function<double(const Vector&)>;

/// Histogram settings for comparing a batch against a reference density.
struct HistogramSpec {
  int bins = 100;
  std::vector<std::pair<double, double>> range;  // one per dimension
};

struct CaveatReport {
  SampleBatch naive;
  SampleBatch annealed;
  double kl_naive = 0.0;
  double kl_annealed = 0.0;
  double kl_ratio = 0.0;  // kl_naive / kl_annealed
};

/// Samples a composed family by naive reverse diffusion on its composed score
/// and by the annealed sampler, and scores both against the true composed
/// level-0 density with histogram KL.
CaveatReport naive_reverse_on_composed(const DiffusedEnergyFamily& family,
                                       const SamplerConfig& cfg, int n_samples,
                                       const DensityFn& reference,
                                       const HistogramSpec& hist);

}  // namespace compgen
