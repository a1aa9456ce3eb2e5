#include "compgen/fig4.hpp"

#include "compgen/compose.hpp"
#include "compgen/error.hpp"
#include "compgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace compgen {

GmmEnergy Fig4Config::default_p1() {
  return GmmEnergy({0.5, 0.5}, {Eigen::Vector2d(-1.2, 0.0), Eigen::Vector2d(1.2, 0.0)},
                   {0.3, 0.3});
}

GmmEnergy Fig4Config::default_p2() {
  return GmmEnergy({0.5, 0.5}, {Eigen::Vector2d(0.0, -1.2), Eigen::Vector2d(0.0, 1.2)},
                   {0.3, 0.3});
}

void Fig4Config::validate() const {
  if (p1.dim() != 2 || p2.dim() != 2) throw ConfigError("fig4 factors must be 2D");
  if (n_grid.empty()) throw ConfigError("fig4 needs at least one N");
  for (int n : n_grid) {
    if (n < train.batch_size) throw ConfigError("every N must be at least the batch size");
  }
  if (seeds < 1) throw ConfigError("fig4 needs seeds >= 1");
  if (eval_samples < 1000) throw ConfigError("eval_samples must be >= 1000");
  if (bins < 1 || !(range > 0.0)) throw ConfigError("bad histogram settings");
  if (mixture_weights.size() != 2) throw ConfigError("mixture_weights needs two entries");
  if (sampler.kernel != Kernel::ULA) throw ConfigError("learned families support ULA only");
  train.validate();
  sampler.validate();
}

GmmEnergy fig4_target(const Fig4Config& cfg) {
  if (cfg.composition == Fig4Config::Composition::Product) return product_of_gmms(cfg.p1, cfg.p2);
  return mixture_of_gmms({cfg.p1, cfg.p2}, cfg.mixture_weights);
}

Matrix sample_gmm(const GmmEnergy& g, int n, Rng& rng) {
  Matrix out(n, g.dim());
  for (int i = 0; i < n; ++i) out.row(i) = g.sample(rng).transpose();
  return out;
}

Matrix sample_composed(const Fig4Config& cfg, int n, Rng& rng) {
  Matrix out(n, 2);
  if (cfg.composition == Fig4Config::Composition::Mixture) {
    for (int i = 0; i < n; ++i) {
      const GmmEnergy& g = rng.uniform() < cfg.mixture_weights[0] ? cfg.p1 : cfg.p2;
      out.row(i) = g.sample(rng).transpose();
    }
    return out;
  }
  double envelope = 0.0;
  for (std::size_t k = 0; k < cfg.p2.components(); ++k) {
    envelope += cfg.p2.weights()[k] / (2.0 * std::numbers::pi * cfg.p2.variances()[k]);
  }
  for (int i = 0; i < n;) {
    const Vector x = cfg.p1.sample(rng);
    if (rng.uniform() * envelope <= cfg.p2.density(x)) out.row(i++) = x.transpose();
  }
  return out;
}

namespace {

struct Trained {
  std::shared_ptr<const ScoreNetFamily> family;
  double final_loss = 0.0;
};

Trained fit(const Fig4Config& cfg, const Matrix& data, std::uint64_t seed,
            const std::string& tag) {
  TrainConfig tc = cfg.train;
  tc.seed = mix_seed(seed, 1);
  const ScoreNet init(2, cfg.hidden, mix_seed(seed, 2));
  TrainResult r = train(init, {data, tag}, cfg.schedule, tc);
  Trained t;
  t.final_loss = r.curve.loss.empty() ? 0.0 : r.curve.loss.back();
  t.family = std::make_shared<ScoreNetFamily>(std::make_shared<ScoreNet>(std::move(r.net)),
                                              cfg.schedule);
  return t;
}

Matrix sample_single(const Fig4Config& cfg, const DiffusedEnergyFamily& f, int n,
                     std::uint64_t seed) {
  if (cfg.single_sampler == Fig4Config::Sampler::Reverse) {
    return reverse_diffusion_sample(f, seed, n).good_samples();
  }
  SamplerConfig sc = cfg.sampler;
  sc.seed = seed;
  AnnealOptions opt;
  opt.ess_trace_steps = 0;
  return annealed_compose_sample(f, sc, n, opt).good_samples();
}

double kl_against(const Fig4Config& cfg, const GmmEnergy& target, const Matrix& samples) {
  return histogram_kl(samples, [&](const Vector& x) { return target.density(x); }, cfg.bins,
                      {{-cfg.range, cfg.range}, {-cfg.range, cfg.range}});
}

}  // namespace

Fig4Result fig4_experiment(const Fig4Config& cfg) {
  cfg.validate();
  const GmmEnergy target = fig4_target(cfg);
  Fig4Result result;
  const int smallest = *std::min_element(cfg.n_grid.begin(), cfg.n_grid.end());
  for (int n : cfg.n_grid) {
    for (int s = 0; s < cfg.seeds; ++s) {
      const std::uint64_t base =
          mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(n)), static_cast<std::uint64_t>(s));
      Rng data_rng(mix_seed(base, 10));
      const Matrix d1 = sample_gmm(cfg.p1, n, data_rng);
      const Matrix d2 = sample_gmm(cfg.p2, n, data_rng);
      const Matrix dm = sample_composed(cfg, 2 * n, data_rng);

      const Trained f1 = fit(cfg, d1, mix_seed(base, 20), "p1");
      const Trained f2 = fit(cfg, d2, mix_seed(base, 21), "p2");
      const Trained fm = fit(cfg, dm, mix_seed(base, 22), "composed");

      Matrix comp;
      if (cfg.composition == Fig4Config::Composition::Product) {
        const FamilyPtr prod = compose_diffused(
            {{"p1", f1.family}, {"p2", f2.family}},
            CompositionSpec::product({CompositionSpec::leaf("p1"), CompositionSpec::leaf("p2")},
                                     {1.0, 1.0}));
        SamplerConfig sc = cfg.sampler;
        sc.seed = mix_seed(base, 30);
        AnnealOptions opt;
        opt.ess_trace_steps = 0;
        comp = annealed_compose_sample(*prod, sc, cfg.eval_samples, opt).good_samples();
      } else {
        // A mixture of learned models is sampled exactly: pick the factor by
        // its weight, then draw from that factor's model.
        Rng pick(mix_seed(base, 31));
        int n1 = 0;
        for (int i = 0; i < cfg.eval_samples; ++i) n1 += pick.uniform() < cfg.mixture_weights[0];
        const Matrix a = sample_single(cfg, *f1.family, std::max(n1, 1), mix_seed(base, 32));
        const Matrix b =
            sample_single(cfg, *f2.family, std::max(cfg.eval_samples - n1, 1), mix_seed(base, 33));
        comp.resize(a.rows() + b.rows(), 2);
        comp << a, b;
      }
      const Matrix mono = sample_single(cfg, *fm.family, cfg.eval_samples, mix_seed(base, 34));

      Fig4Row row;
      row.n = n;
      row.seed = s;
      row.kl_compositional = kl_against(cfg, target, comp);
      row.kl_monolithic = kl_against(cfg, target, mono);
      row.loss_p1 = f1.final_loss;
      row.loss_p2 = f2.final_loss;
      row.loss_mono = fm.final_loss;
      if (n == smallest && row.kl_compositional < row.kl_monolithic) ++result.wins_at_smallest_n;
      result.rows.push_back(row);
    }
  }
  return result;
}

}  // namespace compgen
