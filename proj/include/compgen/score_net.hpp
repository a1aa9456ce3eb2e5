#pragma once

#include "compgen/diffused.hpp"
#include "compgen/rng.hpp"
#include "compgen/schedule.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace compgen {

/// Fully connected denoiser eps_theta(x_t, t). The input is x_t with
/// alpha_bar_t appended as one extra feature; hidden layers use tanh and
/// the output layer is linear with dimension D.
///
/// With OutputScale::NoiseStd the network output g is returned as
/// eps_theta = sqrt(1 - abar_t) * g, so g itself plays the role of the level
/// score and stays O(1) at small t, where the raw eps target is tiny and a
/// bare abar_t feature barely separates the levels.
class ScoreNet {
 public:
  enum class OutputScale { None, NoiseStd };

  struct Layer {
    Matrix weight;  // out x in
    Vector bias;    // out
  };

  ScoreNet() = default;
  /// Glorot-normal weights, zero biases.
  ScoreNet(int dim, std::vector<int> hidden, std::uint64_t seed,
           OutputScale scale = OutputScale::NoiseStd);

  int dim() const { return dim_; }
  const std::vector<int>& hidden() const { return hidden_; }
  OutputScale output_scale() const { return scale_; }
  /// Per-column factor applied to the last layer (all ones for None).
  Vector output_scales(const Vector& alpha_bars) const;
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  /// Predictions for the columns of xs (D x B) with per-column alpha_bar.
  Matrix forward(const Matrix& xs, const Vector& alpha_bars) const;
  Vector forward(const Vector& x, double alpha_bar) const;

  std::size_t parameter_count() const;
  /// Parameters flattened layer by layer: weight (column major), then bias.
  Vector flat() const;
  void set_flat(const Vector& params);

  bool finite() const;
  bool operator==(const ScoreNet& o) const;

 private:
  int dim_ = 0;
  std::vector<int> hidden_;
  OutputScale scale_ = OutputScale::NoiseStd;
  std::vector<Layer> layers_;
};

/// Points stored as rows, plus a note on what generated them.
struct Dataset2D {
  Matrix points;  // n x D
  std::string provenance;
};

/// Noise levels and Gaussian noise for one denoising-loss evaluation.
/// Sharing a draw between the loss and its gradient gives common random
/// numbers for finite-difference checks.
struct DsmDraw {
  std::vector<int> levels;  // one per row, uniform on 1..T
  Matrix eps;               // D x B
};

DsmDraw draw_dsm_noise(int batch, int dim, const NoiseSchedule& schedule, Rng& rng);

/// Mean over the batch of |eps - eps_theta(sqrt(abar) x0 + sqrt(1 - abar) eps, t)|^2.
double dsm_loss(const ScoreNet& net, const Matrix& batch,
                const NoiseSchedule& schedule, const DsmDraw& draw);
/// Same, drawing the levels and noise from rng.
double dsm_loss(const ScoreNet& net, const Matrix& batch,
                const NoiseSchedule& schedule, Rng& rng);

struct LossAndGrads {
  double loss = 0.0;
  std::vector<ScoreNet::Layer> grads;  // same shapes as the net's layers
  Vector flat() const;
};

/// Exact reverse-mode gradient of dsm_loss at a fixed draw.
LossAndGrads backprop_grads(const ScoreNet& net, const Matrix& batch,
                            const NoiseSchedule& schedule, const DsmDraw& draw);
LossAndGrads backprop_grads(const ScoreNet& net, const Matrix& batch,
                            const NoiseSchedule& schedule, Rng& rng);

struct TrainConfig {
  double learning_rate = 2e-3;
  int batch_size = 128;
  int epochs = 50;
  /// When > 0, overrides epochs with a fixed number of optimizer steps so
  /// that runs with different dataset sizes get the same compute.
  int steps = 0;
  /// Learning rate at the last step as a fraction of learning_rate, reached
  /// by linear decay. 1 keeps the rate constant.
  double final_lr_fraction = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainingCurve {
  std::vector<int> epoch;
  std::vector<double> loss;  // mean minibatch loss over the epoch
};

struct TrainResult {
  ScoreNet net;
  TrainingCurve curve;
};

/// Adam on the denoising loss over shuffled minibatches. Deterministic given
/// (net, dataset, cfg). epochs == 0 and steps == 0 returns the net unchanged.
/// Throws TrainingError on a non-finite loss or parameter.
TrainResult train(const ScoreNet& net, const Dataset2D& data,
                  const NoiseSchedule& schedule, const TrainConfig& cfg);

/// A trained denoiser viewed as a family of level scores
/// grad E(x, t) = eps_theta(x, t) / sqrt(1 - abar_t), t = 1..T.
/// It exposes gradients only.
class ScoreNetFamily final : public DiffusedEnergyFamily {
 public:
  ScoreNetFamily(std::shared_ptr<const ScoreNet> net, NoiseSchedule schedule);

  const NoiseSchedule& schedule() const override { return schedule_; }
  int dim() const override { return net_->dim(); }
  bool has_energy() const override { return false; }
  int min_level() const override { return 1; }
  double level_energy(const Vector& x, int t) const override;
  void level_gradient(const Vector& x, int t, Vector& grad) const override;
  void level_gradient_batch(const Matrix& xs, int t, Matrix& grads) const override;
  Vector eps(const Vector& x, int t) const override;

  const ScoreNet& net() const { return *net_; }

 private:
  std::shared_ptr<const ScoreNet> net_;
  NoiseSchedule schedule_;
};

}  // namespace compgen
