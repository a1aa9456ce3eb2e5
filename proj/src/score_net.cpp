#include "compgen/score_net.hpp"

#include "compgen/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace compgen {

ScoreNet::ScoreNet(int dim, std::vector<int> hidden, std::uint64_t seed,
                   OutputScale scale)
    : dim_(dim), hidden_(std::move(hidden)), scale_(scale) {
  if (dim < 1) throw ConfigError("score net dimension must be >= 1");
  if (hidden_.empty()) throw ConfigError("score net needs at least one hidden layer");
  Rng rng(seed);
  int in = dim + 1;
  std::vector<int> widths = hidden_;
  widths.push_back(dim);
  for (int out : widths) {
    if (out < 1) throw ConfigError("layer widths must be >= 1");
    Layer l;
    l.weight.resize(out, in);
    const double sd = std::sqrt(2.0 / (in + out));
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) l.weight(r, c) = sd * rng.normal();
    }
    l.bias = Vector::Zero(out);
    layers_.push_back(std::move(l));
    in = out;
  }
}

namespace {

// tanh through the vectorized exp; about 3x faster than the scalar tanh that
// Eigen falls back to for doubles. Accurate to a few ulps.
template <class Derived>
Matrix tanh_act(const Eigen::MatrixBase<Derived>& z) {
  return (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix();
}

Matrix with_level_feature(const Matrix& xs, const Vector& alpha_bars) {
  Matrix in(xs.rows() + 1, xs.cols());
  in.topRows(xs.rows()) = xs;
  in.row(xs.rows()) = alpha_bars.transpose();
  return in;
}

}  // namespace

Matrix ScoreNet::forward(const Matrix& xs, const Vector& alpha_bars) const {
  if (xs.rows() != dim_) throw InputError("score net input has the wrong dimension");
  if (alpha_bars.size() != xs.cols()) throw InputError("one alpha_bar per column expected");
  Matrix h = with_level_feature(xs, alpha_bars);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix z = layers_[i].weight * h;
    z.colwise() += layers_[i].bias;
    h = i + 1 < layers_.size() ? tanh_act(z) : std::move(z);
  }
  if (scale_ == OutputScale::NoiseStd) h *= output_scales(alpha_bars).asDiagonal();
  return h;
}

Vector ScoreNet::forward(const Vector& x, double alpha_bar) const {
  if (x.size() != dim_) throw InputError("score net input has the wrong dimension");
  Vector h(dim_ + 1);
  h.head(dim_) = x;
  h[dim_] = alpha_bar;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Vector z = layers_[i].weight * h + layers_[i].bias;
    h = i + 1 < layers_.size() ? Vector(tanh_act(z)) : std::move(z);
  }
  if (scale_ == OutputScale::NoiseStd) h *= std::sqrt(1.0 - alpha_bar);
  return h;
}

Vector ScoreNet::output_scales(const Vector& alpha_bars) const {
  if (scale_ == OutputScale::None) return Vector::Ones(alpha_bars.size());
  return (1.0 - alpha_bars.array()).sqrt().matrix();
}

std::size_t ScoreNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

Vector ScoreNet::flat() const {
  Vector v(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index o = 0;
  for (const auto& l : layers_) {
    v.segment(o, l.weight.size()) = l.weight.reshaped();
    o += l.weight.size();
    v.segment(o, l.bias.size()) = l.bias;
    o += l.bias.size();
  }
  return v;
}

void ScoreNet::set_flat(const Vector& params) {
  if (static_cast<std::size_t>(params.size()) != parameter_count()) {
    throw InputError("parameter vector has the wrong length");
  }
  Eigen::Index o = 0;
  for (auto& l : layers_) {
    l.weight.reshaped() = params.segment(o, l.weight.size());
    o += l.weight.size();
    l.bias = params.segment(o, l.bias.size());
    o += l.bias.size();
  }
}

bool ScoreNet::finite() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const Layer& l) {
    return l.weight.allFinite() && l.bias.allFinite();
  });
}

bool ScoreNet::operator==(const ScoreNet& o) const {
  if (dim_ != o.dim_ || hidden_ != o.hidden_ || scale_ != o.scale_ ||
      layers_.size() != o.layers_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].weight != o.layers_[i].weight || layers_[i].bias != o.layers_[i].bias) {
      return false;
    }
  }
  return true;
}

DsmDraw draw_dsm_noise(int batch, int dim, const NoiseSchedule& schedule, Rng& rng) {
  DsmDraw d;
  d.levels.resize(batch);
  d.eps.resize(dim, batch);
  for (int i = 0; i < batch; ++i) {
    d.levels[i] = 1 + static_cast<int>(rng.index(schedule.levels()));
    for (int r = 0; r < dim; ++r) d.eps(r, i) = rng.normal();
  }
  return d;
}

namespace {

struct NoisyInputs {
  Matrix xt;      // D x B
  Vector abars;   // B
};

NoisyInputs noisy_inputs(const Matrix& batch, const NoiseSchedule& schedule,
                         const DsmDraw& draw) {
  const Eigen::Index b = batch.rows();
  if (b == 0) throw InputError("denoising loss of an empty batch");
  if (static_cast<Eigen::Index>(draw.levels.size()) != b || draw.eps.cols() != b ||
      draw.eps.rows() != batch.cols()) {
    throw InputError("noise draw does not match the batch");
  }
  NoisyInputs in;
  in.xt.resize(batch.cols(), b);
  in.abars.resize(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const double ab = schedule.alpha_bar(draw.levels[i]);
    in.abars[i] = ab;
    in.xt.col(i) = std::sqrt(ab) * batch.row(i).transpose() +
                   std::sqrt(1.0 - ab) * draw.eps.col(i);
  }
  return in;
}

}  // namespace

double dsm_loss(const ScoreNet& net, const Matrix& batch,
                const NoiseSchedule& schedule, const DsmDraw& draw) {
  const NoisyInputs in = noisy_inputs(batch, schedule, draw);
  const Matrix out = net.forward(in.xt, in.abars);
  return (draw.eps - out).colwise().squaredNorm().mean();
}

double dsm_loss(const ScoreNet& net, const Matrix& batch,
                const NoiseSchedule& schedule, Rng& rng) {
  const DsmDraw draw =
      draw_dsm_noise(static_cast<int>(batch.rows()), static_cast<int>(batch.cols()),
                     schedule, rng);
  return dsm_loss(net, batch, schedule, draw);
}

Vector LossAndGrads::flat() const {
  std::size_t n = 0;
  for (const auto& l : grads) n += l.weight.size() + l.bias.size();
  Vector v(static_cast<Eigen::Index>(n));
  Eigen::Index o = 0;
  for (const auto& l : grads) {
    v.segment(o, l.weight.size()) = l.weight.reshaped();
    o += l.weight.size();
    v.segment(o, l.bias.size()) = l.bias;
    o += l.bias.size();
  }
  return v;
}

LossAndGrads backprop_grads(const ScoreNet& net, const Matrix& batch,
                            const NoiseSchedule& schedule, const DsmDraw& draw) {
  const NoisyInputs in = noisy_inputs(batch, schedule, draw);
  const auto& layers = net.layers();
  const std::size_t n_layers = layers.size();
  const double b = static_cast<double>(batch.rows());

  // Forward pass keeping every layer input.
  std::vector<Matrix> acts;
  acts.reserve(n_layers + 1);
  acts.push_back(with_level_feature(in.xt, in.abars));
  for (std::size_t i = 0; i < n_layers; ++i) {
    Matrix z = layers[i].weight * acts.back();
    z.colwise() += layers[i].bias;
    if (i + 1 < n_layers) z = tanh_act(z);
    acts.push_back(std::move(z));
  }

  LossAndGrads r;
  const Vector scales = net.output_scales(in.abars);
  const Matrix residual = draw.eps - acts.back() * scales.asDiagonal();
  r.loss = residual.colwise().squaredNorm().mean();
  r.grads.resize(n_layers);

  // dL/d(last layer output), through the per-column output scale.
  Matrix delta = (-2.0 / b) * residual * scales.asDiagonal();
  for (std::size_t i = n_layers; i-- > 0;) {
    r.grads[i].weight = delta * acts[i].transpose();
    r.grads[i].bias = delta.rowwise().sum();
    if (i == 0) break;
    Matrix up = layers[i].weight.transpose() * delta;
    // tanh' = 1 - tanh^2, acts[i] holds the tanh outputs of layer i - 1.
    delta = up.array() * (1.0 - acts[i].array().square());
  }
  return r;
}

LossAndGrads backprop_grads(const ScoreNet& net, const Matrix& batch,
                            const NoiseSchedule& schedule, Rng& rng) {
  const DsmDraw draw =
      draw_dsm_noise(static_cast<int>(batch.rows()), static_cast<int>(batch.cols()),
                     schedule, rng);
  return backprop_grads(net, batch, schedule, draw);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (epochs < 0 || steps < 0) throw ConfigError("epochs and steps must be >= 0");
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0)) {
    throw ConfigError("final_lr_fraction must be in (0, 1]");
  }
}

TrainResult train(const ScoreNet& net, const Dataset2D& data,
                  const NoiseSchedule& schedule, const TrainConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = data.points.rows();
  if (data.points.cols() != net.dim()) throw InputError("dataset dimension does not match the net");
  if (n < cfg.batch_size) {
    throw ConfigError("dataset of " + std::to_string(n) +
                      " points is smaller than the batch size " +
                      std::to_string(cfg.batch_size));
  }
  if (!data.points.allFinite()) throw InputError("dataset has non-finite points");

  TrainResult result{net, {}};
  const long batches_per_epoch = n / cfg.batch_size;
  const long total_steps =
      cfg.steps > 0 ? cfg.steps : static_cast<long>(cfg.epochs) * batches_per_epoch;
  if (total_steps == 0) return result;

  Rng rng(cfg.seed);
  Vector params = result.net.flat();
  Vector m = Vector::Zero(params.size());
  Vector v = Vector::Zero(params.size());
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  Matrix batch(cfg.batch_size, data.points.cols());
  long step = 0;
  int epoch = 0;
  while (step < total_steps) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_loss = 0.0;
    long epoch_batches = 0;
    for (long k = 0; k < batches_per_epoch && step < total_steps; ++k) {
      for (int r = 0; r < cfg.batch_size; ++r) {
        batch.row(r) = data.points.row(order[k * cfg.batch_size + r]);
      }
      const LossAndGrads lg = backprop_grads(result.net, batch, schedule, rng);
      if (!std::isfinite(lg.loss)) {
        throw TrainingError("denoising loss became non-finite at step " +
                            std::to_string(step) + " (epoch " + std::to_string(epoch) + ")");
      }
      const Vector g = lg.flat();
      ++step;
      m = kBeta1 * m + (1.0 - kBeta1) * g;
      v = kBeta2 * v + (1.0 - kBeta2) * g.array().square().matrix();
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      const double progress = total_steps > 1 ? double(step - 1) / double(total_steps - 1) : 0.0;
      const double lr = cfg.learning_rate * (1.0 - (1.0 - cfg.final_lr_fraction) * progress);
      params.array() -= lr * (m.array() / c1) /
                        ((v.array() / c2).sqrt() + kEps);
      if (!params.allFinite()) {
        throw TrainingError("parameters became non-finite at step " + std::to_string(step));
      }
      result.net.set_flat(params);
      epoch_loss += lg.loss;
      ++epoch_batches;
    }
    result.curve.epoch.push_back(epoch++);
    result.curve.loss.push_back(epoch_loss / std::max<long>(epoch_batches, 1));
  }
  return result;
}

ScoreNetFamily::ScoreNetFamily(std::shared_ptr<const ScoreNet> net,
                               NoiseSchedule schedule)
    : net_(std::move(net)), schedule_(std::move(schedule)) {
  if (!net_) throw InputError("score net family needs a net");
}

double ScoreNetFamily::level_energy(const Vector&, int) const {
  throw InputError("a learned denoiser defines level gradients but no energies");
}

Vector ScoreNetFamily::eps(const Vector& x, int t) const {
  check_level(t);
  return net_->forward(x, schedule_.alpha_bar(t));
}

void ScoreNetFamily::level_gradient(const Vector& x, int t, Vector& grad) const {
  check_level(t);
  const double ab = schedule_.alpha_bar(t);
  grad = net_->forward(x, ab) / std::sqrt(1.0 - ab);
}

void ScoreNetFamily::level_gradient_batch(const Matrix& xs, int t, Matrix& grads) const {
  check_level(t);
  const double ab = schedule_.alpha_bar(t);
  grads = net_->forward(xs, Vector::Constant(xs.cols(), ab)) / std::sqrt(1.0 - ab);
}

}  // namespace compgen
