#include "compgen/metrics.hpp"

#include "compgen/error.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iostream>
#include <limits>

#include <unsupported/Eigen/FFT>

namespace compgen {

double histogram_kl(const Matrix& samples,
                    const std::function<double(const Vector&)>& ref_density,
                    int bins, const std::vector<std::pair<double, double>>& range,
                    int quad, std::size_t min_samples) {
  const int dim = static_cast<int>(samples.cols());
  if (static_cast<std::size_t>(samples.rows()) < min_samples) {
    throw InputError("histogram_kl needs at least " + std::to_string(min_samples) +
                     " samples, got " + std::to_string(samples.rows()));
  }
  if (static_cast<int>(range.size()) != dim) {
    throw InputError("histogram_kl needs one range per dimension");
  }
  if (bins < 1 || quad < 1) throw InputError("histogram_kl needs bins >= 1");
  for (const auto& [lo, hi] : range) {
    if (!(hi > lo)) throw InputError("histogram_kl range must have hi > lo");
  }

  std::size_t cells = 1;
  for (int d = 0; d < dim; ++d) cells *= static_cast<std::size_t>(bins);

  std::vector<double> counts(cells, 0.0);
  std::size_t inside = 0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    std::size_t index = 0;
    bool ok = true;
    for (int d = 0; d < dim; ++d) {
      const auto [lo, hi] = range[d];
      const double v = samples(i, d);
      if (!(v >= lo && v <= hi)) {
        ok = false;
        break;
      }
      int b = static_cast<int>((v - lo) / (hi - lo) * bins);
      b = std::min(b, bins - 1);
      index = index * bins + b;
    }
    if (ok) {
      counts[index] += 1.0;
      ++inside;
    }
  }
  if (inside == 0) throw InputError("histogram_kl: no samples inside the range");

  // Reference mass per bin by midpoint rule on quad^dim sub-cells.
  std::vector<double> ref(cells, 0.0);
  std::vector<int> digit(dim, 0);
  std::vector<int> sub(dim, 0);
  Vector x(dim);
  for (std::size_t c = 0; c < cells; ++c) {
    std::size_t rest = c;
    for (int d = dim - 1; d >= 0; --d) {
      digit[d] = static_cast<int>(rest % bins);
      rest /= bins;
    }
    double mass = 0.0;
    std::fill(sub.begin(), sub.end(), 0);
    while (true) {
      for (int d = 0; d < dim; ++d) {
        const auto [lo, hi] = range[d];
        const double width = (hi - lo) / bins;
        x[d] = lo + width * (digit[d] + (sub[d] + 0.5) / quad);
      }
      mass += ref_density(x);
      int d = dim - 1;
      while (d >= 0 && ++sub[d] == quad) sub[d--] = 0;
      if (d < 0) break;
    }
    ref[c] = mass;
    if (!(mass >= 0.0) || !std::isfinite(mass)) {
      throw InputError("histogram_kl: reference density is negative or not finite");
    }
    if (mass == 0.0 && counts[c] > 0.0) {
      throw InputError(
          "histogram_kl: reference has zero mass in a bin holding samples; "
          "widen the range or check the reference");
    }
  }

  constexpr double kSmooth = 1e-9;
  double ref_total = 0.0;
  for (double m : ref) ref_total += m;
  if (!(ref_total > 0.0)) {
    throw InputError("histogram_kl: reference has no mass on the range; widen it");
  }
  double p_norm = 0.0;
  double q_norm = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    p_norm += counts[c] / inside + kSmooth;
    q_norm += ref[c] / ref_total + kSmooth;
  }
  double kl = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    const double p = (counts[c] / inside + kSmooth) / p_norm;
    const double q = (ref[c] / ref_total + kSmooth) / q_norm;
    kl += p * std::log(p / q);
  }
  return std::max(kl, 0.0);
}

double median_bandwidth(const Matrix& a, const Matrix& b) {
  const Eigen::Index na = std::min<Eigen::Index>(a.rows(), 1000);
  const Eigen::Index nb = std::min<Eigen::Index>(b.rows(), 1000);
  Matrix pooled(na + nb, a.cols());
  pooled.topRows(na) = a.topRows(na);
  pooled.bottomRows(nb) = b.topRows(nb);
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < pooled.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) {
      d.push_back((pooled.row(i) - pooled.row(j)).norm());
    }
  }
  auto mid = d.begin() + d.size() / 2;
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

namespace {

struct KernelSums {
  double aa = 0.0, bb = 0.0, ab = 0.0;  // off-diagonal sums for aa and bb
};

KernelSums kernel_sums(const Matrix& a, const Matrix& b, double h) {
  if (a.rows() < 2 || b.rows() < 2) throw InputError("mmd needs at least 2 points per set");
  if (a.cols() != b.cols()) throw InputError("mmd sets differ in dimension");
  const double inv = 1.0 / (2.0 * h * h);
  KernelSums s;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < a.rows(); ++j) {
      s.aa += 2.0 * std::exp(-(a.row(i) - a.row(j)).squaredNorm() * inv);
    }
  }
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < b.rows(); ++j) {
      s.bb += 2.0 * std::exp(-(b.row(i) - b.row(j)).squaredNorm() * inv);
    }
  }
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      s.ab += std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
    }
  }
  return s;
}

// Fixed argument order, so that swapping the sets gives the same bits.
bool precedes(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) return x.rows() < y.rows();
  return std::lexicographical_compare(x.data(), x.data() + x.size(), y.data(),
                                      y.data() + y.size());
}

}  // namespace

double mmd_rbf(const Matrix& a, const Matrix& b, double bandwidth) {
  if (precedes(b, a)) return mmd_rbf(b, a, bandwidth);
  const double h = bandwidth > 0.0 ? bandwidth : median_bandwidth(a, b);
  const KernelSums s = kernel_sums(a, b, h);
  const double m = static_cast<double>(a.rows());
  const double n = static_cast<double>(b.rows());
  return s.aa / (m * (m - 1.0)) + s.bb / (n * (n - 1.0)) - 2.0 * s.ab / (m * n);
}

double mmd_rbf_biased(const Matrix& a, const Matrix& b, double bandwidth) {
  if (precedes(b, a)) return mmd_rbf_biased(b, a, bandwidth);
  const double h = bandwidth > 0.0 ? bandwidth : median_bandwidth(a, b);
  const KernelSums s = kernel_sums(a, b, h);
  const double m = static_cast<double>(a.rows());
  const double n = static_cast<double>(b.rows());
  return (s.aa + m) / (m * m) + (s.bb + n) / (n * n) - 2.0 * s.ab / (m * n);
}

EssResult ess(const std::vector<double>& chain) {
  const std::size_t n = chain.size();
  if (n < 100) throw InputError("ess needs at least 100 values");
  const auto [mean, var] = mean_variance(chain);
  if (!(var > 0.0)) {
    std::cerr << "warning: ess of a constant chain; reporting its length\n";
    return {static_cast<double>(n), true};
  }
  // Autocovariance of every lag at once through a zero-padded FFT.
  std::size_t padded = 1;
  while (padded < 2 * n) padded <<= 1;
  std::vector<double> centered(padded, 0.0);
  for (std::size_t i = 0; i < n; ++i) centered[i] = chain[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, centered);
  for (auto& c : spectrum) c = std::complex<double>(std::norm(c), 0.0);
  std::vector<double> acov;
  fft.inv(acov, spectrum);
  auto autocorr = [&](std::size_t lag) { return acov[lag] / acov[0]; };
  // Geyer: sum consecutive pairs Gamma_k = rho_{2k} + rho_{2k+1} while they
  // stay positive, enforcing a monotone sequence.
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double gamma = autocorr(2 * k) + autocorr(2 * k + 1);
    if (gamma <= 0.0) break;
    gamma = std::min(gamma, prev);
    prev = gamma;
    sum += gamma;
  }
  const double tau = std::max(2.0 * sum - 1.0, 1.0 / n);
  return {n / tau, false};
}

std::pair<double, double> mean_variance(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : xs) mean += v;
  mean /= xs.size();
  double var = 0.0;
  for (double v : xs) var += (v - mean) * (v - mean);
  return {mean, var / xs.size()};
}

bool MetricsReport::check(const std::string& name, const std::string& op,
                          double bound) {
  auto it = metrics.find(name);
  if (it == metrics.end()) throw InputError("no metric named '" + name + "'");
  const double v = it->second;
  bool ok = false;
  if (op == "<") ok = v < bound;
  else if (op == "<=") ok = v <= bound;
  else if (op == ">") ok = v > bound;
  else if (op == ">=") ok = v >= bound;
  else if (op == "==") ok = v == bound;
  else throw InputError("unknown comparison '" + op + "'");
  thresholds.push_back({name, op, bound, ok});
  return ok;
}

bool MetricsReport::all_passed() const {
  return std::all_of(thresholds.begin(), thresholds.end(),
                     [](const Threshold& t) { return t.passed; });
}

void MetricsReport::validate() const {
  for (const auto& [name, v] : metrics) {
    if (!std::isfinite(v)) throw InputError("metric '" + name + "' is not finite");
  }
}

}  // namespace compgen
