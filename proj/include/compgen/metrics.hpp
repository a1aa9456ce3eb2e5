#pragma once

#include "compgen/energy.hpp"

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace compgen {

/// KL(empirical || reference) between binned samples and a binned reference
/// density on a regular grid over `range` (one interval per dimension, `bins`
/// bins per dimension). The reference is binned by midpoint quadrature with
/// `quad` sub-cells per axis, both sides get 1e-9 additive smoothing per bin,
/// and both are normalized over the grid. Samples outside the range are
/// dropped.
///
/// Throws InputError for fewer than `min_samples` samples, and when the
/// reference has zero mass in a bin that holds samples (widen the range).
double histogram_kl(const Matrix& samples,
                    const std::function<double(const Vector&)>& ref_density,
                    int bins, const std::vector<std::pair<double, double>>& range,
                    int quad = 4, std::size_t min_samples = 1000);

/// Bandwidth value meaning "choose by the median heuristic".
inline constexpr double kMedianBandwidth = -1.0;

/// Unbiased squared MMD with kernel exp(-|x - y|^2 / (2 h^2)). Rows are points.
double mmd_rbf(const Matrix& a, const Matrix& b, double bandwidth = kMedianBandwidth);
/// Biased (V-statistic) squared MMD; zero for identical sets.
double mmd_rbf_biased(const Matrix& a, const Matrix& b,
                      double bandwidth = kMedianBandwidth);
/// Median pairwise distance over the pooled rows (first 1000 of each set).
double median_bandwidth(const Matrix& a, const Matrix& b);

struct EssResult {
  double ess = 0.0;
  bool constant = false;  // chain had zero variance; ess reported as n
};

/// Effective sample size by Geyer's initial positive sequence estimator.
/// Requires at least 100 values.
EssResult ess(const std::vector<double>& chain);

/// Mean and (population) variance.
std::pair<double, double> mean_variance(const std::vector<double>& xs);

/// Named scalar metrics plus run metadata. Thresholds record pass/fail
/// checks that decide a run's exit code.
struct MetricsReport {
  struct Threshold {
    std::string metric;
    std::string op;  // "<", "<=", ">", ">=", "=="
    double bound = 0.0;
    bool passed = false;
  };

  std::string experiment;
  std::map<std::string, double> metrics;
  std::map<std::string, std::string> metadata;
  std::vector<Threshold> thresholds;

  void set(const std::string& name, double value) { metrics[name] = value; }
  /// Records a check of metrics[name] against bound.
  bool check(const std::string& name, const std::string& op, double bound);
  bool all_passed() const;
  /// Throws InputError when a metric is not finite.
  void validate() const;
};

}  // namespace compgen
