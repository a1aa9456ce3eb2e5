#pragma once

#include <vector>

namespace compgen {

/// Diffusion noise schedule with levels t = 1..T. Level 0 is the clean data
/// distribution, with alpha_bar(0) = 1.
class NoiseSchedule {
 public:
  /// Builds from explicit betas; every beta must lie in (0, 1).
  explicit NoiseSchedule(std::vector<double> betas);

  int levels() const { return static_cast<int>(betas_.size()); }

  double beta(int t) const;       // 1 <= t <= T
  double alpha(int t) const;      // 1 - beta(t)
  double alpha_bar(int t) const;  // 0 <= t <= T

  const std::vector<double>& betas() const { return betas_; }

  bool operator==(const NoiseSchedule& other) const {
    return betas_ == other.betas_;
  }

  /// Construction parameters when built by linear_schedule(); zero otherwise.
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }

 private:
  friend NoiseSchedule linear_schedule(int, double, double);

  std::vector<double> betas_;
  std::vector<double> alpha_bars_;  // size T + 1
  double beta_start_ = 0.0;
  double beta_end_ = 0.0;
};

/// beta_t linearly interpolated from beta_start (t = 1) to beta_end (t = T).
NoiseSchedule linear_schedule(int levels, double beta_start, double beta_end);

}  // namespace compgen
