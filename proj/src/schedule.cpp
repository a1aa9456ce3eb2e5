#include "compgen/schedule.hpp"

#include "compgen/error.hpp"

#include <string>

namespace compgen {

NoiseSchedule::NoiseSchedule(std::vector<double> betas)
    : betas_(std::move(betas)) {
  if (betas_.empty()) throw ConfigError("noise schedule needs at least one level");
  alpha_bars_.resize(betas_.size() + 1);
  alpha_bars_[0] = 1.0;
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    const double b = betas_[i];
    if (!(b > 0.0 && b < 1.0)) {
      throw ConfigError("beta_" + std::to_string(i + 1) + " = " +
                        std::to_string(b) + " is outside (0, 1)");
    }
    alpha_bars_[i + 1] = alpha_bars_[i] * (1.0 - b);
  }
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > levels()) {
    throw InputError("level " + std::to_string(t) + " outside 1.." +
                     std::to_string(levels()));
  }
  return betas_[t - 1];
}

double NoiseSchedule::alpha(int t) const { return 1.0 - beta(t); }

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > levels()) {
    throw InputError("level " + std::to_string(t) + " outside 0.." +
                     std::to_string(levels()));
  }
  return alpha_bars_[t];
}

NoiseSchedule linear_schedule(int levels, double beta_start, double beta_end) {
  if (levels < 1) throw ConfigError("schedule needs T >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ConfigError("linear schedule needs 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(levels);
  for (int i = 0; i < levels; ++i) {
    const double frac = levels == 1 ? 0.0 : static_cast<double>(i) / (levels - 1);
    betas[i] = beta_start + frac * (beta_end - beta_start);
  }
  NoiseSchedule s(std::move(betas));
  s.beta_start_ = beta_start;
  s.beta_end_ = beta_end;
  return s;
}

}  // namespace compgen
