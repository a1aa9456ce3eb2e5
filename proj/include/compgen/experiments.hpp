#pragma once

#include "compgen/io.hpp"
#include "compgen/metrics.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace compgen {

/// One reproducible run: an experiment name, its parameters and a seed.
/// JSON form: {"experiment": name, "seed": int, "params": {...}}; the seed is
/// mandatory, params may be omitted (every experiment has defaults).
struct RunConfig {
  std::string experiment;
  json params = json::object();
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  static RunConfig from_json(const json& j);
  /// Canonical form hashed into reports. out_dir is not part of it.
  json to_json() const;
  /// FNV-1a 64 of the canonical JSON, as 16 hex digits.
  std::string hash() const;
};

/// Names accepted by run_experiment.
const std::vector<std::string>& experiment_names();

/// Output directory after applying the COMPGEN_OUT_DIR override.
std::string resolve_out_dir(const RunConfig& cfg);

/// Runs the named experiment, writes its CSV/JSON/SVG files plus report.json
/// into the output directory and returns the report. Unknown names and
/// unknown or malformed parameters raise ConfigError.
MetricsReport run_experiment(const RunConfig& cfg);

}  // namespace compgen
