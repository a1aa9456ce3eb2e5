#pragma once

#include "compgen/compose.hpp"
#include "compgen/constraints.hpp"
#include "compgen/continuous.hpp"
#include "compgen/discrete.hpp"
#include "compgen/gmm.hpp"
#include "compgen/metrics.hpp"
#include "compgen/planning.hpp"
#include "compgen/schedule.hpp"
#include "compgen/score_net.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace compgen {

using json = nlohmann::json;

// ---- JSON ------------------------------------------------------------------
// Readers throw ConfigError with the offending field name.

/// {"weights": [...], "means": [[...], ...], "variances": [...]}. 1D means
/// may also be given as plain numbers.
json gmm_to_json(const GmmEnergy& g);
GmmEnergy gmm_from_json(const json& j);

/// {"T": int, "beta_start": real, "beta_end": real}
json schedule_to_json(const NoiseSchedule& s);
NoiseSchedule schedule_from_json(const json& j);

/// {"op": "product"|"mixture"|"negation"|"leaf", "weights": [...],
///  "children": [...], "ref": name}; negation weights hold [alpha].
json spec_to_json(const CompositionSpec& s);
CompositionSpec spec_from_json(const json& j);

/// {"architecture": {"input_dim", "output_dim", "hidden", "activation",
///  "level_feature", "output_scale"}, "layers": [{"weight": [[row]...], "bias": [...]}, ...]}
json score_net_to_json(const ScoreNet& net);
ScoreNet score_net_from_json(const json& j);

/// {"grid": ["#####", ...], "dt", "force_bound", "dynamics_precision",
///  "force_weight", "wall_weight", "wall_margin", "wall_substeps"}
json maze_to_json(const MazeEnv& env);
MazeEnv maze_from_json(const json& j);

/// Sampler settings; missing fields keep the values of `base`.
SamplerConfig sampler_from_json(const json& j, SamplerConfig base = {});
json sampler_to_json(const SamplerConfig& c);

json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const json& j);

json diagnostics_to_json(const SampleBatch& b);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

// ---- CSV -------------------------------------------------------------------

/// Numeric table. Empty fields read back as NaN.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  ///< -1 when absent
};

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
void write_csv(const std::string& path, const CsvTable& t);
CsvTable read_csv(const std::string& path);

/// Columns chain, failed, x_0..x_{D-1}; failed chains keep their last state.
void write_samples_csv(const std::string& path, const SampleBatch& b);
/// Columns chain, x_0..x_{D-1}.
void write_samples_csv(const std::string& path, const Matrix& samples);
Matrix read_samples_csv(const std::string& path);

/// Columns state, energy (inf for zero-probability states).
void write_tabular_csv(const std::string& path, const TabularDistribution& p);
TabularDistribution read_tabular_csv(const std::string& path, const DiscreteSpace& space);

/// Columns run, step, px, py, vx, vy, ax, ay; step 0 has no action and leaves
/// ax, ay empty.
void write_trajectories_csv(const std::string& path, const std::vector<Trajectory>& taus);
std::vector<Trajectory> read_trajectories_csv(const std::string& path);

/// Columns epoch, loss.
void write_curve_csv(const std::string& path, const TrainingCurve& c);
TrainingCurve read_curve_csv(const std::string& path);

// ---- SVG -------------------------------------------------------------------

struct Range2 {
  double x0 = -3.0, x1 = 3.0, y0 = -3.0, y1 = 3.0;
};

/// Scatter plot of the first two columns. When density is set, iso-lines at
/// fixed fractions of its peak are drawn over the points.
void write_scatter_svg(const std::string& path, const Matrix& points, const Range2& range,
                       const std::function<double(const Vector&)>& density = {},
                       const std::string& title = "");

/// Maze walls with trajectory polylines, start and goal markers.
void write_maze_svg(const std::string& path, const MazeEnv& env,
                    const std::vector<Trajectory>& taus, const Vector& start,
                    const Vector& goal);

/// Disks of one assignment inside the given frame.
void write_disks_svg(const std::string& path, const ConstraintGraph& g,
                     const Vector& assignment, const Box2& frame);

}  // namespace compgen
