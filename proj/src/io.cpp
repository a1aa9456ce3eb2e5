#include "compgen/io.hpp"

#include "compgen/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace compgen {

namespace {

template <class T>
T field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) {
    throw ConfigError(std::string("missing field '") + name + "'");
  }
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + name + "': " + e.what());
  }
}

template <class T>
T field_or(const json& j, const char* name, T fallback) {
  return j.is_object() && j.contains(name) ? field<T>(j, name) : fallback;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

json gmm_to_json(const GmmEnergy& g) {
  json means = json::array();
  for (const auto& m : g.means()) means.push_back(to_std(m));
  return {{"weights", g.weights()}, {"means", means}, {"variances", g.variances()}};
}

GmmEnergy gmm_from_json(const json& j) {
  const auto weights = field<std::vector<double>>(j, "weights");
  const auto variances = field<std::vector<double>>(j, "variances");
  if (!j.contains("means") || !j["means"].is_array()) throw ConfigError("missing field 'means'");
  std::vector<Vector> means;
  for (const auto& m : j["means"]) {
    if (m.is_number()) {
      means.push_back(Vector::Constant(1, m.get<double>()));
    } else if (m.is_array()) {
      means.push_back(to_eigen(m.get<std::vector<double>>()));
    } else {
      throw ConfigError("field 'means': entries must be numbers or arrays");
    }
  }
  try {
    return GmmEnergy(weights, means, variances);
  } catch (const InputError& e) {
    throw ConfigError(std::string("invalid mixture: ") + e.what());
  }
}

json schedule_to_json(const NoiseSchedule& s) {
  return {{"T", s.levels()}, {"beta_start", s.beta_start()}, {"beta_end", s.beta_end()}};
}

NoiseSchedule schedule_from_json(const json& j) {
  return linear_schedule(field<int>(j, "T"), field<double>(j, "beta_start"),
                         field<double>(j, "beta_end"));
}

json spec_to_json(const CompositionSpec& s) {
  json j = {{"op", op_name(s.op)}};
  if (s.op == CompositionSpec::Op::Leaf) {
    j["ref"] = s.ref;
    return j;
  }
  j["weights"] = s.weights;
  json children = json::array();
  for (const auto& c : s.children) children.push_back(spec_to_json(c));
  j["children"] = children;
  return j;
}

CompositionSpec spec_from_json(const json& j) {
  CompositionSpec s;
  try {
    s.op = op_from_name(field<std::string>(j, "op"));
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  if (s.op == CompositionSpec::Op::Leaf) {
    s.ref = field<std::string>(j, "ref");
  } else {
    s.weights = field_or<std::vector<double>>(j, "weights", {});
    if (!j.contains("children") || !j["children"].is_array()) {
      throw ConfigError("missing field 'children'");
    }
    for (const auto& c : j["children"]) s.children.push_back(spec_from_json(c));
    if (s.weights.empty() && s.op == CompositionSpec::Op::Product) {
      s.weights.assign(s.children.size(), 1.0);
    }
    if (s.weights.empty() && s.op == CompositionSpec::Op::Mixture && !s.children.empty()) {
      s.weights.assign(s.children.size(), 1.0 / s.children.size());
    }
  }
  s.validate();
  return s;
}

json score_net_to_json(const ScoreNet& net) {
  json layers = json::array();
  for (const auto& l : net.layers()) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      rows.push_back(to_std(l.weight.row(r).transpose()));
    }
    layers.push_back({{"weight", rows}, {"bias", to_std(l.bias)}});
  }
  return {{"architecture",
           {{"input_dim", net.dim() + 1},
            {"output_dim", net.dim()},
            {"hidden", net.hidden()},
            {"activation", "tanh"},
            {"level_feature", "alpha_bar"},
            {"output_scale", net.output_scale() == ScoreNet::OutputScale::NoiseStd
                                 ? "sqrt_one_minus_alpha_bar"
                                 : "none"}}},
          {"layers", layers}};
}

ScoreNet score_net_from_json(const json& j) {
  if (!j.contains("architecture")) throw ConfigError("missing field 'architecture'");
  const json& a = j["architecture"];
  const int dim = field<int>(a, "output_dim");
  if (field<int>(a, "input_dim") != dim + 1) {
    throw ConfigError("input_dim must be output_dim + 1");
  }
  if (field<std::string>(a, "activation") != "tanh") throw ConfigError("only tanh nets are supported");
  const auto scale = field_or<std::string>(a, "output_scale", "none");
  if (scale != "none" && scale != "sqrt_one_minus_alpha_bar") {
    throw ConfigError("unknown output_scale '" + scale + "'");
  }
  ScoreNet net(dim, field<std::vector<int>>(a, "hidden"), 0,
               scale == "none" ? ScoreNet::OutputScale::None : ScoreNet::OutputScale::NoiseStd);
  if (!j.contains("layers") || !j["layers"].is_array() ||
      j["layers"].size() != net.layers().size()) {
    throw ConfigError("field 'layers' does not match the architecture");
  }
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    auto& l = net.layers()[i];
    const json& jl = j["layers"][i];
    const auto rows = field<std::vector<std::vector<double>>>(jl, "weight");
    const auto bias = field<std::vector<double>>(jl, "bias");
    if (rows.size() != static_cast<std::size_t>(l.weight.rows()) ||
        bias.size() != static_cast<std::size_t>(l.bias.size())) {
      throw ConfigError("layer " + std::to_string(i) + " has the wrong shape");
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != static_cast<std::size_t>(l.weight.cols())) {
        throw ConfigError("layer " + std::to_string(i) + " has the wrong shape");
      }
      l.weight.row(static_cast<Eigen::Index>(r)) = to_eigen(rows[r]).transpose();
    }
    l.bias = to_eigen(bias);
  }
  if (!net.finite()) throw ConfigError("weights are not finite");
  return net;
}

json maze_to_json(const MazeEnv& env) {
  return {{"grid", env.grid()},
          {"dt", env.dt},
          {"force_bound", env.force_bound},
          {"dynamics_precision", env.dynamics_precision},
          {"force_weight", env.force_weight},
          {"wall_weight", env.wall_weight},
          {"wall_margin", env.wall_margin},
          {"wall_substeps", env.wall_substeps}};
}

MazeEnv maze_from_json(const json& j) {
  MazeEnv env(field<std::vector<std::string>>(j, "grid"));
  env.dt = field_or(j, "dt", env.dt);
  env.force_bound = field_or(j, "force_bound", env.force_bound);
  env.dynamics_precision = field_or(j, "dynamics_precision", env.dynamics_precision);
  env.force_weight = field_or(j, "force_weight", env.force_weight);
  env.wall_weight = field_or(j, "wall_weight", env.wall_weight);
  env.wall_margin = field_or(j, "wall_margin", env.wall_margin);
  env.wall_substeps = field_or(j, "wall_substeps", env.wall_substeps);
  if (!(env.dt > 0.0) || !(env.force_bound > 0.0) || !(env.dynamics_precision > 0.0)) {
    throw ConfigError("dt, force_bound and dynamics_precision must be positive");
  }
  return env;
}

SamplerConfig sampler_from_json(const json& j, SamplerConfig c) {
  if (j.is_null()) return c;
  if (!j.is_object()) throw ConfigError("sampler settings must be an object");
  c.step_size = field_or(j, "step_size", c.step_size);
  c.steps_per_level = field_or(j, "steps_per_level", c.steps_per_level);
  c.temperature = field_or(j, "temperature", c.temperature);
  c.leapfrog_steps = field_or(j, "leapfrog_steps", c.leapfrog_steps);
  c.step_scale = field_or(j, "step_scale", c.step_scale);
  if (j.contains("kernel")) {
    try {
      c.kernel = kernel_from_name(field<std::string>(j, "kernel"));
    } catch (const InputError& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("noise")) {
    const auto n = field<std::string>(j, "noise");
    if (n == "standard") {
      c.noise = NoiseConvention::Standard;
    } else if (n == "scaled-eta") {
      c.noise = NoiseConvention::ScaledEta;
    } else {
      throw ConfigError("noise must be 'standard' or 'scaled-eta'");
    }
  }
  c.validate();
  return c;
}

json sampler_to_json(const SamplerConfig& c) {
  return {{"step_size", c.step_size},
          {"steps_per_level", c.steps_per_level},
          {"noise", c.noise == NoiseConvention::Standard ? "standard" : "scaled-eta"},
          {"temperature", c.temperature},
          {"leapfrog_steps", c.leapfrog_steps},
          {"seed", c.seed},
          {"kernel", kernel_name(c.kernel)},
          {"step_scale", c.step_scale}};
}

json report_to_json(const MetricsReport& r) {
  json th = json::array();
  for (const auto& t : r.thresholds) {
    th.push_back({{"metric", t.metric}, {"op", t.op}, {"bound", t.bound}, {"passed", t.passed}});
  }
  return {{"experiment", r.experiment},
          {"metrics", r.metrics},
          {"metadata", r.metadata},
          {"thresholds", th},
          {"passed", r.all_passed()}};
}

MetricsReport report_from_json(const json& j) {
  MetricsReport r;
  r.experiment = field<std::string>(j, "experiment");
  r.metrics = field<std::map<std::string, double>>(j, "metrics");
  r.metadata = field_or<std::map<std::string, std::string>>(j, "metadata", {});
  for (const auto& t : field_or<json>(j, "thresholds", json::array())) {
    r.thresholds.push_back({field<std::string>(t, "metric"), field<std::string>(t, "op"),
                            field<double>(t, "bound"), field<bool>(t, "passed")});
  }
  return r;
}

json diagnostics_to_json(const SampleBatch& b) {
  json levels = json::array();
  for (const auto& l : b.levels) {
    levels.push_back(
        {{"level", l.level}, {"step_size", l.step_size}, {"acceptance_rate", l.acceptance_rate}});
  }
  return {{"levels", levels},
          {"ess", b.ess},
          {"chains", b.samples.rows()},
          {"failures", b.failures()}};
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw ConfigError("failed writing " + path);
}

// ---- CSV -------------------------------------------------------------------

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_csv(const std::string& path, const CsvTable& t) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << '\n';
  }
  if (!out) throw ConfigError("failed writing " + path);
}

namespace {

double parse_field(const std::string& s, const std::string& path, std::size_t line) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw InputError(path + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + " is empty");
  t.header = split(line);
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw InputError(path + ":" + std::to_string(n) + ": expected " +
                       std::to_string(t.header.size()) + " fields");
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_field(c, path, n));
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace {

std::vector<std::string> coordinate_header(Eigen::Index dim) {
  std::vector<std::string> h;
  for (Eigen::Index d = 0; d < dim; ++d) h.push_back("x_" + std::to_string(d));
  return h;
}

}  // namespace

void write_samples_csv(const std::string& path, const SampleBatch& b) {
  CsvTable t;
  t.header = {"chain", "failed"};
  for (const auto& h : coordinate_header(b.samples.cols())) t.header.push_back(h);
  for (Eigen::Index i = 0; i < b.samples.rows(); ++i) {
    std::vector<double> row{double(i), b.failed[i] ? 1.0 : 0.0};
    for (Eigen::Index d = 0; d < b.samples.cols(); ++d) row.push_back(b.samples(i, d));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

void write_samples_csv(const std::string& path, const Matrix& samples) {
  CsvTable t;
  t.header = {"chain"};
  for (const auto& h : coordinate_header(samples.cols())) t.header.push_back(h);
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    std::vector<double> row{double(i)};
    for (Eigen::Index d = 0; d < samples.cols(); ++d) row.push_back(samples(i, d));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

Matrix read_samples_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  std::vector<int> cols;
  for (int d = 0;; ++d) {
    const int c = t.column("x_" + std::to_string(d));
    if (c < 0) break;
    cols.push_back(c);
  }
  if (cols.empty()) throw InputError(path + " has no x_0 column");
  Matrix m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (std::size_t d = 0; d < cols.size(); ++d) m(i, d) = t.rows[i][cols[d]];
  }
  return m;
}

void write_tabular_csv(const std::string& path, const TabularDistribution& p) {
  CsvTable t;
  t.header = {"state", "energy"};
  for (std::size_t i = 0; i < p.space().size(); ++i) t.rows.push_back({double(i), p.energy(i)});
  write_csv(path, t);
}

TabularDistribution read_tabular_csv(const std::string& path, const DiscreteSpace& space) {
  const CsvTable t = read_csv(path);
  const int si = t.column("state"), ei = t.column("energy");
  if (si < 0 || ei < 0) throw InputError(path + " needs state and energy columns");
  if (t.rows.size() != space.size()) throw InputError(path + " does not cover the space");
  std::vector<double> e(space.size());
  std::vector<bool> seen(space.size(), false);
  for (const auto& row : t.rows) {
    const double s = row[si];
    if (!(s >= 0.0) || s >= static_cast<double>(space.size()) || s != std::floor(s)) {
      throw InputError(path + ": bad state index");
    }
    const auto k = static_cast<std::size_t>(s);
    if (seen[k]) throw InputError(path + ": duplicate state index");
    seen[k] = true;
    e[k] = row[ei];
  }
  return TabularDistribution(space, std::move(e));
}

void write_trajectories_csv(const std::string& path, const std::vector<Trajectory>& taus) {
  CsvTable t;
  t.header = {"run", "step", "px", "py", "vx", "vy", "ax", "ay"};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t r = 0; r < taus.size(); ++r) {
    const Trajectory& tau = taus[r];
    tau.check();
    for (Eigen::Index i = 0; i < tau.states.rows(); ++i) {
      std::vector<double> row{double(r), double(i)};
      for (int k = 0; k < 4; ++k) row.push_back(tau.states(i, k));
      row.push_back(i == 0 ? nan : tau.actions(i - 1, 0));
      row.push_back(i == 0 ? nan : tau.actions(i - 1, 1));
      t.rows.push_back(std::move(row));
    }
  }
  write_csv(path, t);
}

std::vector<Trajectory> read_trajectories_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const char* names[] = {"run", "step", "px", "py", "vx", "vy", "ax", "ay"};
  int col[8];
  for (int k = 0; k < 8; ++k) {
    col[k] = t.column(names[k]);
    if (col[k] < 0) throw InputError(path + " lacks column " + names[k]);
  }
  std::vector<Trajectory> out;
  std::size_t i = 0;
  while (i < t.rows.size()) {
    const double run = t.rows[i][col[0]];
    std::size_t j = i;
    while (j < t.rows.size() && t.rows[j][col[0]] == run) ++j;
    const auto n = static_cast<Eigen::Index>(j - i);
    if (n < 2) throw InputError(path + ": trajectory with fewer than two states");
    Trajectory tau;
    tau.states.resize(n, 4);
    tau.actions.resize(n - 1, 2);
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& row = t.rows[i + k];
      if (row[col[1]] != double(k)) throw InputError(path + ": steps out of order");
      for (int c = 0; c < 4; ++c) tau.states(k, c) = row[col[2 + c]];
      if (k > 0) {
        tau.actions(k - 1, 0) = row[col[6]];
        tau.actions(k - 1, 1) = row[col[7]];
      }
    }
    tau.check();
    out.push_back(std::move(tau));
    i = j;
  }
  return out;
}

void write_curve_csv(const std::string& path, const TrainingCurve& c) {
  CsvTable t;
  t.header = {"epoch", "loss"};
  for (std::size_t i = 0; i < c.epoch.size(); ++i) t.rows.push_back({double(c.epoch[i]), c.loss[i]});
  write_csv(path, t);
}

TrainingCurve read_curve_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int e = t.column("epoch"), l = t.column("loss");
  if (e < 0 || l < 0) throw InputError(path + " needs epoch and loss columns");
  TrainingCurve c;
  for (const auto& row : t.rows) {
    c.epoch.push_back(static_cast<int>(row[e]));
    c.loss.push_back(row[l]);
  }
  return c;
}

// ---- SVG -------------------------------------------------------------------

namespace {

constexpr double kSize = 480.0;
constexpr double kPad = 20.0;

struct Frame {
  Range2 r;
  double sx(double x) const { return kPad + (x - r.x0) / (r.x1 - r.x0) * (kSize - 2 * kPad); }
  double sy(double y) const {
    return kSize - kPad - (y - r.y0) / (r.y1 - r.y0) * (kSize - 2 * kPad);
  }
};

std::ofstream open_svg(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\""
      << kSize << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return out;
}

// Marching squares: line segments where f crosses level on an n x n grid.
void contour_segments(std::ostream& out, const Frame& fr, double level,
                      const std::vector<double>& grid, int n) {
  const double dx = (fr.r.x1 - fr.r.x0) / (n - 1), dy = (fr.r.y1 - fr.r.y0) / (n - 1);
  auto val = [&](int i, int j) { return grid[static_cast<std::size_t>(j) * n + i]; };
  for (int j = 0; j + 1 < n; ++j) {
    for (int i = 0; i + 1 < n; ++i) {
      const double x0 = fr.r.x0 + i * dx, y0 = fr.r.y0 + j * dy;
      // Corners counter-clockwise from bottom-left; edges between them.
      const double v[4] = {val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)};
      const double cx[4] = {x0, x0 + dx, x0 + dx, x0};
      const double cy[4] = {y0, y0, y0 + dy, y0 + dy};
      std::vector<std::pair<double, double>> pts;
      for (int e = 0; e < 4; ++e) {
        const int a = e, b = (e + 1) % 4;
        if ((v[a] < level) != (v[b] < level)) {
          const double u = (level - v[a]) / (v[b] - v[a]);
          pts.emplace_back(cx[a] + u * (cx[b] - cx[a]), cy[a] + u * (cy[b] - cy[a]));
        }
      }
      for (std::size_t k = 0; k + 1 < pts.size(); k += 2) {
        out << "<line x1=\"" << fr.sx(pts[k].first) << "\" y1=\"" << fr.sy(pts[k].second)
            << "\" x2=\"" << fr.sx(pts[k + 1].first) << "\" y2=\"" << fr.sy(pts[k + 1].second)
            << "\" stroke=\"#c0392b\" stroke-width=\"1\"/>\n";
      }
    }
  }
}

}  // namespace

void write_scatter_svg(const std::string& path, const Matrix& points, const Range2& range,
                       const std::function<double(const Vector&)>& density,
                       const std::string& title) {
  if (points.cols() < 2) throw InputError("scatter plot needs two columns");
  const Frame fr{range};
  std::ofstream out = open_svg(path);
  out << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kSize - 2 * kPad
      << "\" height=\"" << kSize - 2 * kPad << "\" fill=\"none\" stroke=\"#888\"/>\n";
  const Eigen::Index shown = std::min<Eigen::Index>(points.rows(), 5000);
  for (Eigen::Index i = 0; i < shown; ++i) {
    const double x = points(i, 0), y = points(i, 1);
    if (x < range.x0 || x > range.x1 || y < range.y0 || y > range.y1) continue;
    out << "<circle cx=\"" << fr.sx(x) << "\" cy=\"" << fr.sy(y)
        << "\" r=\"1.2\" fill=\"#2c3e50\" fill-opacity=\"0.35\"/>\n";
  }
  if (density) {
    constexpr int n = 80;
    std::vector<double> grid(n * n);
    double peak = 0.0;
    Vector p(2);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        p << range.x0 + i * (range.x1 - range.x0) / (n - 1),
            range.y0 + j * (range.y1 - range.y0) / (n - 1);
        grid[static_cast<std::size_t>(j) * n + i] = density(p);
        peak = std::max(peak, grid[static_cast<std::size_t>(j) * n + i]);
      }
    }
    for (double frac : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      contour_segments(out, fr, frac * peak, grid, n);
    }
  }
  if (!title.empty()) {
    out << "<text x=\"" << kPad << "\" y=\"14\" font-family=\"sans-serif\" font-size=\"12\">"
        << title << "</text>\n";
  }
  out << "</svg>\n";
}

void write_maze_svg(const std::string& path, const MazeEnv& env,
                    const std::vector<Trajectory>& taus, const Vector& start,
                    const Vector& goal) {
  const double side = std::max(env.rows(), env.cols());
  const Frame fr{{0.0, side, 0.0, side}};
  std::ofstream out = open_svg(path);
  const double cell = (kSize - 2 * kPad) / side;
  for (int r = 0; r < env.rows(); ++r) {
    for (int c = 0; c < env.cols(); ++c) {
      if (!env.wall_cell(r, c)) continue;
      out << "<rect x=\"" << fr.sx(c) << "\" y=\"" << fr.sy(r + 1) << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"#555\"/>\n";
    }
  }
  for (const auto& tau : taus) {
    out << "<polyline fill=\"none\" stroke=\"#2980b9\" stroke-opacity=\"0.5\" points=\"";
    for (Eigen::Index i = 0; i < tau.states.rows(); ++i) {
      out << fr.sx(tau.states(i, 0)) << ',' << fr.sy(tau.states(i, 1)) << ' ';
    }
    out << "\"/>\n";
  }
  out << "<circle cx=\"" << fr.sx(start[0]) << "\" cy=\"" << fr.sy(start[1])
      << "\" r=\"5\" fill=\"#27ae60\"/>\n"
      << "<circle cx=\"" << fr.sx(goal[0]) << "\" cy=\"" << fr.sy(goal[1])
      << "\" r=\"5\" fill=\"#c0392b\"/>\n</svg>\n";
}

void write_disks_svg(const std::string& path, const ConstraintGraph& g,
                     const Vector& assignment, const Box2& frame) {
  if (assignment.size() != g.dim()) throw InputError("assignment does not match the graph");
  const Frame fr{{frame.x0, frame.x1, frame.y0, frame.y1}};
  std::ofstream out = open_svg(path);
  const double scale = (kSize - 2 * kPad) / (frame.x1 - frame.x0);
  out << "<rect x=\"" << fr.sx(frame.x0) << "\" y=\"" << fr.sy(frame.y1) << "\" width=\""
      << kSize - 2 * kPad << "\" height=\"" << kSize - 2 * kPad
      << "\" fill=\"none\" stroke=\"#888\"/>\n";
  for (std::size_t i = 0; i < g.disks().size(); ++i) {
    out << "<circle cx=\"" << fr.sx(assignment[2 * i]) << "\" cy=\""
        << fr.sy(assignment[2 * i + 1]) << "\" r=\"" << g.disks()[i].radius * scale
        << "\" fill=\"#8e44ad\" fill-opacity=\"0.4\" stroke=\"#8e44ad\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace compgen
