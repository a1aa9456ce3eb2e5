// Batch front end: every subcommand runs one named experiment from a JSON
// config and exits 0 iff all of its thresholds pass.

#include "compgen/error.hpp"
#include "compgen/experiments.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>

namespace {

struct Command {
  const char* name;
  const char* help;
  std::vector<std::string> experiments;  // first entry is the default; empty = any
};

const std::vector<Command>& commands() {
  static const std::vector<Command> table{
      {"sample", "continuous sampler checks (kernel equivalence, naive reverse caveat)",
       {"appendix-equivalence", "naive-caveat"}},
      {"compose", "annealed sampling of a composed GMM family", {"compose-2d"}},
      {"train", "score network training: compositional vs monolithic", {"fig4"}},
      {"plan", "trajectory planning in a maze", {"plan-maze"}},
      {"arrange", "constraint-graph disk arrangement", {"arrange-disks"}},
      {"demo", "discrete composition demos", {"noncompose-demo", "discrete-product"}},
      {"eval", "run any experiment named in the config", {}},
  };
  return table;
}

struct Options {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
};

int run(const Command& cmd, const Options& opt) {
  using namespace compgen;
  json j = opt.config.empty() ? json::object() : read_json_file(opt.config);
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (!j.contains("experiment")) {
    if (cmd.experiments.empty()) throw ConfigError("eval needs an 'experiment' in the config");
    j["experiment"] = cmd.experiments.front();
  }
  if (opt.seed) j["seed"] = *opt.seed;
  j["out_dir"] = opt.out;
  RunConfig rc = RunConfig::from_json(j);
  if (!cmd.experiments.empty() &&
      std::find(cmd.experiments.begin(), cmd.experiments.end(), rc.experiment) ==
          cmd.experiments.end()) {
    std::string names;
    for (const auto& n : cmd.experiments) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError(std::string(cmd.name) + " runs " + names + "; use eval for " +
                      rc.experiment);
  }
  const MetricsReport r = run_experiment(rc);
  for (const auto& [name, value] : r.metrics) std::cout << name << " = " << value << '\n';
  for (const auto& t : r.thresholds) {
    std::cout << (t.passed ? "PASS " : "FAIL ") << t.metric << ' ' << t.op << ' ' << t.bound
              << '\n';
  }
  std::cout << "config_hash " << r.metadata.at("config_hash") << "  output "
            << resolve_out_dir(rc) << '\n';
  return r.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compgen: compositional sampling experiments"};
  app.require_subcommand(1);
  std::map<CLI::App*, const Command*> subs;
  Options opt;
  for (const auto& cmd : commands()) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", opt.config, "JSON run config")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory (COMPGEN_OUT_DIR overrides)");
    sub->add_option("--seed", opt.seed, "seed (required unless the config has one)");
    subs[sub] = &cmd;
  }
  CLI11_PARSE(app, argc, argv);
  for (const auto& [sub, cmd] : subs) {
    if (!sub->parsed()) continue;
    try {
      return run(*cmd, opt);
    } catch (const compgen::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
  }
  return 2;
}
