// nbql: command-line driver for net-based Q-learning experiments.
//
//   nbql run   --env chain --epsilon 0.05 --episodes 2000 --out runs/a
//   nbql sweep --axis c --values 0.1,0.5,1.0 --episodes 5000 --out runs/c
//   nbql audit --seeds 20 --epsilon 0.1 --episodes 2000
//   nbql slope --csv runs/a/episodes.csv --burn-in 0.2
//   nbql net build --epsilon 0.1 --out net.txt
//
// Every subcommand accepts --config <file.json>; explicit flags override it.
// Results go to stdout as JSON. Failures exit nonzero with a JSON object
// {"error": ..., "message": ..., "field": ...} on stderr.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nbql/error.hpp"
#include "nbql/harness.hpp"

namespace {

using nlohmann::json;

// Flag values are kept apart from the config so that only flags the user
// actually passed override the config file.
struct RunFlags {
  std::string config_path;
  std::string env;
  std::string agent;
  double epsilon = 0;
  double c = 0;
  double p = 0;
  std::size_t episodes = 0;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t eval_stride = 0;
  std::size_t oracle_grid = 0;
  std::size_t audit_stride = 0;
  std::size_t pool_size = 0;
  double burn_in = 0;

  std::vector<std::pair<std::string, CLI::Option*>> opts;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  auto add = [&](const std::string& name, auto& field, const std::string& help) {
    f.opts.emplace_back(name, cmd->add_option(name, field, help));
  };
  add("--config", f.config_path, "JSON config file");
  add("--env", f.env, "chain, random, or a FiniteMDP file path");
  add("--agent", f.agent, "nbql or tabular");
  add("--epsilon", f.epsilon, "net radius");
  add("--c", f.c, "bonus constant");
  add("--p", f.p, "failure probability");
  add("--episodes", f.episodes, "episode count K");
  add("--horizon", f.horizon, "horizon H");
  add("--seed", f.seed, "root seed");
  add("--out", f.out, "output directory");
  add("--eval-stride", f.eval_stride, "evaluate every j-th policy");
  add("--oracle-grid", f.oracle_grid, "surrogate grid resolution for continuous envs");
  add("--audit-stride", f.audit_stride, "audit optimism every j-th episode (0 = off)");
  add("--pool-size", f.pool_size, "candidate pool size per dimension");
  add("--burn-in", f.burn_in, "burn-in fraction for the slope fit");
}

bool given(const RunFlags& f, const std::string& name) {
  for (const auto& [n, opt] : f.opts) {
    if (n == name) return opt->count() > 0;
  }
  return false;
}

nbql::ExperimentConfig resolve_config(const RunFlags& f) {
  nbql::ExperimentConfig c;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw nbql::Error(nbql::ErrorKind::Config, "cannot read " + f.config_path, "config");
    std::stringstream ss;
    ss << in.rdbuf();
    c = nbql::config_from_json(ss.str(), c);
  }
  if (given(f, "--env")) c.env = f.env;
  if (given(f, "--agent")) c.agent = f.agent;
  if (given(f, "--epsilon")) c.epsilon = f.epsilon;
  if (given(f, "--c")) c.c = f.c;
  if (given(f, "--p")) c.p = f.p;
  if (given(f, "--episodes")) c.episodes = f.episodes;
  if (given(f, "--horizon")) c.horizon = f.horizon;
  if (given(f, "--seed")) c.seed = f.seed;
  if (given(f, "--out")) c.out_dir = f.out;
  if (given(f, "--eval-stride")) c.eval_stride = f.eval_stride;
  if (given(f, "--oracle-grid")) c.oracle_grid = f.oracle_grid;
  if (given(f, "--audit-stride")) c.audit_stride = f.audit_stride;
  if (given(f, "--pool-size")) c.pool_size = f.pool_size;
  if (given(f, "--burn-in")) c.burn_in = f.burn_in;
  c.validate();
  return c;
}

void print_error(const std::string& kind, const std::string& message,
                 const std::string& field = {}) {
  json j = {{"error", kind}, {"message", message}};
  if (!field.empty()) j["field"] = field;
  std::cerr << j.dump() << '\n';
}

json summary_json(const nbql::RunSummary& s) { return json::parse(nbql::summary_to_json(s)); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Net-based Q-learning experiments"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run one experiment");
  add_run_flags(run, run_flags);

  RunFlags sweep_flags;
  std::string axis;
  std::vector<double> values;
  std::size_t jobs = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "run one experiment per axis value");
  add_run_flags(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--axis", axis, "epsilon, c, K or seed")->required();
  sweep_cmd->add_option("--values", values, "axis values")->required()->delimiter(',');
  sweep_cmd->add_option("--jobs", jobs, "concurrent runs");

  RunFlags audit_flags;
  std::size_t seeds = 1;
  auto* audit = app.add_subcommand("audit", "optimism audit averaged over seeds");
  add_run_flags(audit, audit_flags);
  audit->add_option("--seeds", seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);
  audit->add_option("--jobs", jobs, "concurrent runs");

  std::string csv;
  double burn_in = 0.2;
  auto* slope = app.add_subcommand("slope", "fit log cumulative regret vs log k");
  slope->add_option("--csv", csv, "episodes CSV")->required();
  slope->add_option("--burn-in", burn_in, "burn-in fraction");

  auto* net = app.add_subcommand("net", "epsilon-net utilities");
  net->require_subcommand(1);
  RunFlags net_flags;
  auto* net_build = net->add_subcommand("build", "build a greedy net and write it");
  add_run_flags(net_build, net_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage_error", e.what());
    return 2;
  }

  try {
    if (*run) {
      const nbql::RunArtifact art = nbql::run_experiment(resolve_config(run_flags));
      std::cout << summary_json(art.summary).dump(2) << '\n';
    } else if (*sweep_cmd) {
      const auto rows = nbql::sweep(resolve_config(sweep_flags), axis, values, jobs);
      json out = json::array();
      for (const auto& r : rows) {
        json row = summary_json(r.summary);
        row["axis"] = r.axis;
        row["value"] = r.value;
        row["seed"] = r.seed;
        out.push_back(row);
      }
      std::cout << out.dump(2) << '\n';
    } else if (*audit) {
      const nbql::ExperimentConfig base = resolve_config(audit_flags);
      std::vector<double> seed_values(seeds);
      std::iota(seed_values.begin(), seed_values.end(), static_cast<double>(base.seed));
      const auto rows = nbql::sweep(base, "seed", seed_values, jobs);
      double mean = 0.0;
      json per_seed = json::array();
      for (const auto& r : rows) {
        mean += r.summary.violation_rate;
        per_seed.push_back({{"seed", r.seed}, {"violation_rate", r.summary.violation_rate}});
      }
      mean /= static_cast<double>(rows.size());
      std::cout << json{{"violation_rate", mean},
                        {"bound", base.p},
                        {"epsilon", base.epsilon},
                        {"per_seed", per_seed}}
                       .dump(2)
                << '\n';
    } else if (*slope) {
      const auto cum = nbql::read_cumulative_regret(csv);
      const double s = nbql::fit_regret_slope(std::span<const double>(cum), burn_in);
      std::cout << json{{"slope", s}, {"points", cum.size()}, {"burn_in", burn_in}}.dump(2)
                << '\n';
    } else if (*net_build) {
      const nbql::ExperimentConfig c = resolve_config(net_flags);
      const nbql::Environment env = nbql::make_environment(c);
      const nbql::AgentState agent = nbql::make_agent(c, env);
      if (c.out_dir.empty()) {
        nbql::write_net(std::cout, agent.net(), agent.space());
      } else {
        nbql::save_net(c.out_dir, agent.net(), agent.space());
        std::cout << json{{"net_size", agent.net().size()},
                          {"epsilon", c.epsilon},
                          {"built_from", agent.net().built_from()},
                          {"path", c.out_dir}}
                         .dump(2)
                  << '\n';
      }
    }
  } catch (const nbql::Error& e) {
    print_error(nbql::to_string(e.kind()), e.what(), e.field());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal_error", e.what());
    return 1;
  }
  return 0;
}
