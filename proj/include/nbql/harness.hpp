#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nbql/agent.hpp"
#include "nbql/envs.hpp"
#include "nbql/metric.hpp"
#include "nbql/oracle.hpp"

namespace nbql {

struct ExperimentConfig {
  // "chain", "random", or a path to a FiniteMDP text file.
  std::string env = "chain";
  // Chain parameters (horizon is taken from `horizon`).
  std::vector<double> chain_actions{-0.2, -0.1, 0.0, 0.1, 0.2};
  double chain_noise = 0.05;
  double chain_peak = 0.75;
  double chain_initial = 0.25;
  double chain_action_gap = 2.0;
  // Random finite env parameters.
  std::size_t random_states = 10;
  std::size_t random_actions = 3;
  std::uint64_t random_seed = 7;
  bool random_lipschitz = true;
  double random_span = 1.0;

  // "nbql" or "tabular" (finite envs only).
  std::string agent = "nbql";
  double epsilon = 0.1;
  PoolSpec::Kind pool_kind = PoolSpec::Kind::Grid;
  // Grid points per state dimension or sample count; 0 picks ceil(8 / epsilon).
  std::size_t pool_size = 0;
  std::uint64_t pool_seed = 0;  // 0 derives the pool stream from `seed`

  double c = 0.5;
  double p = 0.1;
  std::size_t episodes = 1000;
  std::size_t horizon = 3;
  std::uint64_t seed = 1;

  std::string out_dir;
  std::size_t eval_stride = 1;
  // Surrogate grid for continuous envs; 0 picks max(50, ceil(4 / epsilon)).
  std::size_t oracle_grid = 0;
  // Audit optimism every this many episodes; 0 disables.
  std::size_t audit_stride = 1;
  double burn_in = 0.2;

  void validate() const;
};

// Fields absent from the JSON keep their current values in `base`.
ExperimentConfig config_from_json(const std::string& text, ExperimentConfig base = {});
std::string config_to_json(const ExperimentConfig& config);

// Environment built from a config: the surrogate is exact and is what regret
// and optimism are measured on. For finite envs the learner acts on the
// surrogate itself.
struct Environment {
  std::optional<ContinuousMDP> continuous;
  FiniteMDP surrogate;
  std::size_t grid = 0;  // surrogate resolution; 0 for finite envs
};

Environment make_environment(const ExperimentConfig& config);

// The agent a config describes, before any learning.
AgentState make_agent(const ExperimentConfig& config, const Environment& env);

struct EpisodeRow {
  std::size_t k = 0;
  double realized_return = 0.0;
  double vstar = 0.0;
  double vpik = 0.0;
  double cum_regret = 0.0;
  std::size_t centers_visited = 0;  // distinct (h, center) cells updated so far
};

struct RunSummary {
  std::size_t episodes = 0;
  std::size_t net_size = 0;
  std::size_t oracle_grid = 0;
  double final_regret = 0.0;
  double realized_regret = 0.0;  // sum of V*_1 minus sampled returns
  double slope = 0.0;
  bool slope_defined = false;
  double violation_rate = 0.0;
  std::uint64_t audited = 0;
  std::uint64_t violations = 0;
};

struct RunArtifact {
  ExperimentConfig config;
  std::vector<EpisodeRow> rows;
  RegretCurve curve;
  RunSummary summary;
  std::optional<AgentState> agent;
};

// Runs K episodes of H steps, evaluating the executed greedy policy against
// the exact oracle. Writes episodes.csv, summary.json, checkpoint.txt,
// net.txt and config.json when config.out_dir is set.
RunArtifact run_experiment(const ExperimentConfig& config);

// Least-squares slope of log R_k vs log k over k past the burn-in fraction.
// Throws Error(InsufficientData) with < 10 points after burn-in and
// Error(DegenerateCurve) if any of them is nonpositive.
double fit_regret_slope(std::span<const double> cumulative, double burn_in = 0.2);
double fit_regret_slope(const RegretCurve& curve, double burn_in = 0.2);

struct AuditCount {
  std::uint64_t violations = 0;
  std::uint64_t checked = 0;

  double rate() const noexcept {
    return checked == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(checked);
  }
  AuditCount& operator+=(const AuditCount& o) noexcept {
    violations += o.violations;
    checked += o.checked;
    return *this;
  }
};

// Counts (h, x) with V_h(x) < V*_h(x) - 2 (H - h + 1.5) epsilon for one snapshot.
AuditCount audit_snapshot(const AgentState& agent, const FiniteMDP& env,
                          const ValueTables& values, double epsilon,
                          std::span<const std::size_t> phi);

// Violation rate over every (snapshot, h, x).
double optimism_audit(std::span<const AgentState> snapshots, const FiniteMDP& env,
                      const ValueTables& values, double epsilon);

struct SweepRow {
  std::string axis;
  double value = 0.0;
  std::uint64_t seed = 0;
  RunSummary summary;
};

// One run per value; run i of a non-seed axis uses seed + i. Runs execute on
// up to `jobs` threads and land in <out_dir>/<axis>_<i> when out_dir is set.
std::vector<SweepRow> sweep(const ExperimentConfig& base, const std::string& axis,
                            std::span<const double> values, std::size_t jobs = 1);

std::string summary_to_json(const RunSummary& summary);
void write_episode_csv(const std::string& path, std::span<const EpisodeRow> rows);
void write_sweep_csv(const std::string& path, std::span<const SweepRow> rows);
// cum_regret column of an episodes CSV.
std::vector<double> read_cumulative_regret(const std::string& path);

}  // namespace nbql
