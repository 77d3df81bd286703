#include "nbql/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "nbql/error.hpp"
#include "nbql/rng.hpp"
#include "text.hpp"

namespace nbql {

using nlohmann::json;

namespace {

std::size_t auto_pool_size(double epsilon) {
  return static_cast<std::size_t>(std::ceil(8.0 / epsilon));
}

std::size_t auto_oracle_grid(double epsilon) {
  return std::max<std::size_t>(50, static_cast<std::size_t>(std::ceil(4.0 / epsilon)));
}

}  // namespace

void ExperimentConfig::validate() const {
  if (env.empty()) throw Error(ErrorKind::Config, "env must be set", "env");
  if (!(epsilon > 0.0)) throw Error(ErrorKind::Config, "epsilon must be positive", "epsilon");
  if (episodes < 1) throw Error(ErrorKind::Config, "episodes must be >= 1", "episodes");
  if (horizon < 1) throw Error(ErrorKind::Config, "horizon must be >= 1", "horizon");
  if (!(c >= 0.0)) throw Error(ErrorKind::Config, "c must be >= 0", "c");
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::Config, "p must lie in (0, 1)", "p");
  if (eval_stride < 1) throw Error(ErrorKind::Config, "eval_stride must be >= 1", "eval_stride");
  if (oracle_grid == 1) throw Error(ErrorKind::Config, "oracle_grid must be >= 2", "oracle_grid");
  if (!(burn_in >= 0.0 && burn_in < 1.0)) {
    throw Error(ErrorKind::Config, "burn_in must lie in [0, 1)", "burn_in");
  }
  if (agent != "nbql" && agent != "tabular") {
    throw Error(ErrorKind::Config, "agent must be 'nbql' or 'tabular'", "agent");
  }
  if (agent == "tabular" && env == "chain") {
    throw Error(ErrorKind::Config, "the tabular agent needs a finite env", "agent");
  }
  if (chain_noise < 0.0) throw Error(ErrorKind::Config, "noise must be >= 0", "chain_noise");
}

ExperimentConfig config_from_json(const std::string& text, ExperimentConfig base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what(), "config");
  }
  if (!j.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object", "config");
  ExperimentConfig c = std::move(base);
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Config, std::string("bad value for '") + key + "': " + e.what(), key);
    }
  };
  get("env", c.env);
  get("chain_actions", c.chain_actions);
  get("chain_noise", c.chain_noise);
  get("chain_peak", c.chain_peak);
  get("chain_initial", c.chain_initial);
  get("chain_action_gap", c.chain_action_gap);
  get("random_states", c.random_states);
  get("random_actions", c.random_actions);
  get("random_seed", c.random_seed);
  get("random_lipschitz", c.random_lipschitz);
  get("random_span", c.random_span);
  get("agent", c.agent);
  get("epsilon", c.epsilon);
  if (j.contains("pool_kind")) {
    std::string kind;
    get("pool_kind", kind);
    if (kind == "grid") {
      c.pool_kind = PoolSpec::Kind::Grid;
    } else if (kind == "samples") {
      c.pool_kind = PoolSpec::Kind::Samples;
    } else {
      throw Error(ErrorKind::Config, "pool_kind must be 'grid' or 'samples'", "pool_kind");
    }
  }
  get("pool_size", c.pool_size);
  get("pool_seed", c.pool_seed);
  get("c", c.c);
  get("p", c.p);
  get("episodes", c.episodes);
  get("horizon", c.horizon);
  get("seed", c.seed);
  get("out", c.out_dir);
  get("eval_stride", c.eval_stride);
  get("oracle_grid", c.oracle_grid);
  get("audit_stride", c.audit_stride);
  get("burn_in", c.burn_in);
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j = {
      {"env", c.env},
      {"chain_actions", c.chain_actions},
      {"chain_noise", c.chain_noise},
      {"chain_peak", c.chain_peak},
      {"chain_initial", c.chain_initial},
      {"chain_action_gap", c.chain_action_gap},
      {"random_states", c.random_states},
      {"random_actions", c.random_actions},
      {"random_seed", c.random_seed},
      {"random_lipschitz", c.random_lipschitz},
      {"random_span", c.random_span},
      {"agent", c.agent},
      {"epsilon", c.epsilon},
      {"pool_kind", c.pool_kind == PoolSpec::Kind::Grid ? "grid" : "samples"},
      {"pool_size", c.pool_size},
      {"pool_seed", c.pool_seed},
      {"c", c.c},
      {"p", c.p},
      {"episodes", c.episodes},
      {"horizon", c.horizon},
      {"seed", c.seed},
      {"out", c.out_dir},
      {"eval_stride", c.eval_stride},
      {"oracle_grid", c.oracle_grid},
      {"audit_stride", c.audit_stride},
      {"burn_in", c.burn_in},
  };
  return j.dump(2);
}

Environment make_environment(const ExperimentConfig& config) {
  config.validate();
  if (config.env == "chain") {
    ChainConfig chain;
    chain.horizon = config.horizon;
    chain.actions = config.chain_actions;
    chain.noise = config.chain_noise;
    chain.peak = config.chain_peak;
    chain.initial_state = config.chain_initial;
    chain.action_gap = config.chain_action_gap;
    ContinuousMDP env = make_lipschitz_chain(chain);
    const std::size_t grid =
        config.oracle_grid ? config.oracle_grid : auto_oracle_grid(config.epsilon);
    FiniteMDP surrogate = discretize(env, grid);
    return Environment{std::move(env), std::move(surrogate), grid};
  }
  if (config.env == "random") {
    RandomMDPConfig rc;
    rc.n_states = config.random_states;
    rc.n_actions = config.random_actions;
    rc.horizon = config.horizon;
    rc.lipschitz = config.random_lipschitz;
    rc.state_span = config.random_span;
    return Environment{std::nullopt, make_random_finite(rc, config.random_seed), 0};
  }
  FiniteMDP env = load_finite_mdp(config.env);
  if (env.horizon() != config.horizon) {
    throw Error(ErrorKind::Config, "horizon does not match the MDP file", "horizon");
  }
  return Environment{std::nullopt, std::move(env), 0};
}

AgentState make_agent(const ExperimentConfig& config, const Environment& env) {
  if (config.agent == "tabular") {
    if (env.continuous) throw Error(ErrorKind::Config, "the tabular agent needs a finite env", "agent");
    return make_tabular_baseline(env.surrogate, config.c, config.p, config.episodes);
  }
  const MetricSpace& space = env.continuous ? env.continuous->metric() : env.surrogate.metric();
  std::vector<Point> pool;
  std::string built_from;
  if (env.continuous) {
    PoolSpec spec;
    spec.kind = config.pool_kind;
    spec.size = config.pool_size ? config.pool_size : auto_pool_size(config.epsilon);
    spec.seed = config.pool_seed ? config.pool_seed : child_seed(config.seed, stream::kPool);
    spec.lo = env.continuous->lo();
    spec.hi = env.continuous->hi();
    pool = make_candidate_pool(space, spec);
    built_from = spec.describe();
  } else {
    const FiniteMDP& f = env.surrogate;
    for (std::size_t x = 0; x < f.n_states(); ++x) {
      for (std::size_t a = 0; a < f.n_actions(); ++a) pool.push_back(f.point(x, a));
    }
    built_from = "states";
  }
  EpsNet net = build_greedy_net(space, config.epsilon, pool, built_from);
  const AgentParams params =
      AgentParams::make(config.c, config.p, config.episodes, config.horizon, net.size());
  return AgentState(space, std::move(net), params);
}

AuditCount audit_snapshot(const AgentState& agent, const FiniteMDP& env,
                          const ValueTables& values, double epsilon,
                          std::span<const std::size_t> phi) {
  const std::size_t S = env.n_states(), H = env.horizon();
  const std::vector<double> v = agent_values(agent, env, phi);
  AuditCount out;
  for (std::size_t h = 1; h <= H; ++h) {
    const double slack = 2.0 * (static_cast<double>(H - h) + 1.5) * epsilon;
    for (std::size_t x = 0; x < S; ++x) {
      if (v[(h - 1) * S + x] < values.vstar(h, x) - slack) ++out.violations;
      ++out.checked;
    }
  }
  return out;
}

double optimism_audit(std::span<const AgentState> snapshots, const FiniteMDP& env,
                      const ValueTables& values, double epsilon) {
  AuditCount total;
  for (const AgentState& agent : snapshots) {
    total += audit_snapshot(agent, env, values, epsilon, quantization_table(agent, env));
  }
  return total.rate();
}

double fit_regret_slope(std::span<const double> cumulative, double burn_in) {
  if (!(burn_in >= 0.0 && burn_in < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "burn-in fraction must lie in [0, 1)");
  }
  const std::size_t n = cumulative.size();
  const auto first = static_cast<std::size_t>(std::floor(burn_in * static_cast<double>(n)));
  if (n - first < 10) {
    throw Error(ErrorKind::InsufficientData, "need at least 10 points after burn-in");
  }
  double mx = 0, my = 0;
  for (std::size_t i = first; i < n; ++i) {
    if (!(cumulative[i] > 0.0)) {
      throw Error(ErrorKind::DegenerateCurve,
                  "cumulative regret is nonpositive at k=" + std::to_string(i + 1));
    }
    mx += std::log(static_cast<double>(i + 1));
    my += std::log(cumulative[i]);
  }
  const double m = static_cast<double>(n - first);
  mx /= m;
  my /= m;
  double sxx = 0, sxy = 0;
  for (std::size_t i = first; i < n; ++i) {
    const double dx = std::log(static_cast<double>(i + 1)) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(cumulative[i]) - my);
  }
  return sxy / sxx;
}

double fit_regret_slope(const RegretCurve& curve, double burn_in) {
  return fit_regret_slope(curve.cumulative, burn_in);
}

RunArtifact run_experiment(const ExperimentConfig& config) {
  config.validate();
  const Environment env = make_environment(config);
  const FiniteMDP& surrogate = env.surrogate;
  const ValueTables values = backward_induction(surrogate);
  AgentState agent = make_agent(config, env);
  const std::vector<std::size_t> phi = quantization_table(agent, surrogate);

  const std::size_t K = config.episodes;
  const std::size_t H = config.horizon;
  const std::size_t x1 = surrogate.initial_state();
  const double vstar1 = values.vstar(1, x1);
  Rng rng(child_seed(config.seed, stream::kEnvNoise));

  RunArtifact art;
  art.config = config;
  art.rows.resize(K);
  std::vector<char> evaluated(K, 0);
  std::vector<char> visited(H * agent.n_centers(), 0);
  std::size_t n_visited = 0;
  AuditCount audit;

  for (std::size_t k = 1; k <= K; ++k) {
    EpisodeRow& row = art.rows[k - 1];
    row.k = k;
    row.vstar = vstar1;
    // The greedy policy at the start of episode k is the one it executes:
    // Q_h is only read at step h and updated after that read.
    if ((k - 1) % config.eval_stride == 0 || k == K) {
      const Policy pi = extract_greedy_policy(agent, surrogate, phi);
      row.vpik = evaluate_policy(surrogate, pi)[x1];
      evaluated[k - 1] = 1;
    }
    if (config.audit_stride && (k - 1) % config.audit_stride == 0) {
      audit += audit_snapshot(agent, surrogate, values, config.epsilon, phi);
    }

    double ret = 0.0;
    if (env.continuous) {
      std::vector<double> x = env.continuous->initial_state();
      for (std::size_t h = 1; h <= H; ++h) {
        const std::size_t a = select_action(agent, h, x);
        StepResult s = env.continuous->step(h, x, a, rng);
        const UpdateRecord rec = observe(agent, h, x, a, s.reward, s.next_state);
        ret += s.reward;
        if (!visited[(h - 1) * agent.n_centers() + rec.center]++) ++n_visited;
        x = std::move(s.next_state);
      }
    } else {
      std::size_t x = x1;
      for (std::size_t h = 1; h <= H; ++h) {
        const std::size_t a = select_action(agent, h, surrogate.coords(x));
        const auto [r, next] = surrogate.step(h, x, a, rng);
        const UpdateRecord rec =
            observe(agent, h, surrogate.coords(x), a, r, surrogate.coords(next));
        ret += r;
        if (!visited[(h - 1) * agent.n_centers() + rec.center]++) ++n_visited;
        x = next;
      }
    }
    row.realized_return = ret;
    row.centers_visited = n_visited;
  }

  // Linear interpolation of V^{pi_k} between evaluated episodes.
  std::size_t prev = 0;
  for (std::size_t i = 1; i < K; ++i) {
    if (!evaluated[i]) continue;
    for (std::size_t j = prev + 1; j < i; ++j) {
      const double w = static_cast<double>(j - prev) / static_cast<double>(i - prev);
      art.rows[j].vpik = (1.0 - w) * art.rows[prev].vpik + w * art.rows[i].vpik;
    }
    prev = i;
  }

  double realized = 0.0;
  for (EpisodeRow& row : art.rows) {
    art.curve.append(row.vstar, row.vpik);
    row.cum_regret = art.curve.total();
    realized += row.vstar - row.realized_return;
  }

  RunSummary& s = art.summary;
  s.episodes = K;
  s.net_size = agent.n_centers();
  s.oracle_grid = env.grid;
  s.final_regret = art.curve.total();
  s.realized_regret = realized;
  try {
    s.slope = fit_regret_slope(art.curve, config.burn_in);
    s.slope_defined = true;
  } catch (const Error&) {
    s.slope = 0.0;
    s.slope_defined = false;
  }
  s.violation_rate = audit.rate();
  s.audited = audit.checked;
  s.violations = audit.violations;

  if (!config.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    const fs::path dir(config.out_dir);
    write_episode_csv((dir / "episodes.csv").string(), art.rows);
    save_checkpoint((dir / "checkpoint.txt").string(), agent);
    save_net((dir / "net.txt").string(), agent.net(), agent.space());
    detail::open_out((dir / "summary.json").string()) << summary_to_json(s) << '\n';
    detail::open_out((dir / "config.json").string()) << config_to_json(config) << '\n';
  }
  art.agent.emplace(std::move(agent));
  return art;
}

std::vector<SweepRow> sweep(const ExperimentConfig& base, const std::string& axis,
                            std::span<const double> values, std::size_t jobs) {
  if (values.empty()) throw Error(ErrorKind::Config, "sweep needs at least one value", "values");
  if (axis != "epsilon" && axis != "c" && axis != "K" && axis != "seed") {
    throw Error(ErrorKind::Config, "axis must be one of epsilon, c, K, seed", "axis");
  }
  std::vector<ExperimentConfig> configs;
  for (std::size_t i = 0; i < values.size(); ++i) {
    ExperimentConfig c = base;
    const double v = values[i];
    if (axis == "epsilon") {
      c.epsilon = v;
    } else if (axis == "c") {
      c.c = v;
    } else if (axis == "K") {
      if (!(v >= 1.0) || v != std::floor(v)) throw Error(ErrorKind::Config, "K values must be positive integers", "values");
      c.episodes = static_cast<std::size_t>(v);
    } else {
      if (!(v >= 0.0) || v != std::floor(v)) throw Error(ErrorKind::Config, "seed values must be nonnegative integers", "values");
      c.seed = static_cast<std::uint64_t>(v);
    }
    if (axis != "seed") c.seed = base.seed + i;
    if (!base.out_dir.empty()) {
      c.out_dir = (std::filesystem::path(base.out_dir) / (axis + "_" + std::to_string(i))).string();
    }
    c.validate();
    configs.push_back(std::move(c));
  }

  std::vector<SweepRow> rows(configs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        const RunArtifact art = run_experiment(configs[i]);
        rows[i] = SweepRow{axis, values[i], configs[i].seed, art.summary};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, configs.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  if (!base.out_dir.empty()) {
    write_sweep_csv((std::filesystem::path(base.out_dir) / "sweep.csv").string(), rows);
  }
  return rows;
}

std::string summary_to_json(const RunSummary& s) {
  json j = {
      {"episodes", s.episodes},
      {"net_size", s.net_size},
      {"oracle_grid", s.oracle_grid},
      {"final_regret", s.final_regret},
      {"realized_regret", s.realized_regret},
      {"slope", s.slope},
      {"slope_defined", s.slope_defined},
      {"optimism_violation_rate", s.violation_rate},
      {"audited", s.audited},
      {"violations", s.violations},
  };
  return j.dump(2);
}

void write_episode_csv(const std::string& path, std::span<const EpisodeRow> rows) {
  auto out = detail::open_out(path);
  out << "k,return,vstar,vpik,cum_regret,centers_visited\n";
  for (const EpisodeRow& r : rows) {
    out << r.k << ',' << detail::fmt_g(r.realized_return, 12) << ','
        << detail::fmt_g(r.vstar, 12) << ',' << detail::fmt_g(r.vpik, 12) << ','
        << detail::fmt_g(r.cum_regret, 12) << ',' << r.centers_visited << '\n';
  }
}

void write_sweep_csv(const std::string& path, std::span<const SweepRow> rows) {
  auto out = detail::open_out(path);
  out << "axis,value,seed,net_size,final_regret,realized_regret,slope,slope_defined,"
         "violation_rate\n";
  for (const SweepRow& r : rows) {
    out << r.axis << ',' << detail::fmt_g(r.value, 12) << ',' << r.seed << ','
        << r.summary.net_size << ',' << detail::fmt_g(r.summary.final_regret, 12) << ','
        << detail::fmt_g(r.summary.realized_regret, 12) << ','
        << detail::fmt_g(r.summary.slope, 12) << ',' << (r.summary.slope_defined ? 1 : 0)
        << ',' << detail::fmt_g(r.summary.violation_rate, 12) << '\n';
  }
}

std::vector<double> read_cumulative_regret(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Io, "empty CSV: " + path);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) header.push_back(cell);
  }
  const auto it = std::find(header.begin(), header.end(), "cum_regret");
  if (it == header.end()) throw Error(ErrorKind::Io, "CSV has no cum_regret column: " + path);
  const auto col = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t i = 0; i <= col; ++i) {
      if (!std::getline(ss, cell, ',')) throw Error(ErrorKind::Io, "short CSV row in " + path);
    }
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw Error(ErrorKind::Io, "bad number '" + cell + "' in " + path);
    }
  }
  return out;
}

}  // namespace nbql
