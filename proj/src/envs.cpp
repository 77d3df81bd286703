#include "nbql/envs.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "nbql/error.hpp"
#include "nbql/oracle.hpp"
#include "text.hpp"

namespace nbql {

namespace {

constexpr double kRowTolerance = 1e-9;

void check_h(std::size_t h, std::size_t horizon) {
  if (h < 1 || h > horizon) {
    throw Error(ErrorKind::Protocol,
                "step h=" + std::to_string(h) + " outside [1, " + std::to_string(horizon) + "]");
  }
}

}  // namespace

FiniteMDP::FiniteMDP(std::size_t n_states, std::size_t n_actions, std::size_t horizon,
                     std::vector<double> rewards, std::vector<double> transitions,
                     std::vector<std::vector<double>> state_coords, MetricSpace metric,
                     std::size_t initial_state)
    : n_states_(n_states),
      n_actions_(n_actions),
      horizon_(horizon),
      rewards_(std::move(rewards)),
      transitions_(std::move(transitions)),
      state_coords_(std::move(state_coords)),
      metric_(std::move(metric)),
      initial_state_(initial_state) {
  if (n_states_ == 0 || n_actions_ == 0 || horizon_ == 0) {
    throw Error(ErrorKind::Env, "n_states, n_actions and H must be positive");
  }
  if (rewards_.size() != horizon_ * n_states_ * n_actions_) {
    throw Error(ErrorKind::Env, "reward table has wrong size");
  }
  if (transitions_.size() != horizon_ * n_states_ * n_actions_ * n_states_) {
    throw Error(ErrorKind::Env, "transition table has wrong size");
  }
  if (state_coords_.size() != n_states_) {
    throw Error(ErrorKind::Env, "need one coordinate vector per state");
  }
  if (metric_.n_actions() != n_actions_) {
    throw Error(ErrorKind::Env, "metric action count does not match the MDP");
  }
  if (initial_state_ >= n_states_) throw Error(ErrorKind::Env, "initial state out of range");
  for (double r : rewards_) {
    if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorKind::Env, "reward outside [0, 1]");
  }
  for (std::size_t row = 0; row < horizon_ * n_states_ * n_actions_; ++row) {
    double sum = 0.0;
    for (std::size_t y = 0; y < n_states_; ++y) {
      const double p = transitions_[row * n_states_ + y];
      if (!(p >= 0.0)) throw Error(ErrorKind::Env, "negative transition probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowTolerance) {
      throw Error(ErrorKind::Env, "transition row " + std::to_string(row) + " sums to " +
                                      detail::fmt_g(sum));
    }
  }
  for (std::size_t x = 0; x < n_states_; ++x) metric_.validate(Point{state_coords_[x], 0});
}

std::size_t FiniteMDP::locate(std::span<const double> state) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < n_states_; ++x) {
    double d = 0.0;
    for (std::size_t i = 0; i < state.size(); ++i) {
      d = std::max(d, std::abs(state[i] - state_coords_[x][i]));
    }
    if (d < best_d) {
      best_d = d;
      best = x;
    }
  }
  return best;
}

std::pair<double, std::size_t> FiniteMDP::step(std::size_t h, std::size_t x, std::size_t a,
                                               Rng& rng) const {
  check_h(h, horizon_);
  if (x >= n_states_ || a >= n_actions_) {
    throw Error(ErrorKind::InvalidPoint, "state or action index out of range");
  }
  const auto row = transition_row(h, x, a);
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t next = n_states_ - 1;
  for (std::size_t y = 0; y < n_states_; ++y) {
    acc += row[y];
    if (u < acc) {
      next = y;
      break;
    }
  }
  // Rounding can leave acc slightly below 1; fall back to the last
  // state with positive mass.
  if (u >= acc) {
    while (next > 0 && row[next] == 0.0) --next;
  }
  return {reward(h, x, a), next};
}

ContinuousMDP::ContinuousMDP(Spec spec) : spec_(std::move(spec)) {
  const std::size_t dim = spec_.lo.size();
  if (dim == 0 || spec_.hi.size() != dim) throw Error(ErrorKind::Config, "bad state box", "box");
  if (dim != spec_.metric.state_dim()) {
    throw Error(ErrorKind::Config, "state box does not match the metric", "box");
  }
  for (std::size_t i = 0; i < dim; ++i) {
    if (!(spec_.lo[i] < spec_.hi[i])) throw Error(ErrorKind::Config, "empty state box", "box");
  }
  if (spec_.horizon == 0) throw Error(ErrorKind::Config, "horizon must be positive", "horizon");
  if (!(spec_.noise >= 0.0)) {
    throw Error(ErrorKind::Config, "noise half-width must be nonnegative", "noise");
  }
  if (!spec_.drift || !spec_.reward) {
    throw Error(ErrorKind::Config, "drift and reward functions are required");
  }
  if (spec_.initial_state.size() != dim) {
    throw Error(ErrorKind::Config, "initial state has wrong dimension", "initial_state");
  }
}

void ContinuousMDP::check_step(std::size_t h, std::span<const double> x, std::size_t a) const {
  check_h(h, spec_.horizon);
  if (x.size() != state_dim()) throw Error(ErrorKind::InvalidPoint, "state has wrong dimension");
  if (a >= n_actions()) throw Error(ErrorKind::InvalidPoint, "action index out of range");
}

double ContinuousMDP::reward(std::size_t h, std::span<const double> x, std::size_t a) const {
  return std::clamp(spec_.reward(h, x, a), 0.0, 1.0);
}

std::vector<double> ContinuousMDP::next_with_noise(std::size_t h, std::span<const double> x,
                                                   std::size_t a,
                                                   std::span<const double> noise) const {
  std::vector<double> next = spec_.drift(h, x, a);
  for (std::size_t i = 0; i < next.size(); ++i) {
    next[i] = std::clamp(next[i] + noise[i], spec_.lo[i], spec_.hi[i]);
  }
  return next;
}

std::vector<double> ContinuousMDP::mean_next(std::size_t h, std::span<const double> x,
                                             std::size_t a) const {
  const std::vector<double> zero(state_dim(), 0.0);
  return next_with_noise(h, x, a, zero);
}

StepResult ContinuousMDP::step(std::size_t h, std::span<const double> x, std::size_t a,
                               Rng& rng) const {
  check_step(h, x, a);
  std::vector<double> noise(state_dim());
  for (double& n : noise) n = spec_.noise > 0.0 ? rng.uniform(-spec_.noise, spec_.noise) : 0.0;
  return {reward(h, x, a), next_with_noise(h, x, a, noise)};
}

ContinuousMDP make_lipschitz_chain(const ChainConfig& config) {
  if (config.noise < 0.0) {
    throw Error(ErrorKind::Config, "noise half-width must be nonnegative", "noise");
  }
  if (config.horizon == 0) throw Error(ErrorKind::Config, "horizon must be positive", "horizon");
  if (config.actions.empty()) throw Error(ErrorKind::Config, "action set is empty", "actions");
  std::vector<std::vector<double>> embeddings;
  for (double a : config.actions) embeddings.push_back({a});
  std::optional<double> gap;
  if (config.action_gap > 0.0) gap = config.action_gap;
  MetricSpace metric(1, embeddings, MetricKind::ProductLinf, gap);

  const std::vector<double> actions = config.actions;
  const double peak = config.peak;
  return ContinuousMDP(ContinuousMDP::Spec{
      .name = "chain",
      .horizon = config.horizon,
      .lo = {0.0},
      .hi = {1.0},
      .metric = std::move(metric),
      .drift = [actions](std::size_t, std::span<const double> x,
                         std::size_t a) { return std::vector<double>{x[0] + actions[a]}; },
      .reward = [peak](std::size_t, std::span<const double> x,
                       std::size_t) { return std::max(0.0, 1.0 - std::abs(x[0] - peak)); },
      .noise = config.noise,
      .initial_state = {std::clamp(config.initial_state, 0.0, 1.0)},
      .lipschitz_reward = 1.0,
      .lipschitz_transition = 1.0,
  });
}

std::size_t quadrature_nodes(const ContinuousMDP& env, std::size_t resolution) {
  if (env.noise() == 0.0) return 1;
  // At least 32 nodes, and at least 4 per grid cell spanned by the noise.
  double widest = 0.0;
  for (std::size_t i = 0; i < env.state_dim(); ++i) {
    const double cell = (env.hi()[i] - env.lo()[i]) / static_cast<double>(resolution);
    widest = std::max(widest, 2.0 * env.noise() / cell);
  }
  return std::max<std::size_t>(32, 4 * static_cast<std::size_t>(std::ceil(widest)));
}

FiniteMDP discretize(const ContinuousMDP& env, std::size_t resolution) {
  if (resolution < 2) throw Error(ErrorKind::Config, "grid resolution must be >= 2", "oracle_grid");
  const std::size_t dim = env.state_dim();
  const std::size_t H = env.horizon();
  const std::size_t A = env.n_actions();
  std::size_t S = 1;
  for (std::size_t i = 0; i < dim; ++i) S *= resolution;

  std::vector<double> width(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    width[i] = (env.hi()[i] - env.lo()[i]) / static_cast<double>(resolution);
  }

  // Row-major cell index, first coordinate outermost (matches grid pools).
  std::vector<std::vector<double>> coords(S, std::vector<double>(dim));
  for (std::size_t s = 0; s < S; ++s) {
    std::size_t rem = s;
    for (std::size_t i = dim; i-- > 0;) {
      const std::size_t k = rem % resolution;
      rem /= resolution;
      coords[s][i] = env.lo()[i] + (static_cast<double>(k) + 0.5) * width[i];
    }
  }
  auto cell_of = [&](std::span<const double> y) {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double f = std::floor((y[i] - env.lo()[i]) / width[i]);
      const auto k = static_cast<std::size_t>(
          std::clamp(f, 0.0, static_cast<double>(resolution - 1)));
      idx = idx * resolution + k;
    }
    return idx;
  };

  const std::size_t nodes = quadrature_nodes(env, resolution);
  std::size_t total_nodes = 1;
  for (std::size_t i = 0; i < dim; ++i) total_nodes *= nodes;
  std::vector<double> offsets(nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    offsets[j] = nodes == 1 ? 0.0
                            : -env.noise() + (static_cast<double>(j) + 0.5) * 2.0 *
                                                 env.noise() / static_cast<double>(nodes);
  }

  std::vector<double> rewards(H * S * A);
  std::vector<double> transitions(H * S * A * S, 0.0);
  std::vector<double> noise(dim);
  for (std::size_t h = 1; h <= H; ++h) {
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        const std::size_t row = ((h - 1) * S + s) * A + a;
        rewards[row] = env.reward(h, coords[s], a);
        double* out = transitions.data() + row * S;
        for (std::size_t n = 0; n < total_nodes; ++n) {
          std::size_t rem = n;
          for (std::size_t i = dim; i-- > 0;) {
            noise[i] = offsets[rem % nodes];
            rem /= nodes;
          }
          out[cell_of(env.next_with_noise(h, coords[s], a, noise))] += 1.0;
        }
        double sum = 0.0;
        for (std::size_t y = 0; y < S; ++y) sum += out[y];
        for (std::size_t y = 0; y < S; ++y) out[y] /= sum;
      }
    }
  }
  const std::size_t initial = cell_of(env.initial_state());
  return FiniteMDP(S, A, H, std::move(rewards), std::move(transitions), std::move(coords),
                   env.metric(), initial);
}

namespace {

// Calls f(h, ratio) over all distinct (state, action) pairs (p, q).
template <typename PairValue>
std::vector<double> max_pairwise_ratio(const FiniteMDP& env, PairValue&& value) {
  const std::size_t S = env.n_states();
  const std::size_t A = env.n_actions();
  const std::size_t H = env.horizon();
  const std::size_t m = S * A;
  std::vector<double> dist(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double d = env.metric().distance_unchecked(env.coords(i / A), i % A,
                                                       env.coords(j / A), j % A);
      if (!(d > 0.0)) {
        throw Error(ErrorKind::DegenerateMetric,
                    "distinct state-action pairs at zero distance: " + std::to_string(i) + ", " +
                        std::to_string(j));
      }
      dist[i * m + j] = d;
    }
  }
  std::vector<double> ratios(H, 0.0);
  for (std::size_t h = 1; h <= H; ++h) {
    double best = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        best = std::max(best, value(h, i / A, i % A, j / A, j % A) / dist[i * m + j]);
      }
    }
    ratios[h - 1] = best;
  }
  return ratios;
}

}  // namespace

std::vector<double> check_lipschitz_qstar(const FiniteMDP& env) {
  const ValueTables values = backward_induction(env);
  return max_pairwise_ratio(env, [&](std::size_t h, std::size_t x, std::size_t a, std::size_t y,
                                     std::size_t b) {
    return std::abs(values.qstar(h, x, a) - values.qstar(h, y, b));
  });
}

LipschitzConstants lipschitz_constants(const FiniteMDP& env) {
  LipschitzConstants out;
  out.reward = max_pairwise_ratio(
      env, [&](std::size_t h, std::size_t x, std::size_t a, std::size_t y, std::size_t b) {
        return std::abs(env.reward(h, x, a) - env.reward(h, y, b));
      });
  out.transition = max_pairwise_ratio(
      env, [&](std::size_t h, std::size_t x, std::size_t a, std::size_t y, std::size_t b) {
        const auto p = env.transition_row(h, x, a);
        const auto q = env.transition_row(h, y, b);
        double l1 = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) l1 += std::abs(p[k] - q[k]);
        return l1;
      });
  return out;
}

FiniteMDP make_random_finite(const RandomMDPConfig& config, std::uint64_t seed) {
  const std::size_t S = config.n_states;
  const std::size_t A = config.n_actions;
  const std::size_t H = config.horizon;
  if (S == 0 || A == 0 || H == 0) {
    throw Error(ErrorKind::Config, "n_states, n_actions and horizon must be positive");
  }
  if (!(config.state_span > 0.0)) {
    throw Error(ErrorKind::Config, "state_span must be positive", "state_span");
  }
  Rng rng(seed);
  std::vector<std::vector<double>> coords(S);
  for (std::size_t x = 0; x < S; ++x) {
    coords[x] = {S == 1 ? 0.0 : config.state_span * static_cast<double>(x) /
                                    static_cast<double>(S - 1)};
  }
  std::vector<std::vector<double>> embeddings(A);
  for (std::size_t a = 0; a < A; ++a) {
    embeddings[a] = {A == 1 ? 0.0 : static_cast<double>(a) / static_cast<double>(A - 1)};
  }
  MetricSpace metric(1, embeddings);

  std::vector<double> rewards(H * S * A);
  for (double& r : rewards) r = rng.uniform();
  std::vector<double> transitions(H * S * A * S, 0.0);
  const std::size_t support = config.support == 0 ? S : std::min(config.support, S);
  for (std::size_t row = 0; row < H * S * A; ++row) {
    double* out = transitions.data() + row * S;
    std::vector<std::size_t> chosen;
    while (chosen.size() < support) {
      const auto y = static_cast<std::size_t>(rng.below(S));
      if (std::find(chosen.begin(), chosen.end(), y) == chosen.end()) chosen.push_back(y);
    }
    double sum = 0.0;
    for (std::size_t y : chosen) {
      // Exponential weights give a flat Dirichlet row.
      out[y] = -std::log(1.0 - rng.uniform());
      sum += out[y];
    }
    for (std::size_t y = 0; y < S; ++y) out[y] /= sum;
  }

  FiniteMDP raw(S, A, H, rewards, transitions, coords, metric, 0);
  if (!config.lipschitz) return raw;

  // Contract each step's rewards toward their mean and each step's rows
  // toward the mean row until both are 1-Lipschitz.
  const LipschitzConstants lc = lipschitz_constants(raw);
  for (std::size_t h = 1; h <= H; ++h) {
    const std::size_t base = (h - 1) * S * A;
    if (lc.reward[h - 1] > 1.0) {
      double mean = 0.0;
      for (std::size_t i = 0; i < S * A; ++i) mean += rewards[base + i];
      mean /= static_cast<double>(S * A);
      const double shrink = 1.0 / lc.reward[h - 1];
      for (std::size_t i = 0; i < S * A; ++i) {
        rewards[base + i] = mean + shrink * (rewards[base + i] - mean);
      }
    }
    if (lc.transition[h - 1] > 1.0) {
      std::vector<double> mean_row(S, 0.0);
      for (std::size_t i = 0; i < S * A; ++i) {
        for (std::size_t y = 0; y < S; ++y) mean_row[y] += transitions[(base + i) * S + y];
      }
      for (double& v : mean_row) v /= static_cast<double>(S * A);
      const double shrink = 1.0 / lc.transition[h - 1];
      for (std::size_t i = 0; i < S * A; ++i) {
        for (std::size_t y = 0; y < S; ++y) {
          double& p = transitions[(base + i) * S + y];
          p = shrink * p + (1.0 - shrink) * mean_row[y];
        }
      }
    }
  }
  return FiniteMDP(S, A, H, std::move(rewards), std::move(transitions), std::move(coords),
                   std::move(metric), 0);
}

void write_finite_mdp(std::ostream& out, const FiniteMDP& env) {
  const std::size_t S = env.n_states(), A = env.n_actions(), H = env.horizon();
  out << S << ' ' << A << ' ' << H << '\n';
  for (std::size_t h = 1; h <= H; ++h) {
    for (std::size_t x = 0; x < S; ++x) {
      for (std::size_t a = 0; a < A; ++a) {
        out << (a ? " " : "") << detail::fmt_g(env.reward(h, x, a));
      }
      out << '\n';
    }
  }
  for (std::size_t h = 1; h <= H; ++h) {
    for (std::size_t x = 0; x < S; ++x) {
      for (std::size_t a = 0; a < A; ++a) {
        const auto row = env.transition_row(h, x, a);
        for (std::size_t y = 0; y < S; ++y) out << (y ? " " : "") << detail::fmt_g(row[y]);
        out << '\n';
      }
    }
  }
}

void save_finite_mdp(const std::string& path, const FiniteMDP& env) {
  auto out = detail::open_out(path);
  write_finite_mdp(out, env);
}

FiniteMDP read_finite_mdp(std::istream& in) {
  const auto S = detail::read_value<std::size_t>(in, "n_states");
  const auto A = detail::read_value<std::size_t>(in, "n_actions");
  const auto H = detail::read_value<std::size_t>(in, "H");
  if (S == 0 || A == 0 || H == 0) throw Error(ErrorKind::Io, "MDP file header has a zero size");
  std::vector<double> rewards(H * S * A);
  for (double& r : rewards) r = detail::read_value<double>(in, "reward");
  std::vector<double> transitions(H * S * A * S);
  for (double& p : transitions) p = detail::read_value<double>(in, "transition probability");
  std::vector<std::vector<double>> coords(S);
  for (std::size_t x = 0; x < S; ++x) coords[x] = {static_cast<double>(x)};
  std::vector<std::vector<double>> embeddings(A, std::vector<double>{0.0});
  MetricSpace metric(1, embeddings, MetricKind::ProductLinf, static_cast<double>(S));
  return FiniteMDP(S, A, H, std::move(rewards), std::move(transitions), std::move(coords),
                   std::move(metric), 0);
}

FiniteMDP load_finite_mdp(const std::string& path) {
  auto in = detail::open_in(path);
  return read_finite_mdp(in);
}

}  // namespace nbql
