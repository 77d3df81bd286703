#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nbql/metric.hpp"
#include "nbql/rng.hpp"

namespace nbql {

struct StepResult {
  double reward = 0.0;
  std::vector<double> next_state;
};

// Tabular episodic MDP. Steps h are 1-based in the public API.
//
// Every state carries coordinates in the metric space so that learners
// working over a net can quantize (state, action) pairs.
class FiniteMDP {
 public:
  // rewards: H * S * A entries, index ((h-1) * S + x) * A + a.
  // transitions: H * S * A * S entries, index (((h-1) * S + x) * A + a) * S + x'.
  FiniteMDP(std::size_t n_states, std::size_t n_actions, std::size_t horizon,
            std::vector<double> rewards, std::vector<double> transitions,
            std::vector<std::vector<double>> state_coords, MetricSpace metric,
            std::size_t initial_state = 0);

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  std::size_t horizon() const noexcept { return horizon_; }
  std::size_t initial_state() const noexcept { return initial_state_; }
  const MetricSpace& metric() const noexcept { return metric_; }
  const std::vector<double>& coords(std::size_t x) const { return state_coords_.at(x); }
  Point point(std::size_t x, std::size_t a) const { return Point{coords(x), a}; }

  double reward(std::size_t h, std::size_t x, std::size_t a) const {
    return rewards_[((h - 1) * n_states_ + x) * n_actions_ + a];
  }
  // Next-state distribution P_h(. | x, a), length n_states.
  std::span<const double> transition_row(std::size_t h, std::size_t x, std::size_t a) const {
    return {transitions_.data() + (((h - 1) * n_states_ + x) * n_actions_ + a) * n_states_,
            n_states_};
  }

  const std::vector<double>& reward_table() const noexcept { return rewards_; }
  const std::vector<double>& transition_table() const noexcept { return transitions_; }

  // Index of the state whose coordinates are nearest (L-infinity) to `state`.
  std::size_t locate(std::span<const double> state) const;

  // Categorical draw from P_h(. | x, a); the reward is deterministic.
  // Throws Error(Protocol) when h is outside [1, H].
  std::pair<double, std::size_t> step(std::size_t h, std::size_t x, std::size_t a,
                                      Rng& rng) const;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::size_t horizon_;
  std::vector<double> rewards_;
  std::vector<double> transitions_;
  std::vector<std::vector<double>> state_coords_;
  MetricSpace metric_;
  std::size_t initial_state_;
};

// Continuous-state episodic MDP with a finite embedded action set and
// additive uniform noise:
//   x' = clamp(drift(h, x, a) + U[-noise, noise]^dim, box)
// A sampler description rather than a density; discretize() builds the
// exact kernel on a grid by quadrature over the noise.
class ContinuousMDP {
 public:
  using DriftFn = std::function<std::vector<double>(std::size_t h, std::span<const double> x,
                                                    std::size_t a)>;
  using RewardFn = std::function<double(std::size_t h, std::span<const double> x, std::size_t a)>;

  struct Spec {
    std::string name;
    std::size_t horizon = 1;
    std::vector<double> lo;
    std::vector<double> hi;
    MetricSpace metric;
    DriftFn drift;
    RewardFn reward;
    double noise = 0.0;
    std::vector<double> initial_state;
    // Declared Lipschitz constants of reward and transition mean under the metric.
    double lipschitz_reward = 1.0;
    double lipschitz_transition = 1.0;
  };

  explicit ContinuousMDP(Spec spec);

  const std::string& name() const noexcept { return spec_.name; }
  std::size_t horizon() const noexcept { return spec_.horizon; }
  std::size_t state_dim() const noexcept { return spec_.lo.size(); }
  std::size_t n_actions() const noexcept { return spec_.metric.n_actions(); }
  const std::vector<double>& lo() const noexcept { return spec_.lo; }
  const std::vector<double>& hi() const noexcept { return spec_.hi; }
  const MetricSpace& metric() const noexcept { return spec_.metric; }
  double noise() const noexcept { return spec_.noise; }
  const std::vector<double>& initial_state() const noexcept { return spec_.initial_state; }
  double lipschitz_reward() const noexcept { return spec_.lipschitz_reward; }
  double lipschitz_transition() const noexcept { return spec_.lipschitz_transition; }

  double reward(std::size_t h, std::span<const double> x, std::size_t a) const;
  // Noise-free next state, clamped to the box.
  std::vector<double> mean_next(std::size_t h, std::span<const double> x, std::size_t a) const;
  // Next state for an explicit noise vector (one entry per coordinate).
  std::vector<double> next_with_noise(std::size_t h, std::span<const double> x, std::size_t a,
                                      std::span<const double> noise) const;

  // Throws Error(Protocol) when h is outside [1, H].
  StepResult step(std::size_t h, std::span<const double> x, std::size_t a, Rng& rng) const;

 private:
  void check_step(std::size_t h, std::span<const double> x, std::size_t a) const;

  Spec spec_;
};

struct ChainConfig {
  std::size_t horizon = 3;
  std::vector<double> actions{-0.2, -0.1, 0.0, 0.1, 0.2};
  double noise = 0.05;
  double peak = 0.75;
  double initial_state = 0.25;
  // Distance between distinct actions; larger than the state diameter so
  // that quantization never crosses actions. Non-positive means "use the
  // embedding distance".
  double action_gap = 2.0;
};

// State space [0, 1]; x' = clamp(x + a + U[-noise, noise]);
// r(x, a) = max(0, 1 - |x - peak|).
ContinuousMDP make_lipschitz_chain(const ChainConfig& config = {});

// Grid surrogate: `resolution` cells per state dimension, states at cell
// centers, rows built by midpoint quadrature over the noise and
// renormalized. Deterministic.
FiniteMDP discretize(const ContinuousMDP& env, std::size_t resolution);

// Midpoint nodes per noise dimension used by discretize().
std::size_t quadrature_nodes(const ContinuousMDP& env, std::size_t resolution);

// Per step h (index h-1): max over distinct pairs of |Q*_h(p) - Q*_h(q)| / D(p, q).
// Throws Error(DegenerateMetric) if two distinct pairs are at distance 0.
std::vector<double> check_lipschitz_qstar(const FiniteMDP& env);

struct LipschitzConstants {
  std::vector<double> reward;      // per h: max |r_h(p) - r_h(q)| / D(p, q)
  std::vector<double> transition;  // per h: max ||P_h(.|p) - P_h(.|q)||_1 / D(p, q)
};

// Empirical reward and transition Lipschitz constants by exhaustive pairwise scan.
LipschitzConstants lipschitz_constants(const FiniteMDP& env);

struct RandomMDPConfig {
  std::size_t n_states = 5;
  std::size_t n_actions = 3;
  std::size_t horizon = 4;
  // Transition rows are drawn with only this many nonzero entries (0 = dense).
  std::size_t support = 0;
  // When set, rewards and transitions are contracted so that both are
  // 1-Lipschitz under the metric.
  bool lipschitz = false;
  // States sit evenly on [0, state_span].
  double state_span = 1.0;
};

// Random MDP with evenly spaced 1-D states and actions embedded on
// [0, 1]; product L-infinity metric with no action gap.
FiniteMDP make_random_finite(const RandomMDPConfig& config, std::uint64_t seed);

// Text format: "n_states n_actions H", then H*S reward rows of A values,
// then for each h, S*A transition rows of S values.
// Imported files get 1-D coordinates (state index), product L-infinity
// metric with action gap n_states, and initial state 0.
void write_finite_mdp(std::ostream& out, const FiniteMDP& env);
void save_finite_mdp(const std::string& path, const FiniteMDP& env);
FiniteMDP read_finite_mdp(std::istream& in);
FiniteMDP load_finite_mdp(const std::string& path);

}  // namespace nbql
