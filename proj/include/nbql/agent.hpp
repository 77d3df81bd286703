#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nbql/envs.hpp"
#include "nbql/metric.hpp"

namespace nbql {

// Bonus and learning-rate parameters. gamma = ln(N * T / p) with T = H * K.
struct AgentParams {
  double c = 0.5;
  double p = 0.1;
  std::size_t K = 1;
  std::size_t H = 1;
  std::size_t N = 1;
  double gamma = 0.0;

  // Validates and computes gamma. c may be 0 (exploration off).
  static AgentParams make(double c, double p, std::size_t K, std::size_t H, std::size_t N);
};

// alpha_t = (H + 1) / (H + t), t >= 1.
double learning_rate(std::size_t t, std::size_t H);

struct AlphaWeights {
  double alpha0 = 1.0;          // prod_{j=1}^t (1 - alpha_j)
  std::vector<double> weights;  // weights[i-1] = alpha_i prod_{j=i+1}^t (1 - alpha_j)
};

// Throws Error(InvalidArgument) for t < 0.
AlphaWeights alpha_weights(std::int64_t t, std::size_t H);

// c * sqrt(H^3 * gamma / t). Throws Error(InvalidArgument) for t < 1.
double bonus(std::int64_t t, const AgentParams& params);

struct UpdateRecord {
  std::size_t h = 0;
  std::size_t center = 0;
  std::size_t t = 0;
  double alpha = 0.0;
  double bonus = 0.0;
  double target = 0.0;  // r + V_{h+1}(x') + b_t
  double q = 0.0;       // new Q_h(center)

  friend bool operator==(const UpdateRecord&, const UpdateRecord&) = default;
};

// Q and visit-count tables over (h, net center), H x N, dense row-major.
// Initialized to Q = H and n = 0. Copies are independent snapshots.
class AgentState {
 public:
  AgentState(MetricSpace space, EpsNet net, AgentParams params);

  const MetricSpace& space() const noexcept { return space_; }
  const EpsNet& net() const noexcept { return net_; }
  const AgentParams& params() const noexcept { return params_; }
  std::size_t horizon() const noexcept { return params_.H; }
  std::size_t n_centers() const noexcept { return net_.size(); }
  std::size_t n_actions() const noexcept { return space_.n_actions(); }

  double q(std::size_t h, std::size_t i) const { return q_[index(h, i)]; }
  std::uint64_t count(std::size_t h, std::size_t i) const { return n_[index(h, i)]; }
  void set_q(std::size_t h, std::size_t i, double value) { q_[index(h, i)] = value; }

  const std::vector<double>& q_table() const noexcept { return q_; }
  const std::vector<std::uint64_t>& count_table() const noexcept { return n_; }

  // phi(x, a) by linear scan over the net.
  std::size_t quantize(std::span<const double> x, std::size_t a) const {
    return net_.nearest(space_, x, a).index;
  }

  // Total updates made at step h (sum of the count row).
  std::uint64_t updates_at(std::size_t h) const;

 private:
  friend UpdateRecord observe(AgentState&, std::size_t, std::span<const double>, std::size_t,
                              double, std::span<const double>);
  friend AgentState read_checkpoint(std::istream&, MetricSpace, EpsNet);

  std::size_t index(std::size_t h, std::size_t i) const {
    return (h - 1) * net_.size() + i;
  }

  MetricSpace space_;
  EpsNet net_;
  AgentParams params_;
  std::vector<double> q_;
  std::vector<std::uint64_t> n_;
};

// V_h(x) = min(H, max_a Q_h(phi(x, a))) for h <= H; 0 at h = H + 1.
double value_of_state(const AgentState& agent, std::size_t h, std::span<const double> x);

// argmax_a Q_h(phi(x, a)), lowest action index on ties.
std::size_t select_action(const AgentState& agent, std::size_t h, std::span<const double> x);

// One Q-learning step at (h, phi(x, a)) with target r + V_{h+1}(x_next) + b_t.
// Throws Error(Protocol) when h is outside [1, H].
UpdateRecord observe(AgentState& agent, std::size_t h, std::span<const double> x,
                     std::size_t a, double r, std::span<const double> x_next);

struct HistoryEntry {
  double r = 0.0;
  double v = 0.0;
  double b = 0.0;
};

// alpha_t^0 * H + sum_i alpha_t^i (r_i + v_i + b_i) for the ordered targets
// applied to one cell.
double q_closed_form(std::span<const HistoryEntry> history, std::size_t H);

// The same recursion applied incrementally, starting from Q = H.
double q_incremental(std::span<const HistoryEntry> history, std::size_t H);

// Agent whose net is every (state, action) pair of a finite MDP, so phi is
// the identity and the learner is tabular optimistic Q-learning.
AgentState make_tabular_baseline(const FiniteMDP& env, double c, double p, std::size_t K);

// Text checkpoint: "H N c p K gamma", then H rows of N Q values, then H rows
// of N counts. Values use 17 significant digits and round-trip exactly.
void write_checkpoint(std::ostream& out, const AgentState& agent);
void save_checkpoint(const std::string& path, const AgentState& agent);
AgentState read_checkpoint(std::istream& in, MetricSpace space, EpsNet net);
AgentState load_checkpoint(const std::string& path, MetricSpace space, EpsNet net);

}  // namespace nbql
