#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nbql/envs.hpp"

namespace nbql {

class AgentState;

// Exact optimal values of a FiniteMDP. Steps are 1-based; V*_{H+1} = 0 is
// stored so that vstar(H + 1, x) is valid.
class ValueTables {
 public:
  ValueTables(std::size_t n_states, std::size_t n_actions, std::size_t horizon);

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  std::size_t horizon() const noexcept { return horizon_; }

  double qstar(std::size_t h, std::size_t x, std::size_t a) const {
    return qstar_[((h - 1) * n_states_ + x) * n_actions_ + a];
  }
  double vstar(std::size_t h, std::size_t x) const { return vstar_[(h - 1) * n_states_ + x]; }
  std::size_t pistar(std::size_t h, std::size_t x) const {
    return pistar_[(h - 1) * n_states_ + x];
  }

  double& qstar(std::size_t h, std::size_t x, std::size_t a) {
    return qstar_[((h - 1) * n_states_ + x) * n_actions_ + a];
  }
  double& vstar(std::size_t h, std::size_t x) { return vstar_[(h - 1) * n_states_ + x]; }
  std::size_t& pistar(std::size_t h, std::size_t x) { return pistar_[(h - 1) * n_states_ + x]; }

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::size_t horizon_;
  std::vector<double> qstar_;
  std::vector<double> vstar_;  // (H + 1) * S
  std::vector<std::size_t> pistar_;
};

// Deterministic Markov policy as a table over (h, state).
class Policy {
 public:
  Policy(std::size_t n_states, std::size_t horizon, std::size_t fill = 0)
      : n_states_(n_states), horizon_(horizon), actions_(n_states * horizon, fill) {}

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t horizon() const noexcept { return horizon_; }
  std::size_t operator()(std::size_t h, std::size_t x) const {
    return actions_[(h - 1) * n_states_ + x];
  }
  std::size_t& at(std::size_t h, std::size_t x) { return actions_[(h - 1) * n_states_ + x]; }
  const std::vector<std::size_t>& table() const noexcept { return actions_; }

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  std::size_t n_states_;
  std::size_t horizon_;
  std::vector<std::size_t> actions_;
};

ValueTables backward_induction(const FiniteMDP& env);

// Pistar of a ValueTables as a Policy.
Policy optimal_policy(const ValueTables& values);

// max over (h, x, a) of |Q*_h - r_h - P_h V*_{h+1}|.
double bellman_residual(const FiniteMDP& env, const ValueTables& values);

// Exact V^pi, (H + 1) * S entries indexed (h - 1) * S + x, last block zero.
// Throws Error(Policy) on an out-of-range action.
std::vector<double> evaluate_policy(const FiniteMDP& env, const Policy& policy);
std::vector<double> evaluate_policy(
    const FiniteMDP& env, const std::function<std::size_t(std::size_t, std::size_t)>& policy);

// phi(x, a) for every state-action pair of `env`, indexed x * A + a. The net
// is fixed during learning, so this can be computed once per run.
std::vector<std::size_t> quantization_table(const AgentState& agent, const FiniteMDP& env);

// select_action at every (h, x) of `env`, with the agent frozen.
Policy extract_greedy_policy(const AgentState& agent, const FiniteMDP& env);
Policy extract_greedy_policy(const AgentState& agent, const FiniteMDP& env,
                             std::span<const std::size_t> phi);

// The agent's V_h(x) at every state of `env`, (H + 1) * S entries like
// evaluate_policy.
std::vector<double> agent_values(const AgentState& agent, const FiniteMDP& env,
                                 std::span<const std::size_t> phi);

struct RegretCurve {
  std::vector<double> vstar;  // V*_1(x_1^k)
  std::vector<double> vpi;    // V_1^{pi_k}(x_1^k)
  std::vector<double> cumulative;

  void append(double optimal, double achieved);
  std::size_t size() const noexcept { return cumulative.size(); }
  double total() const noexcept { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

// One executed policy per episode, all started from env.initial_state().
RegretCurve true_regret(const FiniteMDP& env, const std::vector<Policy>& policies);

// Text export: "n_states n_actions H", then H*S rows of A Q* values, then
// (H+1) rows of S V* values, then H rows of S greedy actions.
void write_value_tables(std::ostream& out, const ValueTables& values);
void save_value_tables(const std::string& path, const ValueTables& values);

}  // namespace nbql
