#include "nbql/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "nbql/agent.hpp"
#include "nbql/error.hpp"
#include "text.hpp"

namespace nbql {

ValueTables::ValueTables(std::size_t n_states, std::size_t n_actions, std::size_t horizon)
    : n_states_(n_states),
      n_actions_(n_actions),
      horizon_(horizon),
      qstar_(horizon * n_states * n_actions, 0.0),
      vstar_((horizon + 1) * n_states, 0.0),
      pistar_(horizon * n_states, 0) {}

ValueTables backward_induction(const FiniteMDP& env) {
  const std::size_t S = env.n_states(), A = env.n_actions(), H = env.horizon();
  ValueTables v(S, A, H);
  for (std::size_t h = H; h >= 1; --h) {
    for (std::size_t x = 0; x < S; ++x) {
      double best = -1.0;
      std::size_t best_a = 0;
      for (std::size_t a = 0; a < A; ++a) {
        const auto row = env.transition_row(h, x, a);
        double q = env.reward(h, x, a);
        for (std::size_t y = 0; y < S; ++y) q += row[y] * v.vstar(h + 1, y);
        v.qstar(h, x, a) = q;
        if (q > best) {
          best = q;
          best_a = a;
        }
      }
      v.vstar(h, x) = best;
      v.pistar(h, x) = best_a;
    }
  }
  return v;
}

Policy optimal_policy(const ValueTables& values) {
  Policy pi(values.n_states(), values.horizon());
  for (std::size_t h = 1; h <= values.horizon(); ++h) {
    for (std::size_t x = 0; x < values.n_states(); ++x) pi.at(h, x) = values.pistar(h, x);
  }
  return pi;
}

double bellman_residual(const FiniteMDP& env, const ValueTables& values) {
  double worst = 0.0;
  for (std::size_t h = 1; h <= env.horizon(); ++h) {
    for (std::size_t x = 0; x < env.n_states(); ++x) {
      double vmax = -1.0;
      for (std::size_t a = 0; a < env.n_actions(); ++a) {
        const auto row = env.transition_row(h, x, a);
        double target = env.reward(h, x, a);
        for (std::size_t y = 0; y < env.n_states(); ++y) target += row[y] * values.vstar(h + 1, y);
        worst = std::max(worst, std::abs(values.qstar(h, x, a) - target));
        vmax = std::max(vmax, values.qstar(h, x, a));
      }
      worst = std::max(worst, std::abs(values.vstar(h, x) - vmax));
    }
  }
  return worst;
}

std::vector<double> evaluate_policy(
    const FiniteMDP& env, const std::function<std::size_t(std::size_t, std::size_t)>& policy) {
  const std::size_t S = env.n_states(), H = env.horizon();
  std::vector<double> v((H + 1) * S, 0.0);
  for (std::size_t h = H; h >= 1; --h) {
    const double* next = v.data() + h * S;
    for (std::size_t x = 0; x < S; ++x) {
      const std::size_t a = policy(h, x);
      if (a >= env.n_actions()) {
        throw Error(ErrorKind::Policy, "policy chose action " + std::to_string(a) + " at h=" +
                                           std::to_string(h) + ", x=" + std::to_string(x));
      }
      const auto row = env.transition_row(h, x, a);
      double value = env.reward(h, x, a);
      for (std::size_t y = 0; y < S; ++y) value += row[y] * next[y];
      v[(h - 1) * S + x] = value;
    }
  }
  return v;
}

std::vector<double> evaluate_policy(const FiniteMDP& env, const Policy& policy) {
  if (policy.n_states() != env.n_states() || policy.horizon() != env.horizon()) {
    throw Error(ErrorKind::Policy, "policy shape does not match the MDP");
  }
  return evaluate_policy(env, [&](std::size_t h, std::size_t x) { return policy(h, x); });
}

std::vector<std::size_t> quantization_table(const AgentState& agent, const FiniteMDP& env) {
  if (agent.space().state_dim() != env.metric().state_dim() ||
      agent.n_actions() != env.n_actions()) {
    throw Error(ErrorKind::Config, "agent space does not match the MDP");
  }
  std::vector<std::size_t> phi(env.n_states() * env.n_actions());
  for (std::size_t x = 0; x < env.n_states(); ++x) {
    for (std::size_t a = 0; a < env.n_actions(); ++a) {
      phi[x * env.n_actions() + a] = agent.quantize(env.coords(x), a);
    }
  }
  return phi;
}

Policy extract_greedy_policy(const AgentState& agent, const FiniteMDP& env,
                             std::span<const std::size_t> phi) {
  const std::size_t S = env.n_states(), A = env.n_actions(), H = env.horizon();
  if (agent.horizon() != H) throw Error(ErrorKind::Config, "agent horizon does not match the MDP");
  Policy pi(S, H);
  for (std::size_t h = 1; h <= H; ++h) {
    for (std::size_t x = 0; x < S; ++x) {
      std::size_t best_a = 0;
      double best = agent.q(h, phi[x * A]);
      for (std::size_t a = 1; a < A; ++a) {
        const double v = agent.q(h, phi[x * A + a]);
        if (v > best) {
          best = v;
          best_a = a;
        }
      }
      pi.at(h, x) = best_a;
    }
  }
  return pi;
}

Policy extract_greedy_policy(const AgentState& agent, const FiniteMDP& env) {
  return extract_greedy_policy(agent, env, quantization_table(agent, env));
}

std::vector<double> agent_values(const AgentState& agent, const FiniteMDP& env,
                                 std::span<const std::size_t> phi) {
  const std::size_t S = env.n_states(), A = env.n_actions(), H = env.horizon();
  const double cap = static_cast<double>(agent.horizon());
  std::vector<double> v((H + 1) * S, 0.0);
  for (std::size_t h = 1; h <= H; ++h) {
    for (std::size_t x = 0; x < S; ++x) {
      double best = agent.q(h, phi[x * A]);
      for (std::size_t a = 1; a < A; ++a) best = std::max(best, agent.q(h, phi[x * A + a]));
      v[(h - 1) * S + x] = std::min(cap, best);
    }
  }
  return v;
}

void RegretCurve::append(double optimal, double achieved) {
  vstar.push_back(optimal);
  vpi.push_back(achieved);
  cumulative.push_back(total() + (optimal - achieved));
}

RegretCurve true_regret(const FiniteMDP& env, const std::vector<Policy>& policies) {
  const ValueTables values = backward_induction(env);
  const std::size_t x1 = env.initial_state();
  RegretCurve curve;
  for (const Policy& pi : policies) {
    curve.append(values.vstar(1, x1), evaluate_policy(env, pi)[x1]);
  }
  return curve;
}

void write_value_tables(std::ostream& out, const ValueTables& values) {
  const std::size_t S = values.n_states(), A = values.n_actions(), H = values.horizon();
  out << S << ' ' << A << ' ' << H << '\n';
  for (std::size_t h = 1; h <= H; ++h) {
    for (std::size_t x = 0; x < S; ++x) {
      for (std::size_t a = 0; a < A; ++a) {
        out << (a ? " " : "") << detail::fmt_g(values.qstar(h, x, a));
      }
      out << '\n';
    }
  }
  for (std::size_t h = 1; h <= H + 1; ++h) {
    for (std::size_t x = 0; x < S; ++x) out << (x ? " " : "") << detail::fmt_g(values.vstar(h, x));
    out << '\n';
  }
  for (std::size_t h = 1; h <= H; ++h) {
    for (std::size_t x = 0; x < S; ++x) out << (x ? " " : "") << values.pistar(h, x);
    out << '\n';
  }
}

void save_value_tables(const std::string& path, const ValueTables& values) {
  auto out = detail::open_out(path);
  write_value_tables(out, values);
}

}  // namespace nbql
