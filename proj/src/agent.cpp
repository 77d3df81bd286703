#include "nbql/agent.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "nbql/error.hpp"
#include "text.hpp"

namespace nbql {

AgentParams AgentParams::make(double c, double p, std::size_t K, std::size_t H, std::size_t N) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw Error(ErrorKind::Config, "c must be >= 0", "c");
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::Config, "p must lie in (0, 1)", "p");
  if (K == 0) throw Error(ErrorKind::Config, "K must be >= 1", "episodes");
  if (H == 0) throw Error(ErrorKind::Config, "H must be >= 1", "horizon");
  if (N == 0) throw Error(ErrorKind::Config, "net must be non-empty", "epsilon");
  AgentParams out{c, p, K, H, N, 0.0};
  const double T = static_cast<double>(H) * static_cast<double>(K);
  out.gamma = std::log(static_cast<double>(N) * T / p);
  return out;
}

double learning_rate(std::size_t t, std::size_t H) {
  if (t == 0) throw Error(ErrorKind::InvalidArgument, "learning rate needs t >= 1");
  return static_cast<double>(H + 1) / static_cast<double>(H + t);
}

AlphaWeights alpha_weights(std::int64_t t, std::size_t H) {
  if (t < 0) throw Error(ErrorKind::InvalidArgument, "alpha_weights needs t >= 0");
  AlphaWeights out;
  out.weights.resize(static_cast<std::size_t>(t));
  // Running tail product prod_{j=i+1}^t (1 - alpha_j), built from i = t down.
  double tail = 1.0;
  for (auto i = static_cast<std::size_t>(t); i >= 1; --i) {
    const double a = learning_rate(i, H);
    out.weights[i - 1] = a * tail;
    tail *= 1.0 - a;
  }
  out.alpha0 = tail;
  return out;
}

double bonus(std::int64_t t, const AgentParams& params) {
  if (t < 1) throw Error(ErrorKind::InvalidArgument, "bonus needs t >= 1");
  const double H = static_cast<double>(params.H);
  return params.c * std::sqrt(H * H * H * params.gamma / static_cast<double>(t));
}

AgentState::AgentState(MetricSpace space, EpsNet net, AgentParams params)
    : space_(std::move(space)),
      net_(std::move(net)),
      params_(params),
      q_(params.H * net_.size(), static_cast<double>(params.H)),
      n_(params.H * net_.size(), 0) {
  if (params_.N != net_.size()) {
    throw Error(ErrorKind::Config, "params.N does not match the net size", "epsilon");
  }
  for (const Point& c : net_.centers()) space_.validate(c);
}

std::uint64_t AgentState::updates_at(std::size_t h) const {
  const auto first = n_.begin() + static_cast<std::ptrdiff_t>((h - 1) * net_.size());
  return std::accumulate(first, first + static_cast<std::ptrdiff_t>(net_.size()),
                         std::uint64_t{0});
}

double value_of_state(const AgentState& agent, std::size_t h, std::span<const double> x) {
  const std::size_t H = agent.horizon();
  if (h < 1 || h > H + 1) throw Error(ErrorKind::Protocol, "value_of_state: h out of range");
  if (h == H + 1) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < agent.n_actions(); ++a) {
    best = std::max(best, agent.q(h, agent.quantize(x, a)));
  }
  return std::min(static_cast<double>(H), best);
}

std::size_t select_action(const AgentState& agent, std::size_t h, std::span<const double> x) {
  if (h < 1 || h > agent.horizon()) {
    throw Error(ErrorKind::Protocol, "select_action: h out of range");
  }
  if (x.size() != agent.space().state_dim()) {
    throw Error(ErrorKind::InvalidPoint, "select_action: state has wrong dimension");
  }
  std::size_t best_a = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < agent.n_actions(); ++a) {
    const double v = agent.q(h, agent.quantize(x, a));
    if (v > best) {
      best = v;
      best_a = a;
    }
  }
  return best_a;
}

UpdateRecord observe(AgentState& agent, std::size_t h, std::span<const double> x,
                     std::size_t a, double r, std::span<const double> x_next) {
  const std::size_t H = agent.horizon();
  if (h < 1 || h > H) throw Error(ErrorKind::Protocol, "observe: h out of range");
  if (a >= agent.n_actions()) throw Error(ErrorKind::InvalidPoint, "observe: bad action");
  if (x.size() != agent.space().state_dim() || x_next.size() != agent.space().state_dim()) {
    throw Error(ErrorKind::InvalidPoint, "observe: state has wrong dimension");
  }
  UpdateRecord rec;
  rec.h = h;
  rec.center = agent.quantize(x, a);
  const std::size_t idx = agent.index(h, rec.center);
  rec.t = static_cast<std::size_t>(++agent.n_[idx]);
  rec.alpha = learning_rate(rec.t, H);
  rec.bonus = bonus(static_cast<std::int64_t>(rec.t), agent.params());
  rec.target = r + value_of_state(agent, h + 1, x_next) + rec.bonus;
  agent.q_[idx] = (1.0 - rec.alpha) * agent.q_[idx] + rec.alpha * rec.target;
  rec.q = agent.q_[idx];
  return rec;
}

double q_closed_form(std::span<const HistoryEntry> history, std::size_t H) {
  const AlphaWeights w = alpha_weights(static_cast<std::int64_t>(history.size()), H);
  double q = w.alpha0 * static_cast<double>(H);
  for (std::size_t i = 0; i < history.size(); ++i) {
    q += w.weights[i] * (history[i].r + history[i].v + history[i].b);
  }
  return q;
}

double q_incremental(std::span<const HistoryEntry> history, std::size_t H) {
  double q = static_cast<double>(H);
  for (std::size_t t = 1; t <= history.size(); ++t) {
    const HistoryEntry& e = history[t - 1];
    const double a = learning_rate(t, H);
    q = (1.0 - a) * q + a * (e.r + e.v + e.b);
  }
  return q;
}

AgentState make_tabular_baseline(const FiniteMDP& env, double c, double p, std::size_t K) {
  const std::size_t S = env.n_states(), A = env.n_actions();
  std::vector<Point> pairs;
  pairs.reserve(S * A);
  for (std::size_t x = 0; x < S; ++x) {
    for (std::size_t a = 0; a < A; ++a) pairs.push_back(env.point(x, a));
  }
  // Half the smallest pairwise distance keeps every pair as its own center.
  double min_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      min_d = std::min(min_d, env.metric().distance(pairs[i], pairs[j]));
    }
  }
  if (!(min_d > 0.0)) {
    if (pairs.size() > 1) {
      throw Error(ErrorKind::DegenerateMetric, "distinct state-action pairs at zero distance");
    }
    min_d = 1.0;
  }
  EpsNet net = build_greedy_net(env.metric(), 0.5 * min_d, pairs, "tabular");
  const AgentParams params = AgentParams::make(c, p, K, env.horizon(), net.size());
  return AgentState(env.metric(), std::move(net), params);
}

void write_checkpoint(std::ostream& out, const AgentState& agent) {
  const AgentParams& p = agent.params();
  const std::size_t N = agent.n_centers();
  out << p.H << ' ' << N << ' ' << detail::fmt_g(p.c) << ' ' << detail::fmt_g(p.p) << ' ' << p.K
      << ' ' << detail::fmt_g(p.gamma) << '\n';
  for (std::size_t h = 1; h <= p.H; ++h) {
    for (std::size_t i = 0; i < N; ++i) out << (i ? " " : "") << detail::fmt_g(agent.q(h, i));
    out << '\n';
  }
  for (std::size_t h = 1; h <= p.H; ++h) {
    for (std::size_t i = 0; i < N; ++i) out << (i ? " " : "") << agent.count(h, i);
    out << '\n';
  }
}

void save_checkpoint(const std::string& path, const AgentState& agent) {
  auto out = detail::open_out(path);
  write_checkpoint(out, agent);
}

AgentState read_checkpoint(std::istream& in, MetricSpace space, EpsNet net) {
  const auto H = detail::read_value<std::size_t>(in, "H");
  const auto N = detail::read_value<std::size_t>(in, "N");
  const auto c = detail::read_value<double>(in, "c");
  const auto p = detail::read_value<double>(in, "p");
  const auto K = detail::read_value<std::size_t>(in, "K");
  const auto gamma = detail::read_value<double>(in, "gamma");
  if (N != net.size()) throw Error(ErrorKind::Io, "checkpoint N does not match the net");
  AgentParams params = AgentParams::make(c, p, K, H, N);
  params.gamma = gamma;
  AgentState agent(std::move(space), std::move(net), params);
  for (double& q : agent.q_) q = detail::read_value<double>(in, "Q value");
  for (auto& n : agent.n_) n = detail::read_value<std::uint64_t>(in, "count");
  return agent;
}

AgentState load_checkpoint(const std::string& path, MetricSpace space, EpsNet net) {
  auto in = detail::open_in(path);
  return read_checkpoint(in, std::move(space), std::move(net));
}

}  // namespace nbql
