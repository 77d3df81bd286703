#include "nbql/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "nbql/error.hpp"
#include "nbql/rng.hpp"
#include "text.hpp"

namespace nbql {

const char* to_string(MetricKind kind) noexcept {
  switch (kind) {
    case MetricKind::ProductLinf: return "product_linf";
    case MetricKind::ProductL1: return "product_l1";
    case MetricKind::CustomTable: return "custom_table";
  }
  return "unknown";
}

MetricKind metric_kind_from_string(const std::string& name) {
  if (name == "product_linf") return MetricKind::ProductLinf;
  if (name == "product_l1") return MetricKind::ProductL1;
  if (name == "custom_table") return MetricKind::CustomTable;
  throw Error(ErrorKind::Config, "unknown metric kind: " + name, "metric");
}

MetricSpace::MetricSpace(std::size_t state_dim,
                         std::vector<std::vector<double>> action_embeddings, MetricKind kind,
                         std::optional<double> action_gap)
    : state_dim_(state_dim),
      action_embeddings_(std::move(action_embeddings)),
      kind_(kind),
      action_gap_(action_gap) {
  if (kind == MetricKind::CustomTable) {
    throw Error(ErrorKind::Config, "use MetricSpace::custom_table for table metrics", "metric");
  }
  if (state_dim_ == 0) throw Error(ErrorKind::Config, "state_dim must be positive", "state_dim");
  if (action_embeddings_.empty()) {
    throw Error(ErrorKind::Config, "action set is empty", "actions");
  }
  if (action_gap_ && !(*action_gap_ > 0.0)) {
    throw Error(ErrorKind::Config, "action_gap must be positive", "action_gap");
  }
  const std::size_t edim = action_embeddings_.front().size();
  for (const auto& e : action_embeddings_) {
    if (e.size() != edim) {
      throw Error(ErrorKind::Config, "action embeddings differ in dimension", "actions");
    }
  }
  // Without a gap, distinct actions must embed to distinct points or D
  // would vanish on distinct pairs.
  if (!action_gap_) {
    for (std::size_t a = 0; a < action_embeddings_.size(); ++a) {
      for (std::size_t b = a + 1; b < action_embeddings_.size(); ++b) {
        if (action_embeddings_[a] == action_embeddings_[b]) {
          throw Error(ErrorKind::Config, "duplicate action embeddings without action_gap",
                      "actions");
        }
      }
    }
  }
}

MetricSpace MetricSpace::custom_table(std::size_t n_states, std::size_t n_actions,
                                      std::vector<double> table) {
  const std::size_t m = n_states * n_actions;
  if (m == 0) throw Error(ErrorKind::Config, "custom table over an empty set", "metric");
  if (table.size() != m * m) {
    throw Error(ErrorKind::Config, "custom table has wrong size", "metric");
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = table[i * m + j];
      if (i == j ? d != 0.0 : !(d > 0.0)) {
        throw Error(ErrorKind::DegenerateMetric, "custom table must have zero diagonal and "
                                                 "positive off-diagonal entries");
      }
      if (d != table[j * m + i]) {
        throw Error(ErrorKind::DegenerateMetric, "custom table is not symmetric");
      }
    }
  }
  MetricSpace s;
  s.state_dim_ = 1;
  s.kind_ = MetricKind::CustomTable;
  s.action_embeddings_.resize(n_actions);
  for (std::size_t a = 0; a < n_actions; ++a) s.action_embeddings_[a] = {static_cast<double>(a)};
  s.table_states_ = n_states;
  s.table_ = std::move(table);
  return s;
}

void MetricSpace::validate(const Point& p) const {
  if (p.state.size() != state_dim_) {
    throw Error(ErrorKind::InvalidPoint, "state dimension " + std::to_string(p.state.size()) +
                                             " does not match space dimension " +
                                             std::to_string(state_dim_));
  }
  if (p.action >= n_actions()) {
    throw Error(ErrorKind::InvalidPoint, "action index " + std::to_string(p.action) +
                                             " out of range");
  }
  for (double v : p.state) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidPoint, "non-finite state coordinate");
  }
  if (kind_ == MetricKind::CustomTable) {
    const double s = p.state[0];
    if (s < 0 || s >= static_cast<double>(table_states_) || s != std::floor(s)) {
      throw Error(ErrorKind::InvalidPoint, "custom-table state must be an integer index");
    }
  }
}

double MetricSpace::distance_unchecked(std::span<const double> xs, std::size_t a,
                                       std::span<const double> ys,
                                       std::size_t b) const noexcept {
  if (kind_ == MetricKind::CustomTable) {
    const std::size_t m = table_states_ * n_actions();
    const auto i = static_cast<std::size_t>(xs[0]) * n_actions() + a;
    const auto j = static_cast<std::size_t>(ys[0]) * n_actions() + b;
    return table_[i * m + j];
  }
  double state_term = 0.0;
  if (kind_ == MetricKind::ProductLinf) {
    for (std::size_t i = 0; i < state_dim_; ++i) state_term = std::max(state_term, std::abs(xs[i] - ys[i]));
  } else {
    for (std::size_t i = 0; i < state_dim_; ++i) state_term += std::abs(xs[i] - ys[i]);
  }
  if (a == b) return state_term;
  if (action_gap_) return state_term + *action_gap_;
  double action_term = 0.0;
  const auto& ea = action_embeddings_[a];
  const auto& eb = action_embeddings_[b];
  for (std::size_t i = 0; i < ea.size(); ++i) action_term = std::max(action_term, std::abs(ea[i] - eb[i]));
  return state_term + action_term;
}

double MetricSpace::distance(const Point& p, const Point& q) const {
  validate(p);
  validate(q);
  return distance_unchecked(p.state, p.action, q.state, q.action);
}

double distance(const MetricSpace& space, const Point& p, const Point& q) {
  return space.distance(p, q);
}

std::string PoolSpec::describe() const {
  std::ostringstream os;
  if (kind == Kind::Grid) {
    os << "grid:" << size;
  } else {
    os << "samples:" << size << ":seed=" << seed;
  }
  return os.str();
}

std::vector<Point> make_candidate_pool(const MetricSpace& space, const PoolSpec& spec) {
  const std::size_t dim = space.state_dim();
  if (spec.size == 0) throw Error(ErrorKind::EmptyPool, "candidate pool size is zero", "pool");
  if (spec.lo.size() != dim || spec.hi.size() != dim) {
    throw Error(ErrorKind::Config, "pool box dimension does not match the space", "pool");
  }
  std::vector<std::vector<double>> states;
  if (spec.kind == PoolSpec::Kind::Grid) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < dim; ++i) total *= spec.size;
    states.reserve(total);
    std::vector<std::size_t> idx(dim, 0);
    for (std::size_t n = 0; n < total; ++n) {
      std::vector<double> s(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        const double w = (spec.hi[i] - spec.lo[i]) / static_cast<double>(spec.size);
        s[i] = spec.lo[i] + (static_cast<double>(idx[i]) + 0.5) * w;
      }
      states.push_back(std::move(s));
      for (std::size_t i = dim; i-- > 0;) {
        if (++idx[i] < spec.size) break;
        idx[i] = 0;
      }
    }
  } else {
    Rng rng(spec.seed);
    states.reserve(spec.size);
    for (std::size_t n = 0; n < spec.size; ++n) {
      std::vector<double> s(dim);
      for (std::size_t i = 0; i < dim; ++i) s[i] = rng.uniform(spec.lo[i], spec.hi[i]);
      states.push_back(std::move(s));
    }
  }
  std::vector<Point> pool;
  pool.reserve(states.size() * space.n_actions());
  for (auto& s : states) {
    for (std::size_t a = 0; a < space.n_actions(); ++a) pool.push_back(Point{s, a});
  }
  return pool;
}

EpsNet::EpsNet(double epsilon, std::vector<Point> centers, std::string built_from)
    : epsilon_(epsilon), centers_(std::move(centers)), built_from_(std::move(built_from)) {
  if (!(epsilon_ > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive", "epsilon");
  if (centers_.empty()) throw Error(ErrorKind::EmptyPool, "net has no centers");
}

NearestCenter EpsNet::nearest(const MetricSpace& space, std::span<const double> state,
                              std::size_t action) const {
  NearestCenter best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    const double d = space.distance_unchecked(state, action, centers_[i].state, centers_[i].action);
    if (d < best.dist) best = {i, d};
  }
  return best;
}

EpsNet build_greedy_net(const MetricSpace& space, double epsilon,
                        std::span<const Point> candidates, std::string built_from) {
  if (candidates.empty()) throw Error(ErrorKind::EmptyPool, "candidate pool is empty", "pool");
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive", "epsilon");
  std::vector<Point> centers;
  for (const Point& c : candidates) {
    space.validate(c);
    bool far = true;
    for (const Point& k : centers) {
      if (space.distance_unchecked(c.state, c.action, k.state, k.action) <= epsilon) {
        far = false;
        break;
      }
    }
    if (far) centers.push_back(c);
  }
  return EpsNet(epsilon, std::move(centers), std::move(built_from));
}

NearestCenter nearest_center(const EpsNet& net, const MetricSpace& space, const Point& p) {
  space.validate(p);
  return net.nearest(space, p.state, p.action);
}

double covering_dimension_fit(std::span<const std::pair<double, std::size_t>> nets) {
  if (nets.size() < 2) {
    throw Error(ErrorKind::InsufficientData, "need at least two (epsilon, size) pairs");
  }
  double mx = 0, my = 0;
  for (const auto& [eps, size] : nets) {
    if (!(eps > 0.0) || size < 1) {
      throw Error(ErrorKind::InvalidArgument, "epsilon must be positive and size at least 1");
    }
    mx += std::log(1.0 / eps);
    my += std::log(static_cast<double>(size));
  }
  const double n = static_cast<double>(nets.size());
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (const auto& [eps, size] : nets) {
    const double dx = std::log(1.0 / eps) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(static_cast<double>(size)) - my);
  }
  if (sxx == 0.0) throw Error(ErrorKind::InsufficientData, "need at least two distinct epsilons");
  return sxy / sxx;
}

void write_net(std::ostream& out, const EpsNet& net, const MetricSpace& space) {
  out << detail::fmt_g(net.epsilon()) << ' ' << space.state_dim() << ' ' << space.n_actions()
      << '\n';
  for (const Point& c : net.centers()) {
    for (double v : c.state) out << detail::fmt_g(v) << ' ';
    out << c.action << '\n';
  }
}

void save_net(const std::string& path, const EpsNet& net, const MetricSpace& space) {
  auto out = detail::open_out(path);
  write_net(out, net, space);
}

EpsNet read_net(std::istream& in, const MetricSpace& space) {
  const auto eps = detail::read_value<double>(in, "epsilon");
  const auto dim = detail::read_value<std::size_t>(in, "state_dim");
  const auto n_actions = detail::read_value<std::size_t>(in, "n_actions");
  if (dim != space.state_dim() || n_actions != space.n_actions()) {
    throw Error(ErrorKind::Io, "net file does not match the metric space");
  }
  std::vector<Point> centers;
  double first;
  while (in >> first) {
    Point p;
    p.state.resize(dim);
    p.state[0] = first;
    for (std::size_t i = 1; i < dim; ++i) p.state[i] = detail::read_value<double>(in, "coordinate");
    p.action = detail::read_value<std::size_t>(in, "action");
    space.validate(p);
    centers.push_back(std::move(p));
  }
  return EpsNet(eps, std::move(centers), "file");
}

EpsNet load_net(const std::string& path, const MetricSpace& space) {
  auto in = detail::open_in(path);
  return read_net(in, space);
}

}  // namespace nbql
