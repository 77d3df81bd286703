#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nbql {

// A state-action pair. `state` holds environment coordinates; `action` indexes
// the owning space's finite action set.
struct Point {
  std::vector<double> state;
  std::size_t action = 0;

  friend bool operator==(const Point&, const Point&) = default;
};

enum class MetricKind {
  ProductLinf,  // max over state coordinates, plus the action term
  ProductL1,    // sum over state coordinates, plus the action term
  CustomTable,  // explicit distance table over enumerated (state, action) pairs
};

const char* to_string(MetricKind kind) noexcept;
MetricKind metric_kind_from_string(const std::string& name);

// Distance over S x A.
//
// For the product kinds the distance is the state term plus an action term.
// The action term is `action_gap` when the action indices differ and a gap is
// set; otherwise it is the L-infinity distance between action embeddings.
//
// CustomTable spaces have state_dim 1 and encode the state index in
// state[0]; the distance is looked up in an (S*A) x (S*A) table.
class MetricSpace {
 public:
  MetricSpace(std::size_t state_dim, std::vector<std::vector<double>> action_embeddings,
              MetricKind kind = MetricKind::ProductLinf,
              std::optional<double> action_gap = std::nullopt);

  // Table indexed by (s * n_actions + a). Must be symmetric with a zero
  // diagonal and strictly positive off-diagonal entries.
  static MetricSpace custom_table(std::size_t n_states, std::size_t n_actions,
                                  std::vector<double> table);

  std::size_t state_dim() const noexcept { return state_dim_; }
  std::size_t n_actions() const noexcept { return action_embeddings_.size(); }
  MetricKind kind() const noexcept { return kind_; }
  const std::optional<double>& action_gap() const noexcept { return action_gap_; }
  const std::vector<std::vector<double>>& action_embeddings() const noexcept {
    return action_embeddings_;
  }

  // Throws Error(InvalidPoint) on a malformed point.
  void validate(const Point& p) const;

  double distance(const Point& p, const Point& q) const;

  // Hot path used by quantization; no validation.
  double distance_unchecked(std::span<const double> xs, std::size_t a,
                            std::span<const double> ys, std::size_t b) const noexcept;

 private:
  MetricSpace() = default;

  std::size_t state_dim_ = 0;
  std::vector<std::vector<double>> action_embeddings_;
  MetricKind kind_ = MetricKind::ProductLinf;
  std::optional<double> action_gap_;
  std::size_t table_states_ = 0;
  std::vector<double> table_;
};

// Free-function form of MetricSpace::distance.
double distance(const MetricSpace& space, const Point& p, const Point& q);

// Describes the finite candidate pool a net is built over.
struct PoolSpec {
  enum class Kind { Grid, Samples };
  Kind kind = Kind::Grid;
  // Grid: points per state dimension, placed at cell centers of the box.
  // Samples: total number of uniform state samples (each paired with every action).
  std::size_t size = 0;
  std::uint64_t seed = 0;
  std::vector<double> lo;
  std::vector<double> hi;

  std::string describe() const;
};

// Enumerates pool points: every pool state paired with every action, states
// outer, actions inner.
std::vector<Point> make_candidate_pool(const MetricSpace& space, const PoolSpec& spec);

struct NearestCenter {
  std::size_t index = 0;
  double dist = 0.0;
};

class EpsNet {
 public:
  EpsNet(double epsilon, std::vector<Point> centers, std::string built_from = {});

  double epsilon() const noexcept { return epsilon_; }
  std::size_t size() const noexcept { return centers_.size(); }
  const std::vector<Point>& centers() const noexcept { return centers_; }
  const Point& center(std::size_t i) const { return centers_.at(i); }
  const std::string& built_from() const noexcept { return built_from_; }

  // Linear scan; ties go to the lowest index.
  NearestCenter nearest(const MetricSpace& space, std::span<const double> state,
                        std::size_t action) const;

 private:
  double epsilon_;
  std::vector<Point> centers_;
  std::string built_from_;
};

// Greedy construction: scan candidates in order, keep a candidate iff it is
// strictly farther than epsilon from every center kept so far.
EpsNet build_greedy_net(const MetricSpace& space, double epsilon,
                        std::span<const Point> candidates, std::string built_from = {});

NearestCenter nearest_center(const EpsNet& net, const MetricSpace& space, const Point& p);

// Least-squares slope of log(size) against log(1/epsilon).
double covering_dimension_fit(std::span<const std::pair<double, std::size_t>> nets);

// Text format: "epsilon state_dim n_actions", then one line per center with
// the state coordinates followed by the action index.
void write_net(std::ostream& out, const EpsNet& net, const MetricSpace& space);
void save_net(const std::string& path, const EpsNet& net, const MetricSpace& space);
EpsNet read_net(std::istream& in, const MetricSpace& space);
EpsNet load_net(const std::string& path, const MetricSpace& space);

}  // namespace nbql
