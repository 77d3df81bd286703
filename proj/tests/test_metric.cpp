#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "nbql/error.hpp"
#include "nbql/metric.hpp"
#include "nbql/rng.hpp"

using namespace nbql;

namespace {

MetricSpace line_space() { return MetricSpace(1, {{0.0}}); }

std::vector<Point> line_points(std::initializer_list<double> xs) {
  std::vector<Point> out;
  for (double x : xs) out.push_back(Point{{x}, 0});
  return out;
}

// Brute-force oracle: full scan, lowest index on ties.
NearestCenter brute_nearest(const MetricSpace& space, const std::vector<Point>& centers,
                            const Point& q) {
  NearestCenter best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double d = space.distance(q, centers[i]);
    if (d < best.dist) best = {i, d};
  }
  return best;
}

}  // namespace

TEST_CASE("distance examples") {
  const MetricSpace space(1, {{0.1}, {-0.1}});
  const Point p{{0.2}, 0};
  CHECK(space.distance(p, p) == 0.0);
  CHECK(space.distance(Point{{0.2}, 0}, Point{{0.5}, 0}) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(space.distance(Point{{0.3}, 0}, Point{{0.3}, 1}) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("distance with action gap and L1 kind") {
  const MetricSpace gapped(2, {{0.0}, {1.0}}, MetricKind::ProductLinf, 5.0);
  CHECK(gapped.distance(Point{{0.0, 0.0}, 0}, Point{{0.3, 0.1}, 1}) == doctest::Approx(5.3));
  const MetricSpace l1(2, {{0.0}, {1.0}}, MetricKind::ProductL1);
  CHECK(l1.distance(Point{{0.0, 0.0}, 0}, Point{{0.3, 0.1}, 1}) == doctest::Approx(1.4));
}

TEST_CASE("distance rejects malformed points") {
  const MetricSpace space = line_space();
  CHECK_THROWS_AS(space.distance(Point{{0.0, 1.0}, 0}, Point{{0.0}, 0}), Error);
  try {
    space.distance(Point{{0.0}, 3}, Point{{0.0}, 0});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidPoint);
  }
}

TEST_CASE("metric construction validates embeddings") {
  CHECK_THROWS_AS(MetricSpace(1, {}), Error);
  CHECK_THROWS_AS(MetricSpace(1, {{0.0}, {0.0}}), Error);  // D would vanish
  CHECK_NOTHROW(MetricSpace(1, {{0.0}, {0.0}}, MetricKind::ProductLinf, 1.0));
}

TEST_CASE("custom table metric") {
  // 2 states x 1 action.
  const MetricSpace t = MetricSpace::custom_table(2, 1, {0.0, 0.7, 0.7, 0.0});
  CHECK(t.distance(Point{{0.0}, 0}, Point{{1.0}, 0}) == 0.7);
  CHECK_THROWS_AS(t.validate(Point{{0.5}, 0}), Error);
  CHECK_THROWS_AS(MetricSpace::custom_table(2, 1, {0.0, 0.7, 0.6, 0.0}), Error);
  CHECK_THROWS_AS(MetricSpace::custom_table(2, 1, {0.0, 0.0, 0.0, 0.0}), Error);
}

TEST_CASE("distance is symmetric with zero self-distance on random pairs") {
  const MetricSpace spaces[] = {
      MetricSpace(3, {{0.0}, {0.4}, {-0.3}}),
      MetricSpace(3, {{0.0}, {0.4}, {-0.3}}, MetricKind::ProductL1),
      MetricSpace(3, {{0.0}, {0.0}, {0.0}}, MetricKind::ProductLinf, 2.0),
  };
  Rng rng(11);
  for (const MetricSpace& space : spaces) {
    for (int n = 0; n < 500; ++n) {
      Point p{{rng.uniform(), rng.uniform(), rng.uniform()}, rng.below(3)};
      Point q{{rng.uniform(), rng.uniform(), rng.uniform()}, rng.below(3)};
      CHECK(space.distance(p, p) == 0.0);
      CHECK(space.distance(p, q) == space.distance(q, p));
      if (!(p == q)) CHECK(space.distance(p, q) > 0.0);
    }
  }
}

TEST_CASE("greedy net examples") {
  const MetricSpace space = line_space();
  const auto pool = line_points({0.0, 0.5, 1.0});
  CHECK(build_greedy_net(space, 0.4, pool).centers() == pool);
  CHECK(build_greedy_net(space, 0.6, pool).centers() == line_points({0.0, 1.0}));
  const auto single = line_points({0.3});
  CHECK(build_greedy_net(space, 10.0, single).centers() == single);
}

TEST_CASE("greedy net uses strict inequality") {
  const MetricSpace space = line_space();
  // 0.5 is exactly epsilon away from 0: not added.
  CHECK(build_greedy_net(space, 0.5, line_points({0.0, 0.5})).size() == 1);
}

TEST_CASE("greedy net errors") {
  const MetricSpace space = line_space();
  std::vector<Point> empty;
  try {
    build_greedy_net(space, 0.1, empty);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyPool);
  }
  CHECK_THROWS_AS(build_greedy_net(space, 0.0, line_points({0.0})), Error);
}

TEST_CASE("nearest center examples") {
  const MetricSpace space = line_space();
  const EpsNet net = build_greedy_net(space, 0.4, line_points({0.0, 0.5, 1.0}));
  NearestCenter nc = nearest_center(net, space, Point{{0.26}, 0});
  CHECK(nc.index == 1);
  CHECK(nc.dist == doctest::Approx(0.24));
  nc = nearest_center(net, space, Point{{0.25}, 0});
  CHECK(nc.index == 0);  // exact tie, lowest index
  CHECK(nc.dist == 0.25);
  const EpsNet one = build_greedy_net(space, 0.1, line_points({0.7}));
  nc = nearest_center(one, space, Point{{0.7}, 0});
  CHECK(nc.index == 0);
  CHECK(nc.dist == 0.0);
}

TEST_CASE("net invariants on random 2-D pools") {
  const MetricSpace space(2, {{0.0}, {1.0}}, MetricKind::ProductLinf, 3.0);
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    PoolSpec spec{PoolSpec::Kind::Samples, 150, rng.next_u64(), {0.0, 0.0}, {1.0, 2.0}};
    const auto pool = make_candidate_pool(space, spec);
    const double eps = rng.uniform(0.05, 0.5);
    const EpsNet net = build_greedy_net(space, eps, pool);
    for (const Point& c : pool) CHECK(nearest_center(net, space, c).dist <= eps);
    for (std::size_t i = 0; i < net.size(); ++i) {
      CHECK(nearest_center(net, space, net.center(i)).index == i);  // phi idempotent
      for (std::size_t j = i + 1; j < net.size(); ++j) {
        CHECK(space.distance(net.center(i), net.center(j)) > eps);
      }
    }
    for (int q = 0; q < 200; ++q) {
      const Point p{{rng.uniform(-0.5, 1.5), rng.uniform(-0.5, 2.5)}, rng.below(2)};
      const NearestCenter got = nearest_center(net, space, p);
      const NearestCenter want = brute_nearest(space, net.centers(), p);
      CHECK(got.index == want.index);
      CHECK(got.dist == want.dist);
    }
  }
}

TEST_CASE("1-D grid net obeys the packing bound") {
  const MetricSpace space = line_space();
  for (double eps : {0.3, 0.1, 0.05, 0.013}) {
    const double L = 2.0;
    PoolSpec spec{PoolSpec::Kind::Grid, 4000, 0, {0.0}, {L}};
    const EpsNet net = build_greedy_net(space, eps, make_candidate_pool(space, spec));
    CHECK(net.size() <= static_cast<std::size_t>(std::ceil(L / eps)) + 1);
  }
}

TEST_CASE("candidate pools") {
  const MetricSpace space(2, {{0.0}, {1.0}, {2.0}});
  PoolSpec grid{PoolSpec::Kind::Grid, 4, 0, {0.0, 0.0}, {1.0, 1.0}};
  const auto g = make_candidate_pool(space, grid);
  CHECK(g.size() == 4 * 4 * 3);
  CHECK(g[0] == Point{{0.125, 0.125}, 0});
  CHECK(g[2] == Point{{0.125, 0.125}, 2});
  CHECK(g[3] == Point{{0.125, 0.375}, 0});
  PoolSpec samples{PoolSpec::Kind::Samples, 10, 99, {0.0, 0.0}, {1.0, 1.0}};
  CHECK(make_candidate_pool(space, samples) == make_candidate_pool(space, samples));
  samples.size = 0;
  CHECK_THROWS_AS(make_candidate_pool(space, samples), Error);
}

TEST_CASE("covering dimension fit") {
  const std::vector<std::pair<double, std::size_t>> d1{{0.1, 10}, {0.01, 100}};
  CHECK(covering_dimension_fit(d1) == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<std::pair<double, std::size_t>> d2{{0.1, 100}, {0.01, 10000}};
  CHECK(covering_dimension_fit(d2) == doctest::Approx(2.0).epsilon(1e-12));
  const std::vector<std::pair<double, std::size_t>> one{{0.1, 10}};
  try {
    covering_dimension_fit(one);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientData);
  }
  const std::vector<std::pair<double, std::size_t>> same{{0.1, 10}, {0.1, 12}};
  CHECK_THROWS_AS(covering_dimension_fit(same), Error);
}

TEST_CASE("covering dimension of greedy nets on the unit square") {
  const MetricSpace space(2, {{0.0}});
  PoolSpec spec{PoolSpec::Kind::Grid, 200, 0, {0.0, 0.0}, {1.0, 1.0}};
  const auto pool = make_candidate_pool(space, spec);
  std::vector<std::pair<double, std::size_t>> sizes;
  for (double eps : {0.2, 0.1, 0.05}) sizes.emplace_back(eps, build_greedy_net(space, eps, pool).size());
  CHECK(covering_dimension_fit(sizes) == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("net file round trip") {
  const MetricSpace space(2, {{0.0}, {1.0}});
  PoolSpec spec{PoolSpec::Kind::Samples, 40, 3, {0.0, 0.0}, {1.0, 1.0}};
  const EpsNet net = build_greedy_net(space, 0.1, make_candidate_pool(space, spec));
  std::stringstream ss;
  write_net(ss, net, space);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "0.10000000000000001 2 2");
  ss.seekg(0);
  const EpsNet back = read_net(ss, space);
  CHECK(back.epsilon() == net.epsilon());
  CHECK(back.centers() == net.centers());

  const MetricSpace other(1, {{0.0}, {1.0}});
  std::stringstream again;
  write_net(again, net, space);
  CHECK_THROWS_AS(read_net(again, other), Error);
}
