#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "nbql/envs.hpp"
#include "nbql/error.hpp"
#include "nbql/oracle.hpp"

using namespace nbql;

namespace {

// 2 states, 1 action, H = 1. Row for state 0 is (p0, 1 - p0); state 1 stays.
FiniteMDP two_state(double p0, double r0 = 0.7) {
  std::vector<double> rewards{r0, 0.1};
  std::vector<double> transitions{p0, 1.0 - p0, 0.0, 1.0};
  return FiniteMDP(2, 1, 1, rewards, transitions, {{0.0}, {1.0}}, MetricSpace(1, {{0.0}}));
}

}  // namespace

TEST_CASE("finite step: deterministic transition and reward") {
  const FiniteMDP env = two_state(0.0);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto [r, next] = env.step(1, 0, 0, rng);
    CHECK(next == 1);
    CHECK(r == 0.7);
  }
}

TEST_CASE("finite step: empirical frequencies match the row") {
  const FiniteMDP env = two_state(0.25);
  Rng rng(2024);
  const int n = 100000;
  int zeros = 0;
  for (int i = 0; i < n; ++i) zeros += env.step(1, 0, 0, rng).second == 0;
  CHECK(std::abs(zeros / static_cast<double>(n) - 0.25) < 0.01);
}

TEST_CASE("finite step: protocol errors") {
  const FiniteMDP env = two_state(0.5);
  Rng rng(1);
  for (std::size_t h : {std::size_t{0}, std::size_t{2}}) {
    try {
      env.step(h, 0, 0, rng);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Protocol);
    }
  }
}

TEST_CASE("finite MDP validation") {
  const MetricSpace m(1, {{0.0}});
  CHECK_THROWS_AS(FiniteMDP(1, 1, 1, {1.5}, {1.0}, {{0.0}}, m), Error);
  CHECK_THROWS_AS(FiniteMDP(1, 1, 1, {0.5}, {0.9}, {{0.0}}, m), Error);
  CHECK_THROWS_AS(FiniteMDP(2, 1, 1, {0.5, 0.5}, {1.1, -0.1, 0.0, 1.0}, {{0.0}, {1.0}}, m),
                  Error);
  CHECK_NOTHROW(FiniteMDP(1, 1, 1, {0.5}, {1.0 - 1e-12}, {{0.0}}, m));
}

TEST_CASE("chain dynamics examples") {
  ChainConfig cfg;
  cfg.noise = 0.0;
  const ContinuousMDP chain = make_lipschitz_chain(cfg);
  const std::vector<double> half{0.5};
  CHECK(chain.mean_next(1, half, 4)[0] == doctest::Approx(0.7).epsilon(1e-15));

  const ContinuousMDP noisy = make_lipschitz_chain();
  const std::vector<double> x{0.95};
  const std::vector<double> plus{0.05};
  CHECK(noisy.next_with_noise(1, x, 4, plus)[0] == 1.0);
  const std::vector<double> peak{0.75};
  CHECK(noisy.reward(1, peak, 0) == 1.0);

  ChainConfig bad;
  bad.noise = -0.01;
  try {
    make_lipschitz_chain(bad);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK(e.field() == "noise");
  }
}

TEST_CASE("chain samples stay in range") {
  const ContinuousMDP chain = make_lipschitz_chain();
  Rng rng(3);
  for (int ep = 0; ep < 500; ++ep) {
    std::vector<double> x{rng.uniform()};
    for (std::size_t h = 1; h <= chain.horizon(); ++h) {
      const StepResult s = chain.step(h, x, rng.below(chain.n_actions()), rng);
      CHECK(s.reward >= 0.0);
      CHECK(s.reward <= 1.0);
      CHECK(s.next_state[0] >= 0.0);
      CHECK(s.next_state[0] <= 1.0);
      x = s.next_state;
    }
  }
  CHECK_THROWS_AS(chain.step(4, std::vector<double>{0.5}, 0, rng), Error);
}

TEST_CASE("discretize: deterministic env gives one-hot rows") {
  ChainConfig cfg;
  cfg.noise = 0.0;
  const ContinuousMDP chain = make_lipschitz_chain(cfg);
  const std::size_t n = 20;
  const FiniteMDP grid = discretize(chain, n);
  CHECK(grid.n_states() == n);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t a = 0; a < grid.n_actions(); ++a) {
      const double target = chain.mean_next(1, grid.coords(x), a)[0];
      const auto expected =
          std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::floor(target * n)));
      const auto row = grid.transition_row(1, x, a);
      CHECK(row[expected] == 1.0);
    }
  }
}

TEST_CASE("discretize: rows sum to one and output is deterministic") {
  const ContinuousMDP chain = make_lipschitz_chain();
  const FiniteMDP a = discretize(chain, 37);
  const FiniteMDP b = discretize(chain, 37);
  CHECK(a.transition_table() == b.transition_table());
  CHECK(a.reward_table() == b.reward_table());
  for (std::size_t h = 1; h <= a.horizon(); ++h) {
    for (std::size_t x = 0; x < a.n_states(); ++x) {
      for (std::size_t u = 0; u < a.n_actions(); ++u) {
        double sum = 0.0;
        for (double p : a.transition_row(h, x, u)) sum += p;
        CHECK(std::abs(sum - 1.0) <= 1e-9);
      }
    }
  }
  CHECK(quadrature_nodes(chain, 37) >= 32);
  CHECK_THROWS_AS(discretize(chain, 1), Error);
}

TEST_CASE("discretize: refinement changes V*_1 by less than 0.05") {
  const ContinuousMDP chain = make_lipschitz_chain();
  const FiniteMDP coarse = discretize(chain, 50);
  const FiniteMDP fine = discretize(chain, 200);
  const double v50 = backward_induction(coarse).vstar(1, coarse.initial_state());
  const double v200 = backward_induction(fine).vstar(1, fine.initial_state());
  CHECK(std::abs(v50 - v200) < 0.05);
}

TEST_CASE("Lipschitz Q* check: constant MDP") {
  const std::size_t S = 4, A = 2, H = 3;
  std::vector<double> rewards(H * S * A, 0.4);
  std::vector<double> transitions(H * S * A * S, 1.0 / S);
  std::vector<std::vector<double>> coords{{0.0}, {0.3}, {0.6}, {0.9}};
  const FiniteMDP env(S, A, H, rewards, transitions, coords, MetricSpace(1, {{0.0}, {0.5}}));
  for (double r : check_lipschitz_qstar(env)) CHECK(r == 0.0);
}

TEST_CASE("Lipschitz Q* check: H = 1 matches the reward ratio") {
  RandomMDPConfig cfg;
  cfg.n_states = 6;
  cfg.n_actions = 3;
  cfg.horizon = 1;
  const FiniteMDP env = make_random_finite(cfg, 17);
  const auto q = check_lipschitz_qstar(env);
  const auto lc = lipschitz_constants(env);
  REQUIRE(q.size() == 1);
  CHECK(q[0] == doctest::Approx(lc.reward[0]).epsilon(1e-12));
}

TEST_CASE("Lipschitz Q* check: discretized chain") {
  const FiniteMDP chain = discretize(make_lipschitz_chain(), 50);
  const auto ratios = check_lipschitz_qstar(chain);
  const std::size_t H = chain.horizon();
  for (std::size_t h = 1; h <= H; ++h) {
    CHECK(ratios[h - 1] <= static_cast<double>(H - h + 1) + 1e-6);
  }
}

TEST_CASE("Lipschitz Q* check: degenerate metric") {
  // Two states share coordinates, action gap set: distinct pairs at distance 0.
  const FiniteMDP env(2, 1, 1, {0.1, 0.2}, {1.0, 0.0, 0.0, 1.0}, {{0.5}, {0.5}},
                      MetricSpace(1, {{0.0}}));
  try {
    check_lipschitz_qstar(env);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateMetric);
  }
}

TEST_CASE("random Lipschitz MDPs satisfy the hypotheses") {
  RandomMDPConfig cfg;
  cfg.n_states = 8;
  cfg.n_actions = 3;
  cfg.horizon = 3;
  cfg.lipschitz = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const FiniteMDP env = make_random_finite(cfg, seed);
    const auto lc = lipschitz_constants(env);
    for (std::size_t h = 0; h < cfg.horizon; ++h) {
      CHECK(lc.reward[h] <= 1.0 + 1e-12);
      CHECK(lc.transition[h] <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("finite MDP file round trip") {
  RandomMDPConfig cfg;
  cfg.n_states = 4;
  cfg.n_actions = 2;
  cfg.horizon = 2;
  const FiniteMDP env = make_random_finite(cfg, 9);
  std::stringstream ss;
  write_finite_mdp(ss, env);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "4 2 2");
  ss.seekg(0);
  const FiniteMDP back = read_finite_mdp(ss);
  CHECK(back.reward_table() == env.reward_table());
  CHECK(back.transition_table() == env.transition_table());
  CHECK(back.initial_state() == 0);

  std::stringstream truncated("2 1 1\n0.5 0.5\n1 0\n");
  CHECK_THROWS_AS(read_finite_mdp(truncated), Error);
}
