#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "nbql/error.hpp"
#include "nbql/harness.hpp"

using namespace nbql;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("nbql_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<double> power_curve(double exponent, std::size_t n) {
  std::vector<double> out;
  for (std::size_t k = 1; k <= n; ++k) out.push_back(std::pow(static_cast<double>(k), exponent));
  return out;
}

ExperimentConfig small_chain(std::size_t K = 200) {
  ExperimentConfig c;
  c.episodes = K;
  c.epsilon = 0.2;
  c.oracle_grid = 50;
  return c;
}

}  // namespace

TEST_CASE("slope fit on exact power laws") {
  CHECK(fit_regret_slope(std::span<const double>(power_curve(2.0 / 3.0, 1000)), 0.2) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-6));
  CHECK(fit_regret_slope(std::span<const double>(power_curve(1.0, 1000)), 0.2) ==
        doctest::Approx(1.0).epsilon(1e-6));
  const std::vector<double> flat(500, 3.0);
  CHECK(std::abs(fit_regret_slope(std::span<const double>(flat), 0.2)) <= 1e-6);
}

TEST_CASE("slope fit errors") {
  const auto few = power_curve(1.0, 11);
  try {
    fit_regret_slope(std::span<const double>(few), 0.2);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientData);
  }
  auto zeros = power_curve(1.0, 100);
  zeros[60] = 0.0;
  try {
    fit_regret_slope(std::span<const double>(zeros), 0.2);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateCurve);
  }
}

TEST_CASE("single-episode run on a one-state file env") {
  const fs::path dir = scratch("one_state");
  const fs::path env_file = dir / "env.txt";
  {
    std::ofstream out(env_file);
    out << "1 1 1\n0.6\n1\n";
  }
  ExperimentConfig c;
  c.env = env_file.string();
  c.horizon = 1;
  c.episodes = 1;
  c.epsilon = 0.5;
  const RunArtifact art = run_experiment(c);
  REQUIRE(art.rows.size() == 1);
  CHECK(art.rows[0].realized_return == doctest::Approx(0.6));
  CHECK(art.rows[0].cum_regret == doctest::Approx(0.0));
  CHECK(art.summary.net_size == 1);
  CHECK_FALSE(art.summary.slope_defined);

  c.horizon = 2;  // mismatched with the file
  CHECK_THROWS_AS(run_experiment(c), Error);
}

TEST_CASE("runs are deterministic given a seed") {
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  ExperimentConfig c = small_chain(300);
  c.seed = 42;
  c.out_dir = a.string();
  run_experiment(c);
  c.out_dir = b.string();
  run_experiment(c);
  for (const char* f : {"episodes.csv", "checkpoint.txt", "net.txt", "summary.json"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK_FALSE(slurp(a / f).empty());
  }
  c.seed = 43;
  c.out_dir = b.string();
  run_experiment(c);
  CHECK(slurp(a / "episodes.csv") != slurp(b / "episodes.csv"));
  CHECK(slurp(a / "episodes.csv").rfind("k,return,vstar,vpik,cum_regret,centers_visited\n", 0) == 0);
}

TEST_CASE("episode rows are well formed") {
  const RunArtifact art = run_experiment(small_chain(300));
  REQUIRE(art.rows.size() == 300);
  const double H = 3.0;
  std::size_t prev_visited = 0;
  double prev_regret = 0.0;
  for (const EpisodeRow& r : art.rows) {
    CHECK(r.realized_return >= 0.0);
    CHECK(r.realized_return <= H);
    CHECK(r.vpik <= r.vstar + 1e-9);
    CHECK(r.cum_regret >= prev_regret - 1e-9);
    CHECK(r.centers_visited >= prev_visited);
    CHECK(r.centers_visited <= art.summary.net_size * 3);
    prev_visited = r.centers_visited;
    prev_regret = r.cum_regret;
  }
  CHECK(art.rows.back().k == 300);
  CHECK(art.summary.final_regret == art.rows.back().cum_regret);
  for (std::size_t h = 1; h <= 3; ++h) CHECK(art.agent->updates_at(h) == 300);
}

TEST_CASE("eval stride interpolates between evaluations") {
  ExperimentConfig c = small_chain(100);
  c.eval_stride = 10;
  const RunArtifact art = run_experiment(c);
  REQUIRE(art.rows.size() == 100);
  CHECK(art.rows.back().k == 100);
  c.eval_stride = 0;
  CHECK_THROWS_AS(run_experiment(c), Error);
}

TEST_CASE("optimism audit") {
  const ExperimentConfig c = small_chain();
  const Environment env = make_environment(c);
  const ValueTables values = backward_induction(env.surrogate);
  const AgentState fresh = make_agent(c, env);
  const std::vector<AgentState> snaps{fresh};
  CHECK(optimism_audit(snaps, env.surrogate, values, c.epsilon) == 0.0);

  // Pessimistic Q everywhere, but a radius of H makes the threshold vacuous.
  AgentState low = fresh;
  for (std::size_t h = 1; h <= low.horizon(); ++h) {
    for (std::size_t i = 0; i < low.n_centers(); ++i) low.set_q(h, i, 0.0);
  }
  const std::vector<AgentState> lows{low};
  CHECK(optimism_audit(lows, env.surrogate, values, 3.0) == 0.0);
  CHECK(optimism_audit(lows, env.surrogate, values, 1e-3) > 0.0);
}

TEST_CASE("sweeps") {
  ExperimentConfig base = small_chain(60);
  const std::vector<double> seeds{1, 2, 3};
  const auto rows = sweep(base, "seed", seeds, 2);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(rows[i].seed == i + 1);

  const std::vector<double> eps{0.2, 0.1, 0.05};
  const auto by_eps = sweep(base, "epsilon", eps);
  REQUIRE(by_eps.size() == 3);
  CHECK(by_eps[0].summary.net_size <= by_eps[1].summary.net_size);
  CHECK(by_eps[1].summary.net_size <= by_eps[2].summary.net_size);

  const fs::path dir = scratch("sweep");
  base.out_dir = dir.string();
  const std::vector<double> cs{0.1, 1.0};
  sweep(base, "c", cs);
  CHECK(fs::exists(dir / "sweep.csv"));
  CHECK(fs::exists(dir / "c_0" / "episodes.csv"));
  CHECK(fs::exists(dir / "c_1" / "summary.json"));

  const std::vector<double> none;
  CHECK_THROWS_AS(sweep(base, "seed", none), Error);
  CHECK_THROWS_AS(sweep(base, "gamma", cs), Error);
}

TEST_CASE("config json round trip and overrides") {
  ExperimentConfig c;
  c.epsilon = 0.07;
  c.env = "random";
  c.episodes = 123;
  c.out_dir = "somewhere";
  const ExperimentConfig back = config_from_json(config_to_json(c));
  CHECK(back.epsilon == c.epsilon);
  CHECK(back.env == "random");
  CHECK(back.episodes == 123);
  CHECK(back.out_dir == "somewhere");

  const ExperimentConfig partial = config_from_json(R"({"c": 0.9, "out": "x"})", c);
  CHECK(partial.c == 0.9);
  CHECK(partial.out_dir == "x");
  CHECK(partial.epsilon == 0.07);

  try {
    config_from_json(R"({"epsilon": -1})").validate();
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK(e.field() == "epsilon");
  }
  CHECK_THROWS_AS(config_from_json("{not json"), Error);
}

TEST_CASE("tabular agent rejects continuous envs") {
  ExperimentConfig c = small_chain(10);
  c.agent = "tabular";
  CHECK_THROWS_AS(run_experiment(c), Error);
}

TEST_CASE("cumulative regret CSV reader") {
  const fs::path dir = scratch("csv");
  ExperimentConfig c = small_chain(50);
  c.out_dir = dir.string();
  const RunArtifact art = run_experiment(c);
  const auto cum = read_cumulative_regret((dir / "episodes.csv").string());
  REQUIRE(cum.size() == 50);
  CHECK(cum.back() == doctest::Approx(art.rows.back().cum_regret).epsilon(1e-10));
  CHECK_THROWS_AS(read_cumulative_regret((dir / "missing.csv").string()), Error);
}
