#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "nbql/agent.hpp"
#include "nbql/envs.hpp"
#include "nbql/error.hpp"
#include "nbql/harness.hpp"
#include "nbql/metric.hpp"
#include "nbql/oracle.hpp"

namespace py = pybind11;
using namespace nbql;
using namespace pybind11::literals;

namespace {

py::dict run_to_dict(const RunArtifact& art) {
  std::vector<double> ret, vstar, vpik, cum;
  std::vector<std::size_t> visited;
  for (const EpisodeRow& r : art.rows) {
    ret.push_back(r.realized_return);
    vstar.push_back(r.vstar);
    vpik.push_back(r.vpik);
    cum.push_back(r.cum_regret);
    visited.push_back(r.centers_visited);
  }
  const RunSummary& s = art.summary;
  py::dict summary("episodes"_a = s.episodes, "net_size"_a = s.net_size,
                   "oracle_grid"_a = s.oracle_grid, "final_regret"_a = s.final_regret,
                   "realized_regret"_a = s.realized_regret,
                   "slope"_a = s.slope_defined ? py::cast(s.slope) : py::none(),
                   "violation_rate"_a = s.violation_rate, "audited"_a = s.audited,
                   "violations"_a = s.violations);
  return py::dict("summary"_a = summary, "returns"_a = ret, "vstar"_a = vstar, "vpik"_a = vpik,
                  "cum_regret"_a = cum, "centers_visited"_a = visited);
}

ExperimentConfig parse_config(const std::string& json_text) {
  ExperimentConfig c = config_from_json(json_text);
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_nbql, m) {
  m.doc() = "Net-based Q-learning core";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() -> py::object { return py::exception<Error>(m, "NbqlError"); });
  // Raised instances carry the error kind and offending field as attributes.
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object exc = type(py::str(e.what()));
      exc.attr("kind") = to_string(e.kind());
      exc.attr("field") = e.field();
      PyErr_SetObject(type.ptr(), exc.ptr());
    }
  });

  py::class_<Point>(m, "Point")
      .def(py::init<std::vector<double>, std::size_t>(), "state"_a, "action"_a)
      .def_readwrite("state", &Point::state)
      .def_readwrite("action", &Point::action)
      .def("__eq__", [](const Point& a, const Point& b) { return a == b; })
      .def("__repr__", [](const Point& p) {
        return "Point(" + py::repr(py::cast(p.state)).cast<std::string>() + ", " +
               std::to_string(p.action) + ")";
      });

  py::class_<MetricSpace>(m, "MetricSpace")
      .def(py::init([](std::size_t dim, std::vector<std::vector<double>> emb,
                       const std::string& kind, std::optional<double> gap) {
             return MetricSpace(dim, std::move(emb), metric_kind_from_string(kind), gap);
           }),
           "state_dim"_a, "action_embeddings"_a, "kind"_a = "product_linf",
           "action_gap"_a = py::none())
      .def_property_readonly("state_dim", &MetricSpace::state_dim)
      .def_property_readonly("n_actions", &MetricSpace::n_actions)
      .def("distance", &MetricSpace::distance, "p"_a, "q"_a);

  py::class_<NearestCenter>(m, "NearestCenter")
      .def_readonly("index", &NearestCenter::index)
      .def_readonly("dist", &NearestCenter::dist);

  py::class_<EpsNet>(m, "EpsNet")
      .def_property_readonly("epsilon", &EpsNet::epsilon)
      .def_property_readonly("centers", &EpsNet::centers)
      .def_property_readonly("built_from", &EpsNet::built_from)
      .def("__len__", &EpsNet::size);

  m.def(
      "build_greedy_net",
      [](const MetricSpace& space, double eps, const std::vector<Point>& pool) {
        return build_greedy_net(space, eps, pool);
      },
      "space"_a, "epsilon"_a, "pool"_a);
  m.def("nearest_center", &nearest_center, "net"_a, "space"_a, "point"_a);
  m.def(
      "covering_dimension_fit",
      [](const std::vector<std::pair<double, std::size_t>>& nets) {
        return covering_dimension_fit(nets);
      },
      "nets"_a);

  m.def(
      "alpha_weights",
      [](std::int64_t t, std::size_t H) {
        AlphaWeights w = alpha_weights(t, H);
        return py::make_tuple(w.alpha0, w.weights);
      },
      "t"_a, "H"_a);
  m.def(
      "bonus",
      [](std::int64_t t, std::size_t H, double c, double gamma) {
        AgentParams p = AgentParams::make(c, 0.5, 1, H, 1);
        p.gamma = gamma;
        return bonus(t, p);
      },
      "t"_a, "H"_a, "c"_a, "gamma"_a);
  m.def(
      "q_closed_form",
      [](const std::vector<std::tuple<double, double, double>>& history, std::size_t H) {
        std::vector<HistoryEntry> h;
        for (const auto& [r, v, b] : history) h.push_back({r, v, b});
        return q_closed_form(h, H);
      },
      "history"_a, "H"_a);

  py::class_<FiniteMDP>(m, "FiniteMDP")
      .def_property_readonly("n_states", &FiniteMDP::n_states)
      .def_property_readonly("n_actions", &FiniteMDP::n_actions)
      .def_property_readonly("horizon", &FiniteMDP::horizon)
      .def_property_readonly("initial_state", &FiniteMDP::initial_state);

  m.def(
      "discretized_chain",
      [](std::size_t resolution, std::size_t horizon, double noise) {
        ChainConfig cfg;
        cfg.horizon = horizon;
        cfg.noise = noise;
        return discretize(make_lipschitz_chain(cfg), resolution);
      },
      "resolution"_a, "horizon"_a = 3, "noise"_a = 0.05);
  m.def(
      "random_finite_mdp",
      [](std::size_t n_states, std::size_t n_actions, std::size_t horizon, bool lipschitz,
         std::uint64_t seed) {
        RandomMDPConfig cfg;
        cfg.n_states = n_states;
        cfg.n_actions = n_actions;
        cfg.horizon = horizon;
        cfg.lipschitz = lipschitz;
        return make_random_finite(cfg, seed);
      },
      "n_states"_a, "n_actions"_a, "horizon"_a, "lipschitz"_a = false, "seed"_a = 0);
  m.def("load_finite_mdp", &load_finite_mdp, "path"_a);

  py::class_<ValueTables>(m, "ValueTables")
      .def("qstar", py::overload_cast<std::size_t, std::size_t, std::size_t>(
                        &ValueTables::qstar, py::const_))
      .def("vstar", py::overload_cast<std::size_t, std::size_t>(&ValueTables::vstar, py::const_))
      .def("pistar",
           py::overload_cast<std::size_t, std::size_t>(&ValueTables::pistar, py::const_));
  m.def("backward_induction", &backward_induction, "env"_a);
  m.def("bellman_residual", &bellman_residual, "env"_a, "values"_a);

  // Configs travel as JSON text; the Python wrapper accepts keyword arguments.
  m.def(
      "_run_experiment",
      [](const std::string& config) {
        const ExperimentConfig c = parse_config(config);
        RunArtifact art;
        {
          py::gil_scoped_release release;
          art = run_experiment(c);
        }
        return run_to_dict(art);
      },
      "config"_a);
  m.def(
      "_sweep",
      [](const std::string& config, const std::string& axis, const std::vector<double>& values,
         std::size_t jobs) {
        const ExperimentConfig c = parse_config(config);
        std::vector<SweepRow> rows;
        {
          py::gil_scoped_release release;
          rows = sweep(c, axis, values, jobs);
        }
        py::list out;
        for (const SweepRow& r : rows) {
          out.append(py::dict("value"_a = r.value, "seed"_a = r.seed,
                              "net_size"_a = r.summary.net_size,
                              "final_regret"_a = r.summary.final_regret,
                              "slope"_a = r.summary.slope_defined ? py::cast(r.summary.slope)
                                                                  : py::none(),
                              "violation_rate"_a = r.summary.violation_rate));
        }
        return out;
      },
      "config"_a, "axis"_a, "values"_a, "jobs"_a = 1);
  m.def(
      "fit_regret_slope",
      [](const std::vector<double>& cumulative, double burn_in) {
        return fit_regret_slope(std::span<const double>(cumulative), burn_in);
      },
      "cumulative"_a, "burn_in"_a = 0.2);
}
