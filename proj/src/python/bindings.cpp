#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "p2pbuf/bounds.hpp"
#include "p2pbuf/error.hpp"
#include "p2pbuf/fluid.hpp"
#include "p2pbuf/meanfield.hpp"
#include "p2pbuf/model.hpp"
#include "p2pbuf/simulator.hpp"
#include "p2pbuf/sizing.hpp"

namespace py = pybind11;
using namespace p2pbuf;

namespace {

PolicySpec policy_from(const std::string& name, std::optional<double> epsilon) {
  return PolicySpec::parse(name, epsilon);
}

std::vector<double> to_list(const OccupancyProfile& p) { return {p.values().begin(), p.values().end()}; }

SimConfig make_config(const std::string& policy, std::optional<double> epsilon, int peers, int buffer,
                      std::int64_t slots, std::optional<std::int64_t> warmup, std::uint64_t seed,
                      int replications, unsigned threads, std::optional<int> hybrid_threshold) {
  SimConfig c;
  c.params = SystemParams::make(peers, buffer);
  c.policy = policy_from(policy, epsilon);
  c.slots = slots;
  c.warmup = warmup.value_or(SimConfig::default_warmup(slots));
  c.seed = seed;
  c.replications = replications;
  c.threads = threads;
  c.hybrid_threshold = hybrid_threshold;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mean-field, bounds and simulation for P2P live-streaming buffer sizing";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<EmptySet>(m, "EmptySet", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
  py::register_exception<UnreachableTarget>(m, "UnreachableTarget", base.ptr());

  m.def(
      "select_chunk",
      [](const std::string& policy, const std::vector<int>& diff, int buffer, std::optional<int> threshold,
         std::optional<double> epsilon) {
        const PolicySpec spec = policy == "hybrid" ? PolicySpec::hybrid(epsilon.value_or(0.5))
                                                   : policy_from(policy, epsilon);
        return select_chunk(spec, DifferenceSet(std::span<const int>(diff)), buffer, threshold);
      },
      py::arg("policy"), py::arg("diff"), py::arg("buffer"), py::arg("threshold") = py::none(),
      py::arg("epsilon") = py::none());
  m.def("threshold_above", [](std::vector<double> p, double q) { return threshold_above(OccupancyProfile(std::move(p)), q); });
  m.def("threshold_below", [](std::vector<double> p, double q) { return threshold_below(OccupancyProfile(std::move(p)), q); });

  m.def("rarest_first_profile", [](int peers, int buffer) {
    return to_list(rarest_first_profile(SystemParams::make(peers, buffer)));
  }, py::arg("peers"), py::arg("buffer"));
  m.def("greedy_profile", [](int peers, int buffer, double tolerance) {
    SolverSettings s;
    s.tolerance = tolerance;
    return to_list(greedy_profile(SystemParams::make(peers, buffer), s));
  }, py::arg("peers"), py::arg("buffer"), py::arg("tolerance") = 1e-12);
  m.def("hybrid_profile", [](int peers, int buffer, double epsilon) {
    return to_list(hybrid_profile(SystemParams::make(peers, buffer), epsilon));
  }, py::arg("peers"), py::arg("buffer"), py::arg("epsilon"));
  m.def("hybrid_context", [](int peers, double epsilon) {
    const HybridContext c = hybrid_context(SystemParams{peers, 2}, epsilon);
    return py::make_tuple(c.threshold, c.a);
  }, py::arg("peers"), py::arg("epsilon"));
  m.def("residual", [](std::vector<double> profile, const std::string& policy, int peers,
                       std::optional<double> epsilon) {
    const PolicySpec spec = policy_from(policy, epsilon);
    const SystemParams params{peers, static_cast<int>(profile.size())};
    std::optional<HybridContext> ctx;
    if (spec.kind() == PolicyKind::Hybrid) ctx = hybrid_context(params, *epsilon);
    return residual(OccupancyProfile(std::move(profile)), spec, params, ctx);
  }, py::arg("profile"), py::arg("policy"), py::arg("peers"), py::arg("epsilon") = py::none());

  m.def("rarest_first_fluid_size", &rarest_first_fluid_size, py::arg("peers"), py::arg("q"));
  m.def("greedy_fluid_size_upper", &greedy_fluid_size_upper, py::arg("peers"), py::arg("q"));
  m.def("greedy_fluid_size_lower", &greedy_fluid_size_lower, py::arg("peers"), py::arg("q"), py::arg("alpha"));

  m.def("universal_lower_bound", &universal_lower_bound, py::arg("peers"), py::arg("q"));
  m.def("rarest_first_lower_bound", &rarest_first_lower_bound, py::arg("peers"), py::arg("q"));
  m.def("greedy_lower_bound", &greedy_lower_bound, py::arg("peers"), py::arg("q"));
  m.def("hybrid_sufficient_size", &hybrid_sufficient_size, py::arg("peers"), py::arg("q"));

  py::class_<SimResult>(m, "SimResult")
      .def_readonly("skip_free_prob", &SimResult::skip_free_prob)
      .def_readonly("ci_halfwidth", &SimResult::ci_halfwidth)
      .def_readonly("empirical_profile", &SimResult::empirical_profile)
      .def_readonly("slots_measured", &SimResult::slots_measured)
      .def_readonly("playout_opportunities", &SimResult::playout_opportunities)
      .def_readonly("empty_slots", &SimResult::empty_slots)
      .def_readonly("replication_estimates", &SimResult::replication_estimates)
      .def_readonly("hybrid_threshold", &SimResult::hybrid_threshold)
      .def_readonly("rng_algorithm", &SimResult::rng_algorithm);

  m.def(
      "run_fixed",
      [](const std::string& policy, int peers, int buffer, std::int64_t slots, std::optional<double> epsilon,
         std::optional<std::int64_t> warmup, std::uint64_t seed, int replications, unsigned threads,
         std::optional<int> hybrid_threshold) {
        const SimConfig c = make_config(policy, epsilon, peers, buffer, slots, warmup, seed, replications,
                                        threads, hybrid_threshold);
        py::gil_scoped_release release;
        return run_fixed(c);
      },
      py::arg("policy"), py::arg("peers"), py::arg("buffer"), py::arg("slots"), py::arg("epsilon") = py::none(),
      py::arg("warmup") = py::none(), py::arg("seed") = 1, py::arg("replications") = 1, py::arg("threads") = 1,
      py::arg("hybrid_threshold") = py::none());

  m.def(
      "run_churn",
      [](const std::string& policy, int buffer, std::int64_t slots, int total_peers, int initially_active,
         double rate, std::optional<double> epsilon, std::optional<std::int64_t> warmup, std::uint64_t seed,
         int replications, unsigned threads, bool startup_latency) {
        const SimConfig c = make_config(policy, epsilon, initially_active < 2 ? 2 : initially_active, buffer,
                                        slots, warmup, seed, replications, threads, std::nullopt);
        ChurnConfig churn;
        churn.total_peers = total_peers;
        churn.initially_active = initially_active;
        churn.activate_prob = churn.deactivate_prob = rate;
        churn.startup_latency_is_buffer = startup_latency;
        py::gil_scoped_release release;
        return run_churn(c, churn);
      },
      py::arg("policy"), py::arg("buffer"), py::arg("slots"), py::arg("total_peers"), py::arg("initially_active"),
      py::arg("rate"), py::arg("epsilon") = py::none(), py::arg("warmup") = py::none(), py::arg("seed") = 1,
      py::arg("replications") = 1, py::arg("threads") = 1, py::arg("startup_latency") = true);

  m.def(
      "min_buffer",
      [](const std::string& policy, int peers, double q, std::optional<double> epsilon, int m_max) {
        SizingRequest r;
        r.policy = policy_from(policy, epsilon);
        r.peers = peers;
        r.q = q;
        r.m_max = m_max;
        const SizingResult s = min_buffer(r);
        return py::make_tuple(s.min_buffer, s.achieved);
      },
      py::arg("policy"), py::arg("peers"), py::arg("q"), py::arg("epsilon") = py::none(), py::arg("m_max") = 4096);

  m.def(
      "sweep",
      [](const std::string& policy, int peers, const std::vector<double>& q_grid, std::optional<double> epsilon,
         int m_max) {
        std::vector<py::tuple> out;
        for (const SweepRow& row : sweep(policy_from(policy, epsilon), peers, q_grid, MeanFieldMethod{}, m_max)) {
          if (row.result) {
            out.push_back(py::make_tuple(row.q, row.result->min_buffer, row.result->achieved));
          } else {
            out.push_back(py::make_tuple(row.q, py::none(), py::none()));
          }
        }
        return out;
      },
      py::arg("policy"), py::arg("peers"), py::arg("q_grid"), py::arg("epsilon") = py::none(),
      py::arg("m_max") = 4096);
}
