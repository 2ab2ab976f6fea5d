#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "json.hpp"
#include "pseudochain/common/bytes.hpp"
#include "pseudochain/common/error.hpp"
#include "pseudochain/harness/experiments.hpp"

namespace py = pybind11;
using namespace pseudochain;

namespace {

ExperimentConfig parse_config(const std::string& overrides) {
  if (overrides.empty()) return ExperimentConfig{};
  const auto j = nlohmann::json::parse(overrides, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kConfigError, "config is not valid JSON");
  return config_from_json(j);
}

std::string metrics_json(const MetricsRecord& r) {
  std::ostringstream os;
  write_metrics(os, r, OutputFormat::kJson);
  return os.str();
}

py::dict step_dict(const StepRecord& s) {
  py::dict d;
  d["t"] = s.t;
  d["G"] = s.G;
  d["D"] = s.D;
  d["c"] = s.c;
  d["welfare"] = s.welfare;
  d["reward"] = s.reward;
  d["cap_exceeded"] = s.cap_exceeded;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "C++ core of pseudochain";

  static py::exception<Error> error(m, "PseudochainError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object code = py::str(std::string(to_string(e.code())));
      PyErr_SetObject(error.ptr(), py::make_tuple(code, py::str(e.what())).ptr());
    }
  });

  m.def("sha256_hex", [](py::bytes data) {
    const std::string s = data;
    return to_hex(sha256(to_bytes(s)));
  });
  m.def("hmac_sha256_hex", [](py::bytes key, py::bytes data) {
    const std::string k = key, d = data;
    return to_hex(hmac_sha256(to_bytes(k), to_bytes(d)));
  });

  m.def("time_average_dope", [](double lambda, double a, double b) {
    TrackingBounds bounds{a, b};
    bounds.validate();
    return time_average_dope(lambda, bounds);
  }, py::arg("lam"), py::arg("a") = 1.0 / 160.0, py::arg("b") = 0.1);
  m.def("interval_area", &interval_area, py::arg("X"), py::arg("p"));
  m.def("instantaneous_dope", &instantaneous_dope, py::arg("t"), py::arg("t_prev"), py::arg("p"));

  m.def("default_config_json", [] { return to_json(ExperimentConfig{}).dump(); });
  m.def("config_digest", [](const std::string& overrides) {
    return config_digest(parse_config(overrides));
  }, py::arg("overrides") = "");

  m.def("critical_ratio", [](const std::string& overrides) {
    const EnvConfig env = parse_config(overrides).env();
    return critical_ratio(env.economics, env.hbar());
  }, py::arg("overrides") = "");
  m.def("optimal_generation", [](const std::string& overrides) {
    const EnvConfig env = parse_config(overrides).env();
    std::vector<int> g;
    for (int j = 0; j < env.agents(); ++j) {
      g.push_back(optimal_generation(env.economics, env.hbar(), env.demand(j)));
    }
    return g;
  }, py::arg("overrides") = "");

  m.def("run_chain_benchmark", [](const std::string& overrides) {
    std::vector<std::string> out;
    for (const auto& r : run_chain_benchmark(parse_config(overrides))) out.push_back(metrics_json(r));
    return out;
  }, py::arg("overrides") = "");
  m.def("run_protocol_simulation", [](const std::string& overrides) {
    py::gil_scoped_release release;
    return metrics_json(run_protocol_simulation(parse_config(overrides)).metrics);
  }, py::arg("overrides") = "");
  m.def("run_dope_benchmark", [](const std::string& overrides) {
    return metrics_json(run_dope_benchmark(parse_config(overrides)));
  }, py::arg("overrides") = "");
  m.def("run_newsvendor_benchmark", [](const std::string& overrides) {
    return metrics_json(run_newsvendor_benchmark(parse_config(overrides)));
  }, py::arg("overrides") = "");
  m.def("run_training_eval", [](const std::string& overrides) {
    TrainingRun run;
    {
      py::gil_scoped_release release;
      run = run_training_eval(parse_config(overrides));
    }
    return metrics_json(run.summary);
  }, py::arg("overrides") = "");
  m.def("sweep_csv", [](const std::string& overrides, const std::string& kind) {
    if (kind != "lambda" && kind != "delta") {
      throw Error(ErrorCode::kConfigError, "kind must be 'lambda' or 'delta'");
    }
    std::ostringstream os;
    write_sweep_csv(os, sweep_and_export(parse_config(overrides),
                                         kind == "delta" ? SweepKind::kDelta : SweepKind::kLambda));
    return os.str();
  }, py::arg("overrides") = "", py::arg("kind") = "lambda");

  py::class_<PseudonymGenEnv>(m, "GenerationEnv")
      .def(py::init([](const std::string& overrides) {
             return PseudonymGenEnv(parse_config(overrides).env());
           }),
           py::arg("overrides") = "")
      .def("reset", &PseudonymGenEnv::reset, py::arg("seed"))
      .def("step", [](PseudonymGenEnv& env, const std::vector<int>& actions) {
        return step_dict(env.step(actions));
      })
      .def("observe", py::overload_cast<>(&PseudonymGenEnv::observe, py::const_))
      .def_property_readonly("done", &PseudonymGenEnv::done)
      .def_property_readonly("time", &PseudonymGenEnv::time)
      .def_property_readonly("hbar", &PseudonymGenEnv::hbar)
      .def_property_readonly("agents", [](const PseudonymGenEnv& e) { return e.config().agents(); })
      .def_property_readonly("g_max", [](const PseudonymGenEnv& e) {
        return e.config().economics.g_max;
      })
      .def_property_readonly("slot_cap", [](const PseudonymGenEnv& e) {
        return e.config().economics.slot_cap();
      });
}
