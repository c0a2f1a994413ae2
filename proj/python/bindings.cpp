#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "clf_etc/dwell_time.hpp"
#include "clf_etc/errors.hpp"
#include "clf_etc/experiment.hpp"
#include "clf_etc/models.hpp"
#include "clf_etc/simulation.hpp"

namespace py = pybind11;
using namespace clf_etc;
using json = nlohmann::json;

namespace {

// Configs cross the boundary as JSON text; the Python side owns the dict.
ExperimentConfig config_from(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

py::dict trajectory_dict(const Trajectory& tr, const RunStats& stats,
                         const RateCertificateCheck& rate, const json& notes) {
  const auto n = static_cast<Eigen::Index>(tr.samples.size());
  Eigen::VectorXd t(n), v(n), w(n);
  Eigen::MatrixXd x(n, tr.state_dim), u(n, tr.input_dim);
  std::vector<bool> flag(tr.samples.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = tr.samples[static_cast<std::size_t>(i)];
    t[i] = s.t;
    x.row(i) = s.x.transpose();
    u.row(i) = s.u.transpose();
    v[i] = s.v;
    w[i] = s.w;
    flag[static_cast<std::size_t>(i)] = s.event;
  }
  const auto m = static_cast<Eigen::Index>(tr.events.size());
  Eigen::VectorXd et(m);
  Eigen::MatrixXd ex(m, tr.state_dim), eu(m, tr.input_dim);
  std::vector<std::string> reasons;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& e = tr.events[static_cast<std::size_t>(i)];
    et[i] = e.time;
    ex.row(i) = e.state.transpose();
    eu.row(i) = e.control.transpose();
    reasons.push_back(to_string(e.reason));
  }
  py::dict out;
  out["t"] = t;
  out["x"] = x;
  out["u"] = u;
  out["V"] = v;
  out["W"] = w;
  out["event_flag"] = flag;
  out["event_times"] = et;
  out["event_states"] = ex;
  out["event_controls"] = eu;
  out["event_reasons"] = reasons;
  out["termination"] = to_string(tr.termination);
  out["diagnostic"] = tr.diagnostic;
  out["stats_json"] = stats_json(stats).dump();
  out["rate_certificate_ok"] = rate.ok;
  out["notes_json"] = notes.dump();
  return out;
}

py::dict simulate(const std::string& config_text) {
  const ResolvedExperiment r = resolve(config_from(config_text));
  Trajectory tr;
  {
    py::gil_scoped_release release;
    tr = run_closed_loop(r.model.system, r.model.certificate, r.policy, r.x0, r.integrator);
  }
  const RateCertificateCheck rate =
      check_rate_certificate(tr, r.model.certificate.energy_time(), tr.sigma);
  return trajectory_dict(tr, run_stats(tr), rate, r.notes);
}

std::string dwell(const std::string& config_text, bool force) {
  const ExperimentConfig cfg = config_from(config_text);
  std::map<std::string, double> params = cfg.model.params;
  const Model m = make_model(cfg.model.name, params);
  StateVector x0 = m.default_x0;
  if (cfg.x0) x0 = Eigen::Map<const StateVector>(cfg.x0->data(), cfg.x0->size());
  const DwellReport d = compute_dwell(m, x0, cfg.policy, cfg.region, cfg.seed, force);
  json j = {{"tau_min", tau_min_json(d.event)}, {"recommended_period", d.recommended_period}};
  if (d.periodic) j["tau0_min"] = tau_min_json(*d.periodic);
  if (d.recommended_h) j["recommended_h"] = *d.recommended_h;
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Event-triggered control with control Lyapunov functions";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<AssumptionViolation>(m, "AssumptionViolation", PyExc_RuntimeError);

  m.def("model_names", &model_names);
  m.def("default_x0", [](const std::string& name, const std::map<std::string, double>& params) {
    return Eigen::VectorXd(make_model(name, params).default_x0);
  }, py::arg("name"), py::arg("params") = std::map<std::string, double>{});
  m.def("simulate", &simulate, py::arg("config_json"));
  m.def("dwell", &dwell, py::arg("config_json"), py::arg("force") = false);
  m.def("zeno_first_event_bound", &zeno_first_event_bound, py::arg("r_star"));
  m.def("c_bound", &c_bound, py::arg("kappa"), py::arg("t"));
}
