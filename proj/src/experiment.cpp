#include "clf_etc/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "clf_etc/errors.hpp"
#include "clf_etc/sampling.hpp"

namespace clf_etc {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

double number(const json& j, const std::string& key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(where + "." + key + " must be finite");
  return d;
}

std::size_t count(const json& j, const std::string& key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(where + "." + key + " must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::string text(const json& j, const std::string& key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + " must be a string");
  return v.get<std::string>();
}

std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(where + " must be an array of numbers");
    out.push_back(e.get<double>());
    if (!std::isfinite(out.back())) throw ConfigError(where + " entries must be finite");
  }
  return out;
}

Tunable tunable(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) return {};
  const json& v = j.at(key);
  if (v.is_string() && v.get<std::string>() == "auto") return Tunable::automatic();
  if (v.is_number()) {
    const double d = v.get<double>();
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw ConfigError(where + "." + key + " must be positive");
    }
    return Tunable::of(d);
  }
  throw ConfigError(where + "." + key + " must be a positive number or \"auto\"");
}

json tunable_json(const Tunable& t) {
  if (t.is_auto()) return "auto";
  return t.value;
}

const std::set<std::string> kPolicyKinds = {"event", "self", "time",
                                            "periodic-event"};

PolicySpec parse_policy(const json& j) {
  const std::string where = "policy";
  check_keys(j, {"policy", "sigma", "sigma_tilde", "K", "h", "period", "tau",
                 "instants"},
             where);
  PolicySpec p;
  if (j.contains("policy")) p.kind = text(j, "policy", where);
  if (!kPolicyKinds.count(p.kind)) {
    throw ConfigError("policy.policy must be one of event, self, time, periodic-event");
  }
  if (j.contains("sigma")) p.sigma = number(j, "sigma", where);
  if (!(p.sigma > 0.0 && p.sigma < 1.0)) throw ConfigError("policy.sigma must lie in (0, 1)");
  if (j.contains("sigma_tilde")) p.sigma_tilde = number(j, "sigma_tilde", where);
  if (j.contains("K")) p.k_big = number(j, "K", where);
  if (p.sigma_tilde && !(*p.sigma_tilde > p.sigma && *p.sigma_tilde < 1.0)) {
    throw ConfigError("policy.sigma_tilde must lie in (sigma, 1)");
  }
  if (p.k_big && !(*p.k_big > 1.0)) throw ConfigError("policy.K must exceed 1");
  p.h = tunable(j, "h", where);
  p.period = tunable(j, "period", where);
  p.tau = tunable(j, "tau", where);
  if (j.contains("instants")) p.instants = numbers(j.at("instants"), "policy.instants");
  if (p.kind == "periodic-event" && !(p.sigma_tilde && p.k_big)) {
    throw ConfigError("periodic-event policy needs sigma_tilde and K");
  }
  return p;
}

json policy_json(const PolicySpec& p) {
  json j;
  j["policy"] = p.kind;
  j["sigma"] = p.sigma;
  if (p.sigma_tilde) j["sigma_tilde"] = *p.sigma_tilde;
  if (p.k_big) j["K"] = *p.k_big;
  if (p.h.kind != Tunable::Kind::kUnset) j["h"] = tunable_json(p.h);
  if (p.period.kind != Tunable::Kind::kUnset) j["period"] = tunable_json(p.period);
  if (p.tau.kind != Tunable::Kind::kUnset) j["tau"] = tunable_json(p.tau);
  if (!p.instants.empty()) j["instants"] = p.instants;
  return j;
}

IntegratorConfig parse_integrator(const json& j, IntegratorConfig c) {
  const std::string where = "integrator";
  check_keys(j, {"rel_tol", "abs_tol", "max_step", "event_time_tol", "max_events",
                 "zeno_floor", "zeno_count", "output_step", "blowup_norm",
                 "guard_probes"},
             where);
  if (j.contains("rel_tol")) c.rel_tol = number(j, "rel_tol", where);
  if (j.contains("abs_tol")) c.abs_tol = number(j, "abs_tol", where);
  if (j.contains("max_step")) c.max_step = number(j, "max_step", where);
  if (j.contains("event_time_tol")) c.event_time_tol = number(j, "event_time_tol", where);
  if (j.contains("max_events")) c.max_events = count(j, "max_events", where);
  if (j.contains("zeno_floor")) c.zeno_floor = number(j, "zeno_floor", where);
  if (j.contains("zeno_count")) c.zeno_count = static_cast<int>(count(j, "zeno_count", where));
  if (j.contains("output_step")) c.output_step = number(j, "output_step", where);
  if (j.contains("blowup_norm")) c.blowup_norm = number(j, "blowup_norm", where);
  if (j.contains("guard_probes")) c.guard_probes = static_cast<int>(count(j, "guard_probes", where));
  return c;
}

json integrator_json(const IntegratorConfig& c) {
  return {{"rel_tol", c.rel_tol},           {"abs_tol", c.abs_tol},
          {"max_step", c.max_step},         {"event_time_tol", c.event_time_tol},
          {"max_events", c.max_events},     {"zeno_floor", c.zeno_floor},
          {"zeno_count", c.zeno_count},     {"output_step", c.output_step},
          {"blowup_norm", c.blowup_norm},   {"guard_probes", c.guard_probes}};
}

RegionSpec parse_region(const json& j) {
  const std::string where = "region";
  check_keys(j, {"n_samples", "safety_factor", "n_anchors", "anchor_samples",
                 "tau_safety", "per_anchor", "check_samples"},
             where);
  RegionSpec r;
  if (j.contains("n_samples")) r.n_samples = count(j, "n_samples", where);
  if (j.contains("safety_factor")) r.safety_factor = number(j, "safety_factor", where);
  if (j.contains("n_anchors")) r.n_anchors = count(j, "n_anchors", where);
  if (j.contains("anchor_samples")) r.anchor_samples = count(j, "anchor_samples", where);
  if (j.contains("tau_safety")) r.tau_safety = number(j, "tau_safety", where);
  if (j.contains("per_anchor")) {
    if (!j.at("per_anchor").is_boolean()) throw ConfigError("region.per_anchor must be a boolean");
    r.per_anchor = j.at("per_anchor").get<bool>();
  }
  if (j.contains("check_samples")) r.check_samples = count(j, "check_samples", where);
  if (r.n_samples < 2 || r.anchor_samples < 2) {
    throw ConfigError("region sample counts must be at least 2");
  }
  if (r.n_anchors < 1) throw ConfigError("region.n_anchors must be at least 1");
  if (!(r.safety_factor >= 1.0) || !(r.tau_safety >= 1.0)) {
    throw ConfigError("region safety factors must be >= 1");
  }
  return r;
}

json region_json(const RegionSpec& r) {
  return {{"n_samples", r.n_samples},         {"safety_factor", r.safety_factor},
          {"n_anchors", r.n_anchors},         {"anchor_samples", r.anchor_samples},
          {"tau_safety", r.tau_safety},       {"per_anchor", r.per_anchor},
          {"check_samples", r.check_samples}};
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  check_keys(j, {"model", "policy", "x0", "horizon", "integrator", "region",
                 "output", "seed", "sweep"},
             "config");
  ExperimentConfig c;
  if (!j.contains("model")) throw ConfigError("config.model is required");
  const json& m = j.at("model");
  if (m.is_string()) {
    c.model.name = m.get<std::string>();
  } else {
    check_keys(m, {"name", "params"}, "model");
    c.model.name = text(m, "name", "model");
    if (m.contains("params")) {
      check_keys(m.at("params"), {"k", "tau", "v0", "d0", "rate_scale", "r_star", "phi"},
                 "model.params");
      for (const auto& item : m.at("params").items()) {
        c.model.params[item.key()] = number(m.at("params"), item.key(), "model.params");
      }
    }
  }
  const auto names = model_names();
  if (std::find(names.begin(), names.end(), c.model.name) == names.end()) {
    throw ConfigError("unknown model '" + c.model.name + "'");
  }
  if (j.contains("policy")) c.policy = parse_policy(j.at("policy"));
  if (j.contains("x0")) c.x0 = numbers(j.at("x0"), "x0");
  if (j.contains("horizon")) c.horizon = number(j, "horizon", "config");
  if (!(c.horizon > 0.0)) throw ConfigError("config.horizon must be positive");
  if (j.contains("integrator")) c.integrator = parse_integrator(j.at("integrator"), c.integrator);
  c.integrator.horizon = c.horizon;
  c.integrator.validate();
  if (j.contains("region")) c.region = parse_region(j.at("region"));
  if (j.contains("output")) {
    const json& o = j.at("output");
    check_keys(o, {"dir", "prefix"}, "output");
    if (o.contains("dir")) c.out_dir = text(o, "dir", "output");
    if (o.contains("prefix")) c.prefix = text(o, "prefix", "output");
  }
  if (j.contains("seed")) {
    const json& seed = j.at("seed");
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<long long>() < 0)) {
      throw ConfigError("config.seed must be a non-negative integer");
    }
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, {"axis", "values"}, "sweep");
    SweepSpec sw;
    sw.axis = text(s, "axis", "sweep");
    if (!s.contains("values") || !s.at("values").is_array() || s.at("values").empty()) {
      throw ConfigError("sweep.values must be a non-empty array");
    }
    for (const auto& v : s.at("values")) sw.values.push_back(v);
    c.sweep = sw;
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["model"] = {{"name", c.model.name}, {"params", json::object()}};
  for (const auto& [k, v] : c.model.params) j["model"]["params"][k] = v;
  j["policy"] = policy_json(c.policy);
  if (c.x0) j["x0"] = *c.x0;
  j["horizon"] = c.horizon;
  j["integrator"] = integrator_json(c.integrator);
  j["region"] = region_json(c.region);
  j["output"] = {{"dir", c.out_dir}, {"prefix", c.prefix}};
  j["seed"] = c.seed;
  if (c.sweep) j["sweep"] = {{"axis", c.sweep->axis}, {"values", c.sweep->values}};
  return j;
}

namespace {

SamplingOptions sampling_for(const RegionSpec& r, std::size_t n, std::uint64_t seed) {
  SamplingOptions s;
  s.n_samples = n;
  s.safety_factor = r.safety_factor;
  s.seed = seed;
  return s;
}

StateVector initial_state(const ExperimentConfig& cfg, const Model& model) {
  if (!cfg.x0) return model.default_x0;
  const auto& v = *cfg.x0;
  if (static_cast<int>(v.size()) != model.system.state_dim()) {
    throw ConfigError("x0 has " + std::to_string(v.size()) + " entries; model '" +
                      model.name + "' has state dimension " +
                      std::to_string(model.system.state_dim()));
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Model build_model(const ExperimentConfig& cfg) {
  Model m = make_model(cfg.model.name, cfg.model.params);
  m.certificate = m.certificate.with_sigma(cfg.policy.sigma);
  return m;
}

}  // namespace

DwellReport compute_dwell(const Model& model, const StateVector& x0,
                          const PolicySpec& policy, const RegionSpec& region,
                          std::uint64_t seed, bool force) {
  BoxPolicy box;
  box.seed = seed;
  const SublevelRegion b = bound_sublevel_box(model.certificate, x0, box);
  TauMinOptions opts;
  opts.n_anchors = region.n_anchors;
  opts.safety = region.tau_safety;
  opts.per_anchor = region.per_anchor;
  opts.sampling = sampling_for(region, region.anchor_samples, seed);
  opts.sampling.check_divergence = false;
  opts.box = box;
  opts.check_region_divergence = !force;

  DwellReport rep;
  DwellPolicyInputs event_inputs{policy.sigma, std::nullopt, std::nullopt};
  rep.event = tau_min_over_sublevel(model.system, model.certificate, b, event_inputs, opts);
  rep.recommended_period = rep.event.value;
  if (policy.sigma_tilde && policy.k_big) {
    DwellPolicyInputs p{policy.sigma, policy.sigma_tilde, policy.k_big};
    rep.periodic = tau_min_over_sublevel(model.system, model.certificate, b, p, opts);
    rep.recommended_h = 0.99 * rep.periodic->value;
  }
  return rep;
}

ResolvedExperiment resolve(const ExperimentConfig& cfg) {
  Model model = build_model(cfg);
  const StateVector x0 = initial_state(cfg, model);
  IntegratorConfig integ = cfg.integrator;
  integ.horizon = cfg.horizon;
  integ.validate();
  json notes = json::object();
  const PolicySpec& p = cfg.policy;

  std::optional<DwellReport> dwell;
  auto need_dwell = [&]() -> const DwellReport& {
    if (!dwell) dwell = compute_dwell(model, x0, p, cfg.region, cfg.seed);
    return *dwell;
  };

  TriggerPolicy policy = EventTriggered{p.sigma};
  if (p.kind == "self") {
    if (p.tau.is_value()) {
      const double tau = p.tau.value;
      policy = SelfTriggered{p.sigma, [tau](const StateVector&) { return tau; }};
      notes["tau"] = tau;
    } else {
      const ControlSystem sys = model.system;
      const ClfCertificate cert = model.certificate;
      const SamplingOptions s = [&] {
        SamplingOptions o = sampling_for(cfg.region, cfg.region.anchor_samples, cfg.seed);
        o.check_divergence = false;
        return o;
      }();
      const double safety = cfg.region.tau_safety;
      const double sigma = p.sigma;
      BoxPolicy box;
      box.seed = cfg.seed;
      policy = SelfTriggered{sigma, [sys, cert, s, safety, sigma, box](const StateVector& x) {
                               DwellPolicyInputs in{sigma, std::nullopt, std::nullopt};
                               return tau_at(sys, cert, x, in, s, box).value / safety;
                             }};
      notes["tau"] = "per-event tau(x_n)";
    }
  } else if (p.kind == "time") {
    TimeTriggered t;
    if (!p.instants.empty()) {
      t.instants = p.instants;
    } else if (p.period.is_value()) {
      t.period = p.period.value;
      notes["period"] = t.period;
    } else {
      t.period = need_dwell().recommended_period;
      notes["period"] = t.period;
      notes["period_source"] = "tau_min";
    }
    if (p.period.is_value() && dwell && t.period > dwell->recommended_period) {
      notes["warning"] = "period exceeds the estimated tau*";
    }
    policy = t;
  } else if (p.kind == "periodic-event") {
    PeriodicEvent pe;
    pe.sigma = p.sigma;
    pe.sigma_tilde = *p.sigma_tilde;
    pe.k_big = *p.k_big;
    if (p.h.is_value()) {
      pe.h = p.h.value;
    } else {
      pe.h = *need_dwell().recommended_h;
      notes["h_source"] = "0.99 inf tau0";
    }
    notes["h"] = pe.h;
    BoxPolicy box;
    box.seed = cfg.seed;
    const SublevelRegion b = bound_sublevel_box(model.certificate, x0, box);
    const EstimationReport m = estimate_big_m(
        model.system, model.certificate, b,
        sampling_for(cfg.region, cfg.region.n_samples, cfg.seed));
    pe.big_m = b.degenerate() ? 1.0 : m.value;
    notes["M"] = pe.big_m;
    policy = pe;
  }
  if (dwell) {
    notes["tau_min"] = dwell->event.value;
    if (dwell->periodic) notes["tau0_min"] = dwell->periodic->value;
  }
  validate_policy(policy);
  return ResolvedExperiment{std::move(model), x0, std::move(policy), integ, notes};
}

json stats_json(const RunStats& s) {
  const auto opt = [](const std::optional<double>& v) -> json {
    return v ? json(*v) : json(nullptr);
  };
  return {{"n_events", s.n_events},
          {"first_event_time", opt(s.first_event_time)},
          {"min_dwell", opt(s.min_dwell)},
          {"max_dwell", opt(s.max_dwell)},
          {"mean_event_frequency", opt(s.mean_event_frequency)},
          {"active_min_dwell", opt(s.active_min_dwell)},
          {"active_max_dwell", opt(s.active_max_dwell)},
          {"active_event_frequency", opt(s.active_event_frequency)}};
}

json constants_json(const CertificateConstants& c) {
  return {{"kappa", c.kappa},
          {"nu", c.nu},
          {"M", c.big_m},
          {"rho", c.rho},
          {"mu", c.mu},
          {"provenance", c.provenance == ConstantsProvenance::kSampled ? "sampled"
                                                                       : "closed_form"},
          {"n_samples", c.n_samples},
          {"safety_factor", c.safety_factor}};
}

json tau_min_json(const TauMinResult& r) {
  std::vector<double> anchor(r.argmin_anchor.data(),
                             r.argmin_anchor.data() + r.argmin_anchor.size());
  return {{"value", r.value},
          {"raw_min", r.raw_min},
          {"branch", to_string(r.branch)},
          {"argmin_anchor", anchor},
          {"n_anchors", r.n_anchors},
          {"region_constants", constants_json(r.region_constants)}};
}

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

ExperimentConfig load_with_overrides(const CommandOptions& o) {
  ExperimentConfig cfg = load_config(o.config_path);
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

fs::path output_path(const ExperimentConfig& cfg, const std::string& suffix) {
  fs::create_directories(cfg.out_dir);
  return fs::path(cfg.out_dir) / (cfg.prefix + suffix);
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << body;
}

bool anomalous(Termination t) {
  return t == Termination::kZenoAbort || t == Termination::kBlowup ||
         t == Termination::kEventCap;
}

struct RunOutcome {
  Trajectory traj;
  json summary;
};

RunOutcome simulate_resolved(const ExperimentConfig& cfg, const ResolvedExperiment& r) {
  RunOutcome out;
  out.traj = run_closed_loop(r.model.system, r.model.certificate, r.policy, r.x0,
                             r.integrator);
  const double sigma = policy_sigma(r.policy, r.model.certificate.sigma());
  json s;
  s["model"] = r.model.name;
  s["policy"] = policy_name(r.policy);
  s["seed"] = cfg.seed;
  s["x0"] = to_vec(r.x0);
  s["horizon"] = cfg.horizon;
  s["termination"] = to_string(out.traj.termination);
  if (!out.traj.diagnostic.empty()) s["diagnostic"] = out.traj.diagnostic;
  s["stats"] = stats_json(run_stats(out.traj));
  const RateCertificateCheck rc =
      check_rate_certificate(out.traj, r.model.certificate.energy_time(), sigma);
  s["rate_certificate"] = {{"ok", rc.ok},
                           {"n_points", rc.n_points},
                           {"n_violations", rc.n_violations},
                           {"worst_excess", rc.worst_excess}};
  s["resolved"] = r.notes;
  if (r.model.name == "zeno-polar") {
    const double r0 = r.x0.norm();
    json z;
    z["r_star"] = r0;
    if (r0 > 0.0 && r0 < 1.0) z["first_dwell_bound"] = zeno_first_event_bound(r0);
    if (out.traj.events.size() >= 2) {
      z["first_dwell"] = *out.traj.events[1].dwell;
      if (r0 > 0.0 && r0 < 1.0) {
        z["first_dwell_within_bound"] =
            *out.traj.events[1].dwell <= zeno_first_event_bound(r0);
      }
    }
    s["bound_comparison"] = z;
  }
  json events = json::array();
  for (const auto& e : out.traj.events) {
    events.push_back({{"index", e.index},
                      {"time", e.time},
                      {"dwell", e.dwell ? json(*e.dwell) : json(nullptr)},
                      {"reason", to_string(e.reason)},
                      {"guard", e.guard_value},
                      {"control", to_vec(e.control)}});
  }
  s["events"] = events;
  out.summary = s;
  return out;
}

}  // namespace

int cmd_simulate(const CommandOptions& opts) {
  const ExperimentConfig cfg = load_with_overrides(opts);
  const ResolvedExperiment r = resolve(cfg);
  const RunOutcome run = simulate_resolved(cfg, r);
  {
    std::ostringstream csv;
    write_csv(run.traj, csv);
    write_text(output_path(cfg, ".csv"), csv.str());
  }
  write_text(output_path(cfg, ".stats.json"), run.summary.dump(2) + "\n");
  if (opts.plot) {
    const double sigma = policy_sigma(r.policy, r.model.certificate.sigma());
    write_text(output_path(cfg, ".svg"),
               trajectory_svg(run.traj, r.model.certificate.energy_time(), sigma));
  }
  json brief = run.summary;
  brief.erase("events");
  std::cout << brief.dump(2) << "\n";
  if (anomalous(run.traj.termination)) {
    std::cerr << "run terminated with " << to_string(run.traj.termination) << ": "
              << run.traj.diagnostic << "\n";
    return 2;
  }
  return 0;
}

int cmd_verify(const CommandOptions& opts) {
  const ExperimentConfig cfg = load_with_overrides(opts);
  const Model model = build_model(cfg);
  const StateVector x0 = initial_state(cfg, model);
  const ClfCertificate& cert = model.certificate;
  const int d = model.system.state_dim();
  json rep;
  rep["model"] = model.name;
  rep["seed"] = cfg.seed;
  rep["x0"] = to_vec(x0);
  rep["expected_status"] = to_string(model.expected_status);
  bool ok = true;

  // Pointwise CLF inequality and gradient check on the ball and on B(x0).
  std::vector<StateVector> samples;
  const double radius = model.check_radius;
  for (std::size_t i = 0; samples.size() < cfg.region.check_samples && i < 100 * cfg.region.check_samples; ++i) {
    const StateVector x =
        radius * (2.0 * halton_point(i, d, cfg.seed).array() - 1.0).matrix();
    if (x.norm() <= radius) samples.push_back(x);
  }
  const ClfReport clf = verify_clf_pointwise(cert, model.system, samples);
  const double grad = gradient_consistency(cert, samples);
  double v_max = cert.value(x0);
  for (const auto& x : samples) v_max = std::max(v_max, cert.value(x));
  const RateCheck rate = check_rate_function(cert.rate(), std::max(v_max, 1e-12));
  rep["clf_inequality"] = {{"ok", clf.ok()},
                           {"n_samples", clf.n_samples},
                           {"n_skipped", clf.n_skipped},
                           {"max_margin", clf.max_margin},
                           {"n_violations", clf.violations.size()}};
  rep["gradient_consistency"] = {{"ok", grad <= 1e-5}, {"worst", grad}};
  rep["rate_function"] = {{"positive", rate.positive},
                          {"monotone_ok", rate.monotone_ok},
                          {"derivative_ok", rate.derivative_ok}};
  ok = ok && clf.ok() && grad <= 1e-5 && rate.positive && rate.monotone_ok &&
       rate.derivative_ok;

  json assumptions;
  try {
    BoxPolicy box;
    box.seed = cfg.seed;
    const SublevelRegion b = bound_sublevel_box(cert, x0, box);
    assumptions["properness"] = {{"ok", true},
                                 {"box_lower", to_vec(b.lower)},
                                 {"box_upper", to_vec(b.upper)}};
    const SamplingOptions s = sampling_for(cfg.region, cfg.region.n_samples, cfg.seed);
    const EstimationReport kappa = estimate_kappa(model.system, cert, b, s);
    const EstimationReport nu = estimate_nu(cert, b, s);
    json constants = {{"kappa", kappa.value}, {"nu", nu.value}};
    try {
      const EstimationReport m = estimate_big_m(model.system, cert, b, s);
      constants["M"] = m.value;
      // Equivalent form of the non-degeneracy bound on the same samples.
      std::size_t bad = 0;
      for (const auto& x : sample_sublevel(cert, b, s.n_samples, s.seed)) {
        if (cert.value(x) < s.equilibrium_fraction * b.level) continue;
        const auto nd = nondegeneracy_at(model.system, cert, x);
        if (nd.speed_ratio > m.value * (1.0 + 1e-12) ||
            nd.cos_theta > -1.0 / m.value + 1e-12) {
          ++bad;
        }
      }
      assumptions["non_degeneracy"] = {{"ok", bad == 0}, {"equivalent_form_failures", bad}};
      ok = ok && bad == 0;
    } catch (const AssumptionViolation& e) {
      assumptions["non_degeneracy"] = {{"ok", false}, {"reason", e.what()}};
      ok = false;
    }
    try {
      const double rho = cert.rate().monotone_nondecreasing()
                             ? 0.0
                             : estimate_rho(cert.rate(), b.level);
      constants["rho"] = rho;
      assumptions["rate_regularity"] = {{"ok", true}};
    } catch (const ConfigError& e) {
      assumptions["rate_regularity"] = {{"ok", false}, {"reason", e.what()}};
      ok = false;
    }
    constants["mu"] = compute_mu(kappa.value, nu.value);
    constants["n_samples"] = kappa.n_samples;
    constants["safety_factor"] = s.safety_factor;
    constants["argmax_kappa"] = to_vec(kappa.argmax_point);
    rep["constants"] = constants;
  } catch (const AssumptionViolation& e) {
    assumptions[e.assumption()] = {{"ok", false}, {"reason", e.what()}};
    ok = false;
  }
  rep["assumptions"] = assumptions;
  rep["ok"] = ok;
  write_text(output_path(cfg, ".verify.json"), rep.dump(2) + "\n");
  std::cout << rep.dump(2) << "\n";
  return ok ? 0 : 1;
}

int cmd_dwell(const CommandOptions& opts) {
  const ExperimentConfig cfg = load_with_overrides(opts);
  const Model model = build_model(cfg);
  const StateVector x0 = initial_state(cfg, model);
  json rep;
  rep["model"] = model.name;
  rep["seed"] = cfg.seed;
  rep["x0"] = to_vec(x0);
  rep["sigma"] = cfg.policy.sigma;
  DwellReport dr;
  try {
    dr = compute_dwell(model, x0, cfg.policy, cfg.region, cfg.seed, opts.force);
  } catch (const AssumptionViolation& e) {
    rep["ok"] = false;
    rep["assumption"] = e.assumption();
    rep["reason"] = e.what();
    write_text(output_path(cfg, ".dwell.json"), rep.dump(2) + "\n");
    std::cout << rep.dump(2) << "\n";
    return 1;
  }
  rep["tau_min"] = tau_min_json(dr.event);
  rep["recommended_period"] = dr.recommended_period;
  if (dr.periodic) {
    rep["sigma_tilde"] = *cfg.policy.sigma_tilde;
    rep["K"] = *cfg.policy.k_big;
    rep["tau0_min"] = tau_min_json(*dr.periodic);
    rep["recommended_h"] = *dr.recommended_h;
  }
  if (opts.force) rep["forced"] = true;

  // Event-triggered run from x0 to compare the observed dwell.
  ExperimentConfig sim = cfg;
  sim.policy.kind = "event";
  const ResolvedExperiment r = resolve(sim);
  const Trajectory traj = run_closed_loop(r.model.system, r.model.certificate,
                                          r.policy, r.x0, r.integrator);
  const RunStats st = run_stats(traj);
  json cross = {{"termination", to_string(traj.termination)},
                {"n_events", st.n_events}};
  if (st.min_dwell) {
    cross["min_dwell"] = *st.min_dwell;
    cross["min_dwell_ge_tau_min"] = *st.min_dwell >= dr.event.value;
  } else {
    cross["min_dwell"] = nullptr;
    cross["min_dwell_ge_tau_min"] = true;
  }
  rep["cross_check"] = cross;
  rep["ok"] = cross["min_dwell_ge_tau_min"].get<bool>();
  write_text(output_path(cfg, ".dwell.json"), rep.dump(2) + "\n");
  std::cout << rep.dump(2) << "\n";
  return 0;
}

namespace {

ExperimentConfig apply_axis(ExperimentConfig c, const std::string& axis, const json& v) {
  const auto num = [&]() {
    if (!v.is_number()) throw ConfigError("sweep value for '" + axis + "' must be a number");
    return v.get<double>();
  };
  if (axis == "policy") {
    if (!v.is_string()) throw ConfigError("sweep value for 'policy' must be a string");
    json p = policy_json(c.policy);
    p["policy"] = v.get<std::string>();
    c.policy = parse_policy(p);
  } else if (axis == "sigma" || axis == "sigma_tilde" || axis == "K" || axis == "h" ||
             axis == "period" || axis == "tau") {
    json p = policy_json(c.policy);
    p[axis] = v;
    c.policy = parse_policy(p);
  } else if (axis == "horizon") {
    c.horizon = num();
    c.integrator.horizon = c.horizon;
  } else if (axis == "x0") {
    c.x0 = numbers(v, "sweep x0");
  } else {
    c.model.params[axis] = num();
    make_model(c.model.name, c.model.params);  // rejects unknown parameters
  }
  return c;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

}  // namespace

int cmd_sweep(const CommandOptions& opts) {
  const ExperimentConfig cfg = load_with_overrides(opts);
  if (!cfg.sweep) throw ConfigError("sweep command needs a 'sweep' section");
  const SweepSpec& sw = *cfg.sweep;
  const std::size_t n = sw.values.size();
  std::vector<std::string> rows(n);
  parallel_for(n, [&](std::size_t i) {
    std::ostringstream row;
    row << i << ',' << '"' << sw.values[i].dump() << '"';
    try {
      const ExperimentConfig c = apply_axis(cfg, sw.axis, sw.values[i]);
      const ResolvedExperiment r = resolve(c);
      const Trajectory traj = run_closed_loop(r.model.system, r.model.certificate,
                                              r.policy, r.x0, r.integrator);
      const RunStats st = run_stats(traj);
      const double sigma = policy_sigma(r.policy, r.model.certificate.sigma());
      const RateCertificateCheck rc =
          check_rate_certificate(traj, r.model.certificate.energy_time(), sigma);
      std::optional<double> first_dwell;
      if (traj.events.size() >= 2) first_dwell = traj.events[1].dwell;
      std::optional<double> bound;
      const double r0 = r.x0.norm();
      if (r.model.name == "zeno-polar" && r0 > 0.0 && r0 < 1.0) {
        bound = zeno_first_event_bound(r0);
      }
      std::optional<double> clock;
      if (r.notes.contains("period")) clock = r.notes["period"].get<double>();
      if (r.notes.contains("h")) clock = r.notes["h"].get<double>();
      row << ',' << policy_name(r.policy) << ',' << to_string(traj.termination) << ','
          << st.n_events << ',' << fmt(st.first_event_time) << ',' << fmt(st.min_dwell)
          << ',' << fmt(st.max_dwell) << ',' << fmt(st.mean_event_frequency) << ','
          << fmt(st.active_min_dwell) << ',' << fmt(st.active_max_dwell) << ','
          << fmt(st.active_event_frequency) << ',' << fmt(first_dwell) << ',' << fmt(bound) << ',' << fmt(clock) << ','
          << (rc.ok ? 1 : 0) << ",";
    } catch (const std::exception& e) {
      std::string msg = e.what();
      for (char& ch : msg) {
        if (ch == ',' || ch == '"' || ch == '\n') ch = ' ';
      }
      row << ",,error,,,,,,,,,,,,," << msg;
    }
    rows[i] = row.str();
  });
  std::ostringstream csv;
  csv << "index,value,policy,termination,n_events,first_event_time,min_dwell,"
         "max_dwell,mean_event_frequency,active_min_dwell,active_max_dwell,"
         "active_event_frequency,first_dwell,first_dwell_bound,clock,"
         "rate_certificate_ok,error\n";
  for (const auto& r : rows) csv << r << '\n';
  write_text(output_path(cfg, ".sweep.csv"), csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_stats(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw ConfigError("cannot open '" + csv_path + "'");
  const Trajectory traj = read_csv(in);
  json j = stats_json(run_stats(traj));
  j["n_samples"] = traj.samples.size();
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace clf_etc
