#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "clf_etc/dwell_time.hpp"
#include "clf_etc/models.hpp"
#include "clf_etc/scheduling.hpp"
#include "clf_etc/simulation.hpp"

namespace clf_etc {

/// A numeric setting that is unset, given, or left for the dwell-time
/// calculus to choose ("auto").
struct Tunable {
  enum class Kind { kUnset, kValue, kAuto };
  Kind kind = Kind::kUnset;
  double value = 0.0;

  static Tunable of(double v) { return {Kind::kValue, v}; }
  static Tunable automatic() { return {Kind::kAuto, 0.0}; }
  bool is_value() const { return kind == Kind::kValue; }
  bool is_auto() const { return kind == Kind::kAuto; }
  bool operator==(const Tunable&) const = default;
};

struct ModelSpec {
  std::string name = "acc";
  std::map<std::string, double> params;
  bool operator==(const ModelSpec&) const = default;
};

struct PolicySpec {
  std::string kind = "event";  // event | self | time | periodic-event
  double sigma = 0.9;
  std::optional<double> sigma_tilde;
  std::optional<double> k_big;
  Tunable h;       // periodic-event check interval
  Tunable period;  // time-triggered period
  Tunable tau;     // self-triggered interval
  std::vector<double> instants;
  bool operator==(const PolicySpec&) const = default;
};

/// Sampling effort for constants and dwell estimates.
struct RegionSpec {
  std::size_t n_samples = 2048;
  double safety_factor = 1.25;
  std::size_t n_anchors = 256;
  std::size_t anchor_samples = 256;
  double tau_safety = 1.1;
  bool per_anchor = true;
  std::size_t check_samples = 10000;
  bool operator==(const RegionSpec&) const = default;
};

struct SweepSpec {
  std::string axis;
  std::vector<nlohmann::json> values;
  bool operator==(const SweepSpec&) const = default;
};

struct ExperimentConfig {
  ModelSpec model;
  PolicySpec policy;
  std::optional<std::vector<double>> x0;
  double horizon = 10.0;
  IntegratorConfig integrator;  // its horizon mirrors `horizon`
  RegionSpec region;
  std::string out_dir = "out";
  std::string prefix = "run";
  std::uint64_t seed = 0;
  std::optional<SweepSpec> sweep;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Strict parse: unknown keys, wrong types and invalid values throw
/// ConfigError before anything is computed.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Everything a run needs after models and "auto" values are resolved.
struct ResolvedExperiment {
  Model model;
  StateVector x0;
  TriggerPolicy policy;
  IntegratorConfig integrator;
  nlohmann::json notes;  // resolved periods, dwell estimates, warnings
};

ResolvedExperiment resolve(const ExperimentConfig& cfg);

/// Dwell-time report for the sublevel set of x0.
struct DwellReport {
  TauMinResult event;                    // inf tau over B(x0)
  std::optional<TauMinResult> periodic;  // inf tau^0 when sigma_tilde, K known
  double recommended_period = 0.0;       // tau* for time-triggered control
  std::optional<double> recommended_h;   // < inf tau^0
};

/// `force` skips the near-origin divergence scan of the M estimate.
DwellReport compute_dwell(const Model& model, const StateVector& x0,
                          const PolicySpec& policy, const RegionSpec& region,
                          std::uint64_t seed, bool force = false);

nlohmann::json stats_json(const RunStats& stats);
nlohmann::json constants_json(const CertificateConstants& c);
nlohmann::json tau_min_json(const TauMinResult& r);

/// Exit codes: 0 success, 1 assumption or configuration failure, 2 runtime
/// termination anomaly.
struct CommandOptions {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool force = false;
  bool plot = false;
};

int cmd_simulate(const CommandOptions& opts);
int cmd_verify(const CommandOptions& opts);
int cmd_dwell(const CommandOptions& opts);
int cmd_sweep(const CommandOptions& opts);
int cmd_stats(const std::string& csv_path);

/// Minimal SVG with x(t), u(t) and V(t) against its convergence bound.
std::string trajectory_svg(const Trajectory& traj, const EnergyTimeMap& map,
                           double sigma);

}  // namespace clf_etc
