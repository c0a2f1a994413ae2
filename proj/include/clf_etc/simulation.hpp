#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "clf_etc/dynamics.hpp"
#include "clf_etc/scheduling.hpp"

namespace clf_etc {

/// Zero-valued step fields resolve against the horizon: max_step and
/// output_step to horizon / 1000, event_time_tol to 1e-12 * horizon.
struct IntegratorConfig {
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  double max_step = 0.0;
  double event_time_tol = 0.0;
  std::size_t max_events = 1000000;
  double zeno_floor = 1e-9;
  int zeno_count = 10;
  double horizon = 10.0;
  double output_step = 0.0;
  double blowup_norm = 1e12;
  int guard_probes = 8;

  bool operator==(const IntegratorConfig&) const = default;
  void validate() const;
  double resolved_max_step() const;
  double resolved_event_tol() const;
  double resolved_output_step() const;
};

enum class Termination { kHorizon, kEquilibrium, kZenoAbort, kBlowup, kEventCap };

std::string to_string(Termination termination);

struct EventRecord {
  std::size_t index = 0;
  double time = 0.0;
  StateVector state;
  ControlVector control;
  double guard_value = 0.0;
  std::optional<double> dwell;  // absent for the initial sample
  TriggerReason reason = TriggerReason::kInitial;
};

struct TrajectorySample {
  double t = 0.0;
  StateVector x;
  ControlVector u;
  double v = 0.0;
  double w = 0.0;
  bool event = false;
};

struct Trajectory {
  int state_dim = 0;
  int input_dim = 0;
  double sigma = 0.0;
  double v0 = 0.0;
  double t_end = 0.0;
  std::vector<TrajectorySample> samples;
  std::vector<EventRecord> events;
  Termination termination = Termination::kHorizon;
  std::string diagnostic;
  std::size_t n_checks = 0;  // periodic-event predicate evaluations
};

/// Earliest root of `guard` in [a, b] given guard(a) < 0 <= guard(b):
/// bisection down to `tol`, returning the right end (where guard >= 0).
double locate_event(const std::function<double(double)>& guard, double a,
                    double b, double tol);

/// Runs the sampled closed loop from x0 under `policy`. The certificate's
/// sigma is replaced by the policy's sigma for guard evaluation.
Trajectory run_closed_loop(const ControlSystem& sys, const ClfCertificate& cert,
                           const TriggerPolicy& policy, const StateVector& x0,
                           const IntegratorConfig& config);

struct RunStats {
  std::size_t n_events = 0;
  std::optional<double> first_event_time;  // first t_n > 0
  std::optional<double> min_dwell;
  std::optional<double> max_dwell;
  /// (n_events - 1) / (t_last - t_0) over all recorded events.
  std::optional<double> mean_event_frequency;
  /// The same figures restricted to events from first_event_time on, i.e.
  /// once the held initial control is first refreshed. Need >= 3 events.
  std::optional<double> active_min_dwell;
  std::optional<double> active_max_dwell;
  std::optional<double> active_event_frequency;
};

/// Throws DomainError on a trajectory without events.
RunStats run_stats(const Trajectory& traj);

struct RateCertificateCheck {
  bool ok = true;
  std::size_t n_points = 0;
  std::size_t n_violations = 0;
  double worst_excess = -kInf;  // max of V - bound - slack over samples
  double worst_time = 0.0;
};

/// V(x(t)) <= Gamma^{-1}(Gamma(V(x0)) - sigma t) + slack_rel (1 + V(x0)) at
/// every recorded sample.
RateCertificateCheck check_rate_certificate(const Trajectory& traj,
                                            const EnergyTimeMap& map,
                                            double sigma,
                                            double slack_rel = 1e-6);

/// Largest increase V(t_{i+1}) - V(t_i) over consecutive samples.
double max_v_increase(const Trajectory& traj);

/// Header t,x1..xd,u1..um,V,W,event_flag; numbers in %.17g.
void write_csv(const Trajectory& traj, std::ostream& out);
/// Reads a trajectory CSV; events are rebuilt from rows with event_flag = 1.
Trajectory read_csv(std::istream& in);

}  // namespace clf_etc
