#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "clf_etc/dynamics.hpp"

namespace clf_etc {

/// Fires at the first zero of the guard W(x, u_n) + sigma gamma(V(x)).
struct EventTriggered {
  double sigma = 0.9;
};

/// Fires at t_n + tau(x(t_n)); nothing is monitored in between.
struct SelfTriggered {
  double sigma = 0.9;
  std::function<double(const StateVector&)> tau_fn;
};

/// Fixed period, or explicit strictly increasing instants (the first one is
/// the initial sample at t = 0 and may be omitted).
struct TimeTriggered {
  double period = 0.0;
  std::vector<double> instants;
};

/// Checks P(x(kh), u_n) at multiples of h and refreshes u only when P fails.
struct PeriodicEvent {
  double sigma = 0.9;
  double sigma_tilde = 0.95;
  double k_big = 2.0;
  double h = 0.0;
  double big_m = 1.0;  // M for the sublevel set of x0
};

using TriggerPolicy =
    std::variant<EventTriggered, SelfTriggered, TimeTriggered, PeriodicEvent>;

/// Throws ConfigError / DomainError when the variant's parameters are invalid.
void validate_policy(const TriggerPolicy& policy);
std::string policy_name(const TriggerPolicy& policy);
/// The sigma the policy enforces; time-triggered runs inherit `fallback`.
double policy_sigma(const TriggerPolicy& policy, double fallback);

enum class TriggerReason {
  kNone,
  kInitial,
  kGuardZero,
  kClock,
  kPredicateFalse,
  kEquilibriumFrozen,
};

std::string to_string(TriggerReason reason);

struct TriggerDecision {
  bool fire = false;
  double guard_value = 0.0;
  TriggerReason reason = TriggerReason::kNone;
};

/// g = W(x, u) + sigma gamma(V(x)) with sigma taken from the certificate.
double event_guard(const ClfCertificate& cert, const ControlSystem& sys,
                   const StateVector& x, const ControlVector& u);

/// W < -sigma_tilde gamma(V) and (|V'||F| + |F|^2) / (M |W|) <= K.
/// W == 0 makes the ratio infinite, so P is false.
bool predicate_p(const ClfCertificate& cert, const ControlSystem& sys,
                 double sigma_tilde, double k_big, double big_m,
                 const StateVector& x, const ControlVector& u);

/// Where the policy's clock stands after the last control update.
struct ClockState {
  std::size_t n = 0;          // index of the last event
  double t_last = 0.0;        // t_n
  StateVector x_last;         // x(t_n)
  std::size_t check_index = 0;  // periodic: k of the last check performed
  double equilibrium_level = 0.0;
};

/// The next instant at which the policy wants to be queried, or nullopt when
/// it monitors continuously (event-triggered) or its schedule is exhausted.
std::optional<double> next_query_time(const TriggerPolicy& policy,
                                      const ClockState& clock);

/// Decision at time t with the current state and held control. For the
/// clock-driven variants t is expected to be a value from next_query_time.
TriggerDecision next_decision(const TriggerPolicy& policy,
                              const ClfCertificate& cert,
                              const ControlSystem& sys,
                              const ClockState& clock, double t,
                              const StateVector& x, const ControlVector& u);

}  // namespace clf_etc
