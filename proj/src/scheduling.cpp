#include "clf_etc/scheduling.hpp"

#include <cmath>

#include "clf_etc/errors.hpp"

namespace clf_etc {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_sigma(double sigma) {
  if (!(sigma > 0.0 && sigma < 1.0)) {
    throw DomainError("sigma must lie in (0, 1)");
  }
}

}  // namespace

void validate_policy(const TriggerPolicy& policy) {
  std::visit(
      Overloaded{
          [](const EventTriggered& p) { check_sigma(p.sigma); },
          [](const SelfTriggered& p) {
            check_sigma(p.sigma);
            if (!p.tau_fn) throw ConfigError("self-triggered policy needs tau");
          },
          [](const TimeTriggered& p) {
            if (p.instants.empty()) {
              if (!(p.period > 0.0) || !std::isfinite(p.period)) {
                throw ConfigError("time-triggered period must be positive");
              }
              return;
            }
            for (std::size_t i = 0; i < p.instants.size(); ++i) {
              if (!std::isfinite(p.instants[i]) || p.instants[i] < 0.0 ||
                  (i > 0 && !(p.instants[i] > p.instants[i - 1]))) {
                throw ConfigError(
                    "time-triggered instants must be finite, non-negative and "
                    "strictly increasing");
              }
            }
          },
          [](const PeriodicEvent& p) {
            check_sigma(p.sigma);
            if (!(p.sigma_tilde > p.sigma && p.sigma_tilde < 1.0)) {
              throw DomainError("sigma_tilde must lie in (sigma, 1)");
            }
            if (!(p.k_big > 1.0)) throw DomainError("K must exceed 1");
            if (!(p.h > 0.0) || !std::isfinite(p.h)) {
              throw ConfigError("periodic check interval h must be positive");
            }
            if (!(p.big_m > 0.0) || !std::isfinite(p.big_m)) {
              throw DomainError("M must be positive and finite");
            }
          },
      },
      policy);
}

std::string policy_name(const TriggerPolicy& policy) {
  return std::visit(Overloaded{
                        [](const EventTriggered&) { return "event"; },
                        [](const SelfTriggered&) { return "self"; },
                        [](const TimeTriggered&) { return "time"; },
                        [](const PeriodicEvent&) { return "periodic-event"; },
                    },
                    policy);
}

double policy_sigma(const TriggerPolicy& policy, double fallback) {
  return std::visit(Overloaded{
                        [](const EventTriggered& p) { return p.sigma; },
                        [](const SelfTriggered& p) { return p.sigma; },
                        [fallback](const TimeTriggered&) { return fallback; },
                        [](const PeriodicEvent& p) { return p.sigma; },
                    },
                    policy);
}

std::string to_string(TriggerReason reason) {
  switch (reason) {
    case TriggerReason::kNone: return "none";
    case TriggerReason::kInitial: return "initial";
    case TriggerReason::kGuardZero: return "guard_zero";
    case TriggerReason::kClock: return "clock";
    case TriggerReason::kPredicateFalse: return "predicate_false";
    case TriggerReason::kEquilibriumFrozen: return "equilibrium_frozen";
  }
  return "unknown";
}

double event_guard(const ClfCertificate& cert, const ControlSystem& sys,
                   const StateVector& x, const ControlVector& u) {
  return lyapunov_derivative(cert, sys, x, u) +
         cert.sigma() * cert.rate()(cert.value(x));
}

bool predicate_p(const ClfCertificate& cert, const ControlSystem& sys,
                 double sigma_tilde, double k_big, double big_m,
                 const StateVector& x, const ControlVector& u) {
  const StateVector f = sys(x, u);
  const Gradient grad = cert.gradient(x);
  const double w = grad.dot(f.transpose());
  if (!(w < -sigma_tilde * cert.rate()(cert.value(x)))) return false;
  const double fn = f.norm();
  const double lhs = grad.norm() * fn + fn * fn;
  return lhs <= k_big * big_m * std::abs(w);
}

std::optional<double> next_query_time(const TriggerPolicy& policy,
                                      const ClockState& clock) {
  return std::visit(
      Overloaded{
          [](const EventTriggered&) -> std::optional<double> {
            return std::nullopt;
          },
          [&clock](const SelfTriggered& p) -> std::optional<double> {
            const double tau = p.tau_fn(clock.x_last);
            if (!(tau > 0.0) || !std::isfinite(tau)) {
              throw ConfigError("self-triggered tau must be positive and finite");
            }
            return clock.t_last + tau;
          },
          [&clock](const TimeTriggered& p) -> std::optional<double> {
            if (p.instants.empty()) {
              // Multiples of the period, so no drift accumulates.
              return static_cast<double>(clock.n + 1) * p.period;
            }
            for (double s : p.instants) {
              if (s > clock.t_last) return s;
            }
            return std::nullopt;
          },
          [&clock](const PeriodicEvent& p) -> std::optional<double> {
            return static_cast<double>(clock.check_index + 1) * p.h;
          },
      },
      policy);
}

TriggerDecision next_decision(const TriggerPolicy& policy,
                              const ClfCertificate& cert,
                              const ControlSystem& sys,
                              const ClockState& clock, double t,
                              const StateVector& x, const ControlVector& u) {
  TriggerDecision d;
  if (clock.x_last.size() > 0 &&
      cert.value(clock.x_last) <= clock.equilibrium_level) {
    d.reason = TriggerReason::kEquilibriumFrozen;
    return d;
  }
  d.guard_value = event_guard(cert, sys, x, u);
  std::visit(
      Overloaded{
          [&](const EventTriggered&) {
            d.fire = d.guard_value >= 0.0;
            d.reason = d.fire ? TriggerReason::kGuardZero : TriggerReason::kNone;
          },
          [&](const SelfTriggered&) {
            const auto due = next_query_time(policy, clock);
            d.fire = due && t >= *due;
            d.reason = d.fire ? TriggerReason::kClock : TriggerReason::kNone;
          },
          [&](const TimeTriggered&) {
            const auto due = next_query_time(policy, clock);
            d.fire = due && t >= *due;
            d.reason = d.fire ? TriggerReason::kClock : TriggerReason::kNone;
          },
          [&](const PeriodicEvent& p) {
            d.fire = !predicate_p(cert, sys, p.sigma_tilde, p.k_big, p.big_m, x, u);
            d.reason =
                d.fire ? TriggerReason::kPredicateFalse : TriggerReason::kNone;
          },
      },
      policy);
  return d;
}

}  // namespace clf_etc
