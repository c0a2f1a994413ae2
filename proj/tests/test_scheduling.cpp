#include <doctest.h>

#include <cmath>

#include "clf_etc/errors.hpp"
#include "clf_etc/models.hpp"
#include "clf_etc/scheduling.hpp"
#include "support.hpp"

using namespace clf_etc;

namespace {

StateVector scalar(double v) { return StateVector::Constant(1, v); }

ClockState clock_at(std::size_t n, double t_last, const StateVector& x) {
  ClockState c;
  c.n = n;
  c.t_last = t_last;
  c.x_last = x;
  c.equilibrium_level = 1e-24;
  return c;
}

}  // namespace

TEST_SUITE("scheduling") {

TEST_CASE("a fresh sample leaves the guard at most -(1 - sigma) gamma(V)") {
  for (const char* name : {"acc", "homog2d", "zeno-polar", "relay1d"}) {
    const Model m = make_model(name);
    const ClfCertificate cert = m.certificate.with_sigma(0.9);
    for (const auto& x : testing::ball_points(21, m.system.state_dim(), m.check_radius, 200)) {
      const double g = event_guard(cert, m.system, x, cert.feedback(x));
      const double gv = cert.rate()(cert.value(x));
      CHECK(g <= -(1.0 - 0.9) * gv * (1.0 - 1e-9));
      CHECK(g < 0.0);
    }
  }
}

TEST_CASE("relay guard along the exact flow is -0.2 (1 - t)") {
  const Model m = relay_1d();
  const ClfCertificate cert = m.certificate.with_sigma(0.9);
  const ControlVector u = cert.feedback(scalar(1.0));
  for (double t : {0.0, 0.3, 0.7, 0.99}) {
    CHECK(event_guard(cert, m.system, scalar(1.0 - t), u) ==
          doctest::Approx(-0.2 * (1.0 - t)));
  }
}

TEST_CASE("predicate P holds right after a control update") {
  for (const char* name : {"acc", "homog2d"}) {
    const Model m = make_model(name);
    for (const auto& x : testing::ball_points(8, m.system.state_dim(), m.check_radius, 200)) {
      const double ratio = nondegeneracy_at(m.system, m.certificate, x).ratio;
      // With M at least the local ratio, any K > 1 passes the second conjunct.
      CHECK(predicate_p(m.certificate, m.system, 0.95, 1.5, ratio, x,
                        m.certificate.feedback(x)));
    }
  }
}

TEST_CASE("predicate P fails when W is not negative enough") {
  const Model m = relay_1d();
  CHECK_FALSE(predicate_p(m.certificate, m.system, 0.95, 2.0, 10.0, scalar(1.0),
                          ControlVector::Constant(1, 1.0)));
  CHECK_FALSE(predicate_p(m.certificate, m.system, 0.95, 2.0, 10.0, scalar(1.0),
                          ControlVector::Zero(1)));
}

TEST_CASE("predicate P treats ratio == K as true") {
  // x = 1, u = -1: |V'| = 2, |F| = 1, W = -2, so the ratio is 3 / (2 M).
  const Model m = relay_1d();
  const ControlVector u = ControlVector::Constant(1, -1.0);
  CHECK(predicate_p(m.certificate, m.system, 0.9, 1.5, 1.0, scalar(1.0), u));
  CHECK_FALSE(predicate_p(m.certificate, m.system, 0.9, std::nextafter(1.5, 0.0), 1.0,
                          scalar(1.0), u));
}

TEST_CASE("policy validation") {
  CHECK_NOTHROW(validate_policy(EventTriggered{0.9}));
  CHECK_THROWS_AS(validate_policy(EventTriggered{1.0}), DomainError);
  CHECK_THROWS_AS(validate_policy(EventTriggered{0.0}), DomainError);
  CHECK_THROWS_AS(validate_policy(SelfTriggered{0.9, {}}), ConfigError);
  CHECK_THROWS_AS(validate_policy(TimeTriggered{0.0, {}}), ConfigError);
  CHECK_THROWS_AS(validate_policy(TimeTriggered{0.0, {0.0, 0.5, 0.5}}), ConfigError);
  CHECK_NOTHROW(validate_policy(TimeTriggered{0.0, {0.0, 0.5, 0.7}}));
  CHECK_THROWS_AS(validate_policy(PeriodicEvent{0.9, 0.9, 2.0, 0.1, 1.0}), DomainError);
  CHECK_THROWS_AS(validate_policy(PeriodicEvent{0.9, 0.95, 1.0, 0.1, 1.0}), DomainError);
  CHECK_THROWS_AS(validate_policy(PeriodicEvent{0.9, 0.95, 2.0, 0.0, 1.0}), ConfigError);
  CHECK_NOTHROW(validate_policy(PeriodicEvent{0.9, 0.95, 2.0, 0.1, 1.0}));
  CHECK(policy_name(PeriodicEvent{}) == "periodic-event");
  CHECK(policy_sigma(TimeTriggered{0.1, {}}, 0.7) == 0.7);
  CHECK(policy_sigma(EventTriggered{0.6}, 0.7) == 0.6);
}

TEST_CASE("query clocks for each policy") {
  const StateVector x = scalar(1.0);
  CHECK_FALSE(next_query_time(EventTriggered{0.9}, clock_at(0, 0.0, x)).has_value());

  const SelfTriggered self{0.9, [](const StateVector&) { return 0.3; }};
  CHECK(*next_query_time(self, clock_at(0, 0.0, x)) == doctest::Approx(0.3));
  CHECK(*next_query_time(self, clock_at(1, 0.3, x)) == doctest::Approx(0.6));
  const SelfTriggered bad{0.9, [](const StateVector&) { return 0.0; }};
  CHECK_THROWS_AS(next_query_time(bad, clock_at(0, 0.0, x)), ConfigError);

  const TimeTriggered periodic{0.25, {}};
  CHECK(*next_query_time(periodic, clock_at(3, 0.75, x)) == doctest::Approx(1.0));
  const TimeTriggered listed{0.0, {0.0, 0.4, 1.1}};
  CHECK(*next_query_time(listed, clock_at(0, 0.0, x)) == doctest::Approx(0.4));
  CHECK(*next_query_time(listed, clock_at(1, 0.4, x)) == doctest::Approx(1.1));
  CHECK_FALSE(next_query_time(listed, clock_at(2, 1.1, x)).has_value());

  ClockState c = clock_at(0, 0.0, x);
  c.check_index = 4;
  CHECK(*next_query_time(PeriodicEvent{0.9, 0.95, 2.0, 0.1, 1.0}, c) ==
        doctest::Approx(0.5));
}

TEST_CASE("decisions fire on the variant's rule") {
  const Model m = relay_1d();
  const ClfCertificate cert = m.certificate.with_sigma(0.9);
  const ControlVector u = cert.feedback(scalar(1.0));
  const ClockState c = clock_at(0, 0.0, scalar(1.0));

  const TriggerDecision inside = next_decision(EventTriggered{0.9}, cert, m.system, c, 0.5,
                                               scalar(0.5), u);
  CHECK_FALSE(inside.fire);
  CHECK(inside.guard_value < 0.0);
  const TriggerDecision crossed = next_decision(EventTriggered{0.9}, cert, m.system, c, 1.2,
                                                scalar(-0.2), u);
  CHECK(crossed.fire);
  CHECK(crossed.reason == TriggerReason::kGuardZero);

  const SelfTriggered self{0.9, [](const StateVector&) { return 0.3; }};
  CHECK_FALSE(next_decision(self, cert, m.system, c, 0.2, scalar(0.8), u).fire);
  CHECK(next_decision(self, cert, m.system, c, 0.3, scalar(0.7), u).reason ==
        TriggerReason::kClock);

  const PeriodicEvent pe{0.9, 0.95, 2.0, 0.1, 1.0};
  CHECK_FALSE(next_decision(pe, cert, m.system, c, 0.1, scalar(0.9), u).fire);
  const TriggerDecision fail = next_decision(pe, cert, m.system, c, 1.1, scalar(-0.1), u);
  CHECK(fail.fire);
  CHECK(fail.reason == TriggerReason::kPredicateFalse);

  const ClockState frozen = clock_at(1, 1.0, scalar(0.0));
  const TriggerDecision eq = next_decision(EventTriggered{0.9}, cert, m.system, frozen, 2.0,
                                           scalar(0.0), ControlVector::Zero(1));
  CHECK_FALSE(eq.fire);
  CHECK(eq.reason == TriggerReason::kEquilibriumFrozen);
}

}  // TEST_SUITE
