#include <doctest.h>

#include <cmath>
#include <vector>

#include "clf_etc/dynamics.hpp"
#include "clf_etc/errors.hpp"
#include "clf_etc/models.hpp"
#include "support.hpp"

using namespace clf_etc;

namespace {

// Gamma(s) = int_1^s dv / (c v^p), written out independently of the library.
double gamma_big_oracle(double c, double p, double s) {
  if (p == 1.0) return std::log(s) / c;
  return (std::pow(s, 1.0 - p) - 1.0) / (c * (1.0 - p));
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  }
  return out;
}

RateFunction custom_power(double c, double p) {
  return RateFunction::custom([c, p](double v) { return c * std::pow(v, p); },
                              [c, p](double v) { return c * p * std::pow(v, p - 1.0); },
                              true);
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("closed-form energy-time maps match the antiderivative") {
  const struct { double c, p; } rates[] = {{2.0, 1.0}, {0.02, 1.0}, {1.0, 2.0},
                                           {0.5, 2.0}, {2.0, 0.5}, {3.0, 1.5}};
  for (const auto& r : rates) {
    const EnergyTimeMap map(RateFunction::power(r.c, r.p));
    for (double s : log_grid(1e-4, 1e4, 41)) {
      const double expect = gamma_big_oracle(r.c, r.p, s);
      CHECK(gamma_big(map, s) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("energy-time map is strictly increasing with Gamma(1) = 0") {
  for (const auto& rate : {RateFunction::linear(1.0), RateFunction::power(1.0, 2.0),
                           RateFunction::power(2.0, 0.5), custom_power(1.0, 2.0)}) {
    const EnergyTimeMap map(rate);
    CHECK(gamma_big(map, 1.0) == doctest::Approx(0.0).scale(1.0));
    double prev = -kInf;
    for (double s : log_grid(1e-3, 1e3, 60)) {
      const double g = gamma_big(map, s);
      CHECK(g > prev);
      prev = g;
    }
  }
}

TEST_CASE("inverse round trip on a log grid") {
  for (const auto& rate : {RateFunction::linear(0.02), RateFunction::power(1.0, 2.0),
                           RateFunction::power(2.0, 0.5), custom_power(1.0, 2.0),
                           custom_power(2.0, 0.5), custom_power(0.7, 1.0)}) {
    const EnergyTimeMap map(rate);
    for (double s : log_grid(1e-3, 1e3, 31)) {
      const double back = gamma_big_inverse(map, gamma_big(map, s));
      CHECK(std::abs(back - s) <= 1e-8 * std::max(1.0, s));
    }
  }
}

TEST_CASE("quadrature path agrees with closed forms for power and linear rates") {
  const struct { double c, p; } rates[] = {{2.0, 1.0}, {1.0, 2.0}, {0.5, 2.0}, {2.0, 0.5}};
  for (const auto& r : rates) {
    const EnergyTimeMap closed(RateFunction::power(r.c, r.p));
    const EnergyTimeMap numeric(custom_power(r.c, r.p));
    for (double s : log_grid(1e-3, 1e3, 25)) {
      if (s == 1.0) continue;
      const double a = gamma_big(closed, s);
      const double b = gamma_big(numeric, s);
      CHECK(std::abs(a - b) <= 1e-8 * std::abs(a));
    }
  }
}

TEST_CASE("inverse is zero below the finite lower limit") {
  // gamma(v) = 2 sqrt(v): Gamma(s) = sqrt(s) - 1, lower limit -1.
  const EnergyTimeMap map(RateFunction::power(2.0, 0.5));
  CHECK(map.lower_limit() == doctest::Approx(-1.0));
  CHECK(gamma_big_inverse(map, -1.0) == 0.0);
  CHECK(gamma_big_inverse(map, -5.0) == 0.0);
  CHECK(gamma_big_inverse(map, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("energy-time map rejects non-positive arguments") {
  const EnergyTimeMap map(RateFunction::linear(1.0));
  CHECK_THROWS_AS(gamma_big(map, 0.0), DomainError);
  CHECK_THROWS_AS(gamma_big(map, -1.0), DomainError);
  CHECK_THROWS_AS(RateFunction::linear(0.0), DomainError);
}

TEST_CASE("convergence bound starts at v0 and never increases") {
  for (const auto& rate : {RateFunction::linear(0.02), RateFunction::power(1.0, 2.0),
                           RateFunction::power(2.0, 0.5), custom_power(1.0, 2.0)}) {
    const EnergyTimeMap map(rate);
    for (double v0 : {1e-3, 0.085, 1.0, 150.0}) {
      CHECK(convergence_bound(map, 0.9, v0, 0.0) == doctest::Approx(v0).epsilon(1e-10));
      double prev = v0 * (1.0 + 1e-10);
      for (int i = 0; i <= 50; ++i) {
        const double b = convergence_bound(map, 0.9, v0, 0.2 * i);
        CHECK(b <= prev);
        CHECK(b >= 0.0);
        prev = b;
      }
    }
    CHECK(convergence_bound(map, 0.9, 0.0, 1.0) == 0.0);
  }
}

TEST_CASE("quadratic rate bound has the closed form 1 / (1/V0 + sigma c t)") {
  for (double c : {1.0, 0.5}) {
    const EnergyTimeMap map(RateFunction::power(c, 2.0));
    const double v0 = 0.085;
    for (double t : {0.0, 1.0, 5.26, 50.0, 200.0}) {
      const double expect = 1.0 / (1.0 / v0 + 0.9 * c * t);
      CHECK(convergence_bound(map, 0.9, v0, t) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("finite-time rate reaches zero at Gamma(V0) - lower limit") {
  // Relay with sigma = 1 follows the exact flow x = 1 - t, V = (1 - t)^2.
  const EnergyTimeMap map(RateFunction::power(2.0, 0.5));
  for (double t : {0.0, 0.25, 0.5, 0.9}) {
    CHECK(convergence_bound(map, 1.0, 1.0, t) ==
          doctest::Approx((1.0 - t) * (1.0 - t)).epsilon(1e-12));
  }
  CHECK(convergence_bound(map, 1.0, 1.0, 1.0) == 0.0);
  CHECK(convergence_bound(map, 1.0, 1.0, 3.0) == 0.0);
}

TEST_CASE("ACC certificate has no pointwise violations and the closed-form W") {
  const Model m = acc_backstepping();
  const double k = 1.01;
  const auto pts = testing::ball_points(11, 3, 20.0, 1000);
  const ClfReport rep = verify_clf_pointwise(m.certificate, m.system, pts);
  CHECK(rep.ok());
  CHECK(rep.n_samples == 1000);
  for (const auto& x : pts) {
    const double w = lyapunov_derivative(m.certificate, m.system, x, m.certificate.feedback(x));
    const double spread = (x[0] - x[1]) * (x[0] - x[1]) + (x[0] - x[2]) * (x[0] - x[2]) +
                          (x[1] - x[2]) * (x[1] - x[2]);
    const double expect = -2.0 * (k - 1.0) * 0.5 * x.squaredNorm() - 0.5 * spread;
    CHECK(w == doctest::Approx(expect).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("a wrong feedback shows up as a violation, not an error") {
  const Model relay = relay_1d();
  const ClfCertificate zero_feedback(
      [](const StateVector& x) { return x[0] * x[0]; },
      [](const StateVector& x) -> Gradient { return Gradient::Constant(1, 2.0 * x[0]); },
      EnergyTimeMap(RateFunction::power(2.0, 0.5)),
      [](const StateVector&) { return ControlVector::Zero(1); }, 0.9);
  const std::vector<StateVector> pts = {StateVector::Constant(1, 1.0)};
  const ClfReport rep = verify_clf_pointwise(zero_feedback, relay.system, pts);
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0].margin == doctest::Approx(2.0));

  const std::vector<StateVector> origin = {StateVector::Zero(1)};
  const ClfReport skip = verify_clf_pointwise(relay.certificate, relay.system, origin);
  CHECK(skip.n_skipped == 1);
  CHECK(skip.ok());
}

TEST_CASE("built-in gradients agree with central differences") {
  for (const auto& name : model_names()) {
    const Model m = make_model(name);
    const auto pts = testing::ball_points(3, m.system.state_dim(), m.check_radius, 500);
    CHECK_MESSAGE(gradient_consistency(m.certificate, pts) <= 1e-5, name);
  }
}

TEST_CASE("rate checks catch a wrong derivative and a false monotone flag") {
  const RateFunction wrong = RateFunction::custom(
      [](double v) { return v * v; }, [](double v) { return 3.0 * v; }, true);
  CHECK_FALSE(check_rate_function(wrong, 2.0).derivative_ok);
  const RateFunction wavy = RateFunction::custom(
      [](double v) { return 1.0 + 0.5 * std::sin(v); }, std::nullopt, true);
  CHECK_FALSE(check_rate_function(wavy, 6.0).monotone_ok);
  const RateCheck good = check_rate_function(RateFunction::power(1.0, 2.0), 2.0);
  CHECK(good.positive);
  CHECK(good.monotone_ok);
  CHECK(good.derivative_ok);
}

TEST_CASE("system evaluation checks dimensions and stays deterministic") {
  const Model m = acc_backstepping();
  CHECK_THROWS_AS(m.system(StateVector::Zero(2), ControlVector::Zero(1)), DimensionError);
  CHECK_THROWS_AS(m.system(StateVector::Zero(3), ControlVector::Zero(2)), DimensionError);
  const StateVector x = StateVector::LinSpaced(3, -1.0, 2.0);
  const ControlVector u = m.certificate.feedback(x);
  const StateVector a = m.system(x, u);
  const StateVector b = m.system(x, u);
  CHECK(a == b);
  for (const auto& name : model_names()) {
    const Model mm = make_model(name);
    const StateVector z = StateVector::Zero(mm.system.state_dim());
    CHECK(mm.system(z, mm.certificate.feedback(z)).norm() == 0.0);
  }
}

}  // TEST_SUITE
