#include <doctest.h>

#include <cmath>

#include "clf_etc/certificates.hpp"
#include "clf_etc/errors.hpp"
#include "clf_etc/models.hpp"
#include "clf_etc/sampling.hpp"
#include "support.hpp"

using namespace clf_etc;

namespace {

ClfCertificate half_norm_clf(int dim) {
  return ClfCertificate(
      [](const StateVector& x) { return 0.5 * x.squaredNorm(); },
      [](const StateVector& x) -> Gradient { return x.transpose(); },
      EnergyTimeMap(RateFunction::linear(1.0)),
      [dim](const StateVector&) { return ControlVector::Zero(dim); }, 0.9);
}

// Open-loop ACC matrix in backstepping coordinates with constant lag tau.
// Row three expands k^2 (x2 - k x1) + g (2k x2 - k^2 x1 - x3).
Eigen::Matrix3d acc_matrix(double k, double tau) {
  const double g = 1.0 / tau - 2.0 * k;
  Eigen::Matrix3d a;
  a << -k, 1.0, 0.0,
       0.0, -k, 1.0,
       -k * k * k - g * k * k, k * k + 2.0 * k * g, -g;
  return a;
}

}  // namespace

TEST_SUITE("certificates") {

TEST_CASE("box of a Euclidean ball sublevel set") {
  const ClfCertificate cert = half_norm_clf(3);
  StateVector anchor(3);
  anchor << 2.0, 0.0, 0.0;  // V = 2, B = ball of radius 2
  const SublevelRegion r = bound_sublevel_box(cert, anchor);
  CHECK(r.level == doctest::Approx(2.0));
  for (int i = 0; i < 3; ++i) {
    CHECK(r.upper[i] == doctest::Approx(2.0 * 1.05).epsilon(1e-9));
    CHECK(r.lower[i] == doctest::Approx(-2.0 * 1.05).epsilon(1e-9));
  }
}

TEST_CASE("box of the ACC sublevel set at level 50 has half-width 10 (+5%)") {
  const Model m = acc_backstepping();
  StateVector anchor(3);
  anchor << 0.0, 10.0, 0.0;
  const SublevelRegion r = bound_sublevel_box(m.certificate, anchor);
  CHECK(r.level == doctest::Approx(50.0));
  CHECK(r.scale() == doctest::Approx(10.5).epsilon(1e-9));
}

TEST_CASE("the origin gives a degenerate region with zero constants") {
  const Model m = acc_backstepping();
  const SublevelRegion r = bound_sublevel_box(m.certificate, StateVector::Zero(3));
  CHECK(r.degenerate());
  CHECK(r.lower == StateVector::Zero(3));
  CHECK(r.upper == StateVector::Zero(3));
  CHECK(estimate_kappa(m.system, m.certificate, r).value == 0.0);
  CHECK(estimate_big_m(m.system, m.certificate, r).value > 0.0);
}

TEST_CASE("the box covers every sampled point of the sublevel set") {
  for (const char* name : {"acc", "homog2d"}) {
    const Model m = make_model(name);
    const SublevelRegion r = bound_sublevel_box(m.certificate, m.default_x0);
    const int d = m.system.state_dim();
    std::mt19937_64 rng(5);
    for (int i = 0; i < 2000; ++i) {
      const StateVector dir = testing::ball_point(rng, d, 1.0).normalized();
      // Walk out along the ray to the level set, then test just inside it.
      double lo = 0.0, hi = 1.0;
      while (m.certificate.value(hi * dir) <= r.level) hi *= 2.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (m.certificate.value(mid * dir) <= r.level ? lo : hi) = mid;
      }
      const StateVector edge = lo * dir;
      CHECK(((edge.array() > r.lower.array()) && (edge.array() < r.upper.array())).all());
    }
  }
}

TEST_CASE("a non-proper V is reported as a properness violation") {
  const ClfCertificate flat(
      [](const StateVector& x) { return std::min(x.squaredNorm(), 1.0); },
      [](const StateVector& x) -> Gradient {
        return x.squaredNorm() < 1.0 ? Gradient(2.0 * x.transpose()) : Gradient::Zero(x.size());
      },
      EnergyTimeMap(RateFunction::linear(1.0)),
      [](const StateVector&) { return ControlVector::Zero(1); }, 0.9);
  StateVector anchor(2);
  anchor << 2.0, 0.0;  // V saturates at its level, so no ray ever leaves the set
  CHECK_THROWS_AS(bound_sublevel_box(flat, anchor), AssumptionViolation);
}

TEST_CASE("mu follows its formula and dominates sqrt(e) kappa and sqrt(e) nu") {
  const double se = std::sqrt(std::exp(1.0));
  for (double kappa : {0.0, 0.3, 1.0, 6.1}) {
    for (double nu : {0.0, 0.5, 1.25, 4.0}) {
      const double mu = compute_mu(kappa, nu);
      CHECK(mu == doctest::Approx(se * std::max(kappa, nu * (1.0 + kappa * se))));
      CHECK(mu >= se * kappa);
      CHECK(mu >= se * nu);
    }
  }
  CHECK_THROWS_AS(compute_mu(-1.0, 0.0), DomainError);
  const CertificateConstants c =
      CertificateConstants::make(2.0, 1.0, 3.0, 0.0, ConstantsProvenance::kClosedForm);
  CHECK(c.mu == compute_mu(2.0, 1.0));
  CHECK_THROWS_AS(CertificateConstants::make(1.0, 1.0, 0.0, 0.0,
                                             ConstantsProvenance::kClosedForm),
                  DomainError);
}

TEST_CASE("estimates are bitwise reproducible for a fixed seed") {
  const Model m = homogeneous_planar();
  const SublevelRegion r = bound_sublevel_box(m.certificate, m.default_x0);
  SamplingOptions o;
  o.n_samples = 400;
  o.seed = 17;
  const CertificateConstants a = estimate_constants(m.system, m.certificate, r, o);
  const CertificateConstants b = estimate_constants(m.system, m.certificate, r, o);
  CHECK(a.kappa == b.kappa);
  CHECK(a.nu == b.nu);
  CHECK(a.big_m == b.big_m);
  CHECK(a.mu == b.mu);
}

TEST_CASE("supremum estimates only grow when samples are added") {
  for (const char* name : {"acc", "homog2d"}) {
    const Model m = make_model(name);
    const SublevelRegion r = bound_sublevel_box(m.certificate, m.default_x0);
    double prev_k = 0.0, prev_n = 0.0, prev_m = 0.0;
    for (std::size_t n : {16, 64, 256, 1024}) {
      SamplingOptions o;
      o.n_samples = n;
      o.check_divergence = false;
      const double k = estimate_kappa(m.system, m.certificate, r, o).value;
      const double nu = estimate_nu(m.certificate, r, o).value;
      const double mm = estimate_big_m(m.system, m.certificate, r, o).value;
      CHECK(k >= prev_k);
      CHECK(nu >= prev_n);
      CHECK(mm >= prev_m);
      prev_k = k;
      prev_n = nu;
      prev_m = mm;
    }
  }
}

TEST_CASE("kappa of frozen-input linear dynamics approaches the spectral norm") {
  const AccParams p;
  const Model m = acc_backstepping(p);
  const double norm = acc_matrix(p.k, p.tau).jacobiSvd().singularValues()(0);
  const SublevelRegion r = bound_sublevel_box(m.certificate, m.default_x0);
  SamplingOptions o;
  o.n_samples = 4096;
  const EstimationReport k = estimate_kappa(m.system, m.certificate, r, o);
  CHECK(k.raw_max <= norm * (1.0 + 1e-6));
  CHECK(k.raw_max >= norm * (1.0 - 1e-6));
  CHECK(k.value == doctest::Approx(1.25 * k.raw_max));
}

TEST_CASE("nu of V = |x|^2 / 2 is one") {
  const Model m = acc_backstepping();
  const SublevelRegion r = bound_sublevel_box(m.certificate, m.default_x0);
  const EstimationReport nu = estimate_nu(m.certificate, r);
  CHECK(nu.raw_max == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("a finite M satisfies both equivalent non-degeneracy conditions") {
  for (const char* name : {"acc", "homog2d"}) {
    const Model m = make_model(name);
    const SublevelRegion r = bound_sublevel_box(m.certificate, m.default_x0);
    SamplingOptions o;
    o.n_samples = 1024;
    const EstimationReport big_m = estimate_big_m(m.system, m.certificate, r, o);
    REQUIRE(std::isfinite(big_m.value));
    for (const auto& x : sample_sublevel(m.certificate, r, 1024, o.seed)) {
      if (m.certificate.value(x) < 1e-12 * r.level) continue;
      const NonDegeneracySample s = nondegeneracy_at(m.system, m.certificate, x);
      CHECK(s.speed_ratio <= big_m.value);
      CHECK(big_m.value * s.cos_theta <= -1.0);
    }
  }
}

TEST_CASE("diverging non-degeneracy ratio is detected near the origin") {
  for (const char* name : {"zeno-polar", "relay1d"}) {
    const Model m = make_model(name);
    CHECK(m.expected_status == AssumptionStatus::kViolatesNondegeneracy);
    const SublevelRegion r = bound_sublevel_box(m.certificate, m.default_x0);
    try {
      estimate_big_m(m.system, m.certificate, r);
      FAIL("expected a non-degeneracy violation for " << name);
    } catch (const AssumptionViolation& e) {
      CHECK(e.assumption() == "non-degeneracy");
    }
  }
}

TEST_CASE("rho is the largest decrease rate of gamma") {
  const RateFunction wavy = RateFunction::custom(
      [](double v) { return 1.0 + 0.5 * std::sin(v); },
      [](double v) { return 0.5 * std::cos(v); }, false);
  CHECK(estimate_rho(wavy, 4.0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(estimate_rho(wavy, 1.0) == 0.0);  // gamma increasing on [0, 1]
  CHECK(estimate_rho(RateFunction::linear(2.0), 10.0) == 0.0);
  const RateFunction no_derivative = RateFunction::custom(
      [](double v) { return 1.0 + v; }, std::nullopt, false);
  CHECK_THROWS_AS(estimate_rho(no_derivative, 1.0), ConfigError);
}

TEST_CASE("sublevel samples stay in the set and start at the anchor") {
  const Model m = homogeneous_planar();
  const SublevelRegion r = bound_sublevel_box(m.certificate, m.default_x0);
  const auto pts = sample_sublevel(m.certificate, r, 300, 4);
  REQUIRE(pts.size() == 300);
  CHECK(pts.front() == m.default_x0);
  for (const auto& x : pts) CHECK(m.certificate.value(x) <= r.level);
  const auto more = sample_sublevel(m.certificate, r, 600, 4);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(more[i] == pts[i]);
}

TEST_CASE("parallel_for visits every index once and reports the first failure") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; }, 4);
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_WITH(parallel_for(50,
                                 [](std::size_t i) {
                                   if (i % 7 == 3) throw std::runtime_error(std::to_string(i));
                                 },
                                 4),
                    "3");
}

}  // TEST_SUITE
