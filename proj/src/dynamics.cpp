#include "clf_etc/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "clf_etc/errors.hpp"
#include "clf_etc/quadrature.hpp"

namespace clf_etc {

ControlSystem::ControlSystem(int state_dim, int input_dim, Rhs rhs)
    : state_dim_(state_dim), input_dim_(input_dim), rhs_(std::move(rhs)) {
  if (state_dim <= 0 || input_dim <= 0) {
    throw DimensionError("ControlSystem: dimensions must be positive");
  }
  if (!rhs_) throw ConfigError("ControlSystem: empty right-hand side");
}

StateVector ControlSystem::operator()(const StateVector& x,
                                      const ControlVector& u) const {
  if (x.size() != state_dim_ || u.size() != input_dim_) {
    std::ostringstream msg;
    msg << "ControlSystem: expected (x, u) of sizes (" << state_dim_ << ", "
        << input_dim_ << "), got (" << x.size() << ", " << u.size() << ")";
    throw DimensionError(msg.str());
  }
  return rhs_(x, u);
}

// ---------------------------------------------------------------------------
// RateFunction

RateFunction RateFunction::linear(double gain) {
  if (!(gain > 0.0) || !std::isfinite(gain)) {
    throw DomainError("linear rate: gain must be positive and finite");
  }
  RateFunction r;
  r.form_ = RateForm::kLinear;
  r.gain_ = gain;
  r.exponent_ = 1.0;
  r.gamma_ = [gain](double v) { return gain * v; };
  r.gamma_prime_ = [gain](double) { return gain; };
  r.monotone_ = true;
  return r;
}

RateFunction RateFunction::power(double gain, double exponent) {
  if (!(gain > 0.0) || !std::isfinite(gain)) {
    throw DomainError("power rate: gain must be positive and finite");
  }
  if (!(exponent > 0.0) || !std::isfinite(exponent)) {
    throw DomainError("power rate: exponent must be positive and finite");
  }
  if (exponent == 1.0) return linear(gain);
  RateFunction r;
  r.form_ = RateForm::kPower;
  r.gain_ = gain;
  r.exponent_ = exponent;
  r.gamma_ = [gain, exponent](double v) { return gain * std::pow(v, exponent); };
  r.gamma_prime_ = [gain, exponent](double v) {
    return gain * exponent * std::pow(v, exponent - 1.0);
  };
  r.monotone_ = true;
  return r;
}

RateFunction RateFunction::custom(ScalarFn gamma,
                                  std::optional<ScalarFn> gamma_prime,
                                  bool monotone_nondecreasing) {
  if (!gamma) throw ConfigError("custom rate: gamma is empty");
  RateFunction r;
  r.form_ = RateForm::kCustom;
  r.gamma_ = std::move(gamma);
  if (gamma_prime) r.gamma_prime_ = std::move(*gamma_prime);
  r.monotone_ = monotone_nondecreasing;
  return r;
}

double RateFunction::operator()(double v) const { return gamma_(v); }

double RateFunction::derivative(double v) const {
  if (!gamma_prime_) {
    throw ConfigError("rate function has no derivative");
  }
  return gamma_prime_(v);
}

std::string RateFunction::describe() const {
  std::ostringstream out;
  out.precision(17);
  switch (form_) {
    case RateForm::kLinear:
      out << "linear(gain=" << gain_ << ")";
      break;
    case RateForm::kPower:
      out << "power(gain=" << gain_ << ", exponent=" << exponent_ << ")";
      break;
    case RateForm::kCustom:
      out << "custom";
      break;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Energy-time map

EnergyTimeMap::EnergyTimeMap(RateFunction rate, std::optional<double> lower,
                             std::optional<double> upper)
    : rate_(std::move(rate)), lower_(-kInf), upper_(kInf) {
  switch (rate_.form()) {
    case RateForm::kLinear:
      break;
    case RateForm::kPower: {
      const double bound = 1.0 / (rate_.gain() * (rate_.exponent() - 1.0));
      if (rate_.exponent() > 1.0) {
        upper_ = bound;
      } else {
        lower_ = bound;
      }
      break;
    }
    case RateForm::kCustom:
      if (lower) lower_ = *lower;
      if (upper) upper_ = *upper;
      if (!(lower_ < 0.0) || !(upper_ > 0.0)) {
        throw DomainError("energy-time map: need lower < 0 < upper");
      }
      break;
  }
}

double gamma_big(const EnergyTimeMap& map, double s) {
  if (!(s > 0.0)) throw DomainError("Gamma(s) requires s > 0");
  if (s == 1.0) return 0.0;
  const RateFunction& rate = map.rate();
  switch (rate.form()) {
    case RateForm::kLinear:
      return std::log(s) / rate.gain();
    case RateForm::kPower: {
      const double p = 1.0 - rate.exponent();
      return std::expm1(p * std::log(s)) / (rate.gain() * p);
    }
    case RateForm::kCustom:
      break;
  }
  const auto integrand = [&rate](double v) { return 1.0 / rate(v); };
  const QuadratureResult q = integrate_adaptive(integrand, 1.0, s, 1e-12);
  if (!std::isfinite(q.value)) {
    throw DomainError("Gamma(s): quadrature diverged");
  }
  return q.value;
}

double gamma_big_inverse(const EnergyTimeMap& map, double r) {
  if (std::isnan(r)) throw DomainError("Gamma^{-1}: NaN argument");
  if (r >= map.upper_limit()) {
    throw DomainError("Gamma^{-1}(r) requires r below the upper limit");
  }
  if (r <= map.lower_limit()) return 0.0;
  if (r == 0.0) return 1.0;

  const RateFunction& rate = map.rate();
  switch (rate.form()) {
    case RateForm::kLinear:
      return std::exp(rate.gain() * r);
    case RateForm::kPower: {
      const double p = 1.0 - rate.exponent();
      return std::exp(std::log1p(rate.gain() * p * r) / p);
    }
    case RateForm::kCustom:
      break;
  }

  // Gamma is strictly increasing: grow a bracket around the root, then
  // bisect (geometrically while the bracket spans orders of magnitude).
  double lo = 1.0;
  double hi = 1.0;
  if (r > 0.0) {
    hi = 2.0;
    while (gamma_big(map, hi) < r) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e300) {
        throw DomainError("Gamma^{-1}(r): r exceeds the range of Gamma");
      }
    }
  } else {
    lo = 0.5;
    while (gamma_big(map, lo) > r) {
      hi = lo;
      lo *= 0.5;
      if (lo < 1e-300) return 0.0;  // r lies at or below Gamma(0+)
    }
  }
  for (int it = 0; it < 400 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = hi > 4.0 * lo ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    if (gamma_big(map, mid) < r) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double convergence_bound(const EnergyTimeMap& map, double sigma, double v0,
                         double t) {
  if (v0 < 0.0 || std::isnan(v0)) {
    throw DomainError("convergence bound: V(x0) must be non-negative");
  }
  if (t < 0.0 || std::isnan(t)) {
    throw DomainError("convergence bound: t must be non-negative");
  }
  if (v0 == 0.0) return 0.0;
  if (t == 0.0) return v0;
  const double r = gamma_big(map, v0) - sigma * t;
  if (r <= map.lower_limit()) return 0.0;
  return gamma_big_inverse(map, r);
}

// ---------------------------------------------------------------------------
// ClfCertificate

ClfCertificate::ClfCertificate(ValueFn value, GradientFn gradient,
                               EnergyTimeMap energy, FeedbackFn feedback,
                               double sigma)
    : value_(std::move(value)),
      gradient_(std::move(gradient)),
      energy_(std::move(energy)),
      feedback_(std::move(feedback)),
      sigma_(sigma) {
  if (!value_ || !gradient_ || !feedback_) {
    throw ConfigError("ClfCertificate: value, gradient and feedback required");
  }
  if (!(sigma > 0.0 && sigma < 1.0)) {
    throw DomainError("ClfCertificate: sigma must lie in (0, 1)");
  }
}

ClfCertificate ClfCertificate::with_sigma(double sigma) const {
  return ClfCertificate(value_, gradient_, energy_, feedback_, sigma);
}

double convergence_bound(const ClfCertificate& cert, double v0, double t) {
  return convergence_bound(cert.energy_time(), cert.sigma(), v0, t);
}

double lyapunov_derivative(const ClfCertificate& cert,
                           const ControlSystem& sys, const StateVector& x,
                           const ControlVector& u) {
  const StateVector f = sys(x, u);
  const Gradient g = cert.gradient(x);
  if (g.size() != f.size()) {
    throw DimensionError("lyapunov_derivative: gradient/state size mismatch");
  }
  return g.dot(f.transpose());
}

ClfReport verify_clf_pointwise(const ClfCertificate& cert,
                               const ControlSystem& sys,
                               std::span<const StateVector> samples,
                               double rel_tol) {
  ClfReport report;
  report.n_samples = samples.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const StateVector& x = samples[i];
    const double v = cert.value(x);
    if (!(v > 0.0)) {
      ++report.n_skipped;
      continue;
    }
    const double w = lyapunov_derivative(cert, sys, x, cert.feedback(x));
    const double gamma = cert.rate()(v);
    const double margin = gamma + w;
    report.max_margin = std::max(report.max_margin, margin);
    if (!(margin <= rel_tol * (1.0 + gamma + std::abs(w)))) {
      report.violations.push_back({i, x, margin});
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Finite-difference helpers

Gradient numerical_gradient(const std::function<double(const StateVector&)>& f,
                            const StateVector& x) {
  Gradient g(x.size());
  StateVector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x[i]));
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd numerical_jacobian(
    const std::function<Eigen::VectorXd(const StateVector&)>& f,
    const StateVector& x) {
  StateVector probe = x;
  Eigen::MatrixXd jac;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x[i]));
    probe[i] = x[i] + h;
    const Eigen::VectorXd fp = f(probe);
    probe[i] = x[i] - h;
    const Eigen::VectorXd fm = f(probe);
    probe[i] = x[i];
    if (i == 0) jac.resize(fp.size(), x.size());
    jac.col(i) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

double gradient_consistency(const ClfCertificate& cert,
                            std::span<const StateVector> samples) {
  double worst = 0.0;
  const auto value = [&cert](const StateVector& x) { return cert.value(x); };
  for (const StateVector& x : samples) {
    const Gradient exact = cert.gradient(x);
    const Gradient fd = numerical_gradient(value, x);
    worst = std::max(worst, (exact - fd).norm() / (1.0 + exact.norm()));
  }
  return worst;
}

RateCheck check_rate_function(const RateFunction& rate, double v_max,
                              int n_points, double tol) {
  RateCheck check;
  double previous = rate(v_max / n_points);
  for (int j = 1; j <= n_points; ++j) {
    const double v = v_max * j / n_points;
    const double g = rate(v);
    if (!(g > 0.0)) check.positive = false;
    if (rate.monotone_nondecreasing() &&
        g < previous - 1e-12 * std::abs(previous)) {
      check.monotone_ok = false;
    }
    previous = g;
    if (rate.has_derivative()) {
      const double h = 1e-6 * (1.0 + v);
      if (v > 2.0 * h) {
        const double fd = (rate(v + h) - rate(v - h)) / (2.0 * h);
        const double exact = rate.derivative(v);
        const double err = std::abs(exact - fd) / (1.0 + std::abs(exact));
        check.worst_derivative_error =
            std::max(check.worst_derivative_error, err);
        if (err > tol) check.derivative_ok = false;
      }
    }
  }
  return check;
}

}  // namespace clf_etc
