#include "clf_etc/integrator.hpp"

#include <algorithm>
#include <cmath>

#include "clf_etc/errors.hpp"

namespace clf_etc {
namespace {

constexpr double a21 = 0.2;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                 a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                 a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0,
                 d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0,
                 d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0,
                 d7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kFacMin = 0.2;
constexpr double kFacMax = 10.0;

double error_norm(const StateVector& err, const StateVector& y0,
                  const StateVector& y1, const StepControl& c) {
  const auto n = err.size();
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sc =
        c.abs_tol + c.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double q = err[i] / sc;
    sum += q * q;
  }
  return std::sqrt(sum / static_cast<double>(n));
}

}  // namespace

StateVector DenseStep::at(double t) const {
  const double h = t1 - t0;
  if (!(h > 0.0)) return y0;
  const double th = std::clamp((t - t0) / h, 0.0, 1.0);
  if (th == 1.0) return y1;
  const double th1 = 1.0 - th;
  return y0 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
}

Dopri5::Dopri5(Flow f, StepControl control)
    : f_(std::move(f)), control_(control) {
  if (!(control_.rel_tol > 0.0) || !(control_.abs_tol > 0.0) ||
      !(control_.max_step > 0.0)) {
    throw ConfigError("integrator tolerances and max_step must be positive");
  }
}

StateVector Dopri5::eval(const StateVector& y) {
  ++n_eval_;
  return f_(y);
}

double Dopri5::initial_step(const StateVector& y0, double span) {
  const StateVector f0 = eval(y0);
  const auto scaled = [this](const StateVector& v, const StateVector& ref) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double sc = control_.abs_tol + control_.rel_tol * std::abs(ref[i]);
      s += (v[i] / sc) * (v[i] / sc);
    }
    return std::sqrt(s / std::max<double>(1.0, static_cast<double>(v.size())));
  };
  const double dnf = scaled(f0, y0);
  const double dny = scaled(y0, y0);
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
  h = std::min({h, control_.max_step, span});
  const StateVector y1 = y0 + h * f0;
  const StateVector f1 = eval(y1);
  const double der2 = scaled(f1 - f0, y0) / h;
  const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3)
                                   : std::pow(0.01 / der12, 0.2);
  return std::min({100.0 * h, h1, control_.max_step, span});
}

DenseStep Dopri5::attempt(double t, const StateVector& y, double h,
                          double& err) {
  StateVector k1;
  if (has_cache_ && cached_y_.size() == y.size() && cached_y_ == y) {
    k1 = cached_k1_;
  } else {
    k1 = eval(y);
  }
  const StateVector k2 = eval(y + h * (a21 * k1));
  const StateVector k3 = eval(y + h * (a31 * k1 + a32 * k2));
  const StateVector k4 = eval(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
  const StateVector k5 =
      eval(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  const StateVector k6 =
      eval(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  const StateVector y1 =
      y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
  const StateVector k7 = eval(y1);
  const StateVector e =
      h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  err = error_norm(e, y, y1, control_);

  DenseStep s;
  s.t0 = t;
  s.t1 = t + h;
  s.y0 = y;
  s.y1 = y1;
  s.r2 = y1 - y;
  s.r3 = h * k1 - s.r2;
  s.r4 = s.r2 - h * k7 - s.r3;
  s.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
  k_last_ = k7;
  cached_k1_ = k1;
  cached_y_ = y;
  has_cache_ = true;
  return s;
}

StateVector Dopri5::single_step(const StateVector& y, double h, double& err) {
  return attempt(0.0, y, h, err).y1;
}

DenseStep Dopri5::step(double t, const StateVector& y, double& h,
                       double h_cap) {
  double fac_max = kFacMax;
  for (int tries = 0;; ++tries) {
    const double h_try = std::min({h, h_cap, control_.max_step});
    if (!(h_try > 0.0) || t + h_try == t) {
      throw std::runtime_error("integrator step size underflow at t = " +
                               std::to_string(t));
    }
    double err = 0.0;
    DenseStep s = attempt(t, y, h_try, err);
    if (!std::isfinite(err)) err = 1e10;
    const double fac =
        err == 0.0 ? fac_max
                   : std::clamp(kSafety * std::pow(err, -0.2), kFacMin, fac_max);
    if (err <= 1.0) {
      // FSAL: the last stage is the first stage of the next step.
      cached_y_ = s.y1;
      cached_k1_ = k_last_;
      h = h_try * fac;
      return s;
    }
    h = h_try * fac;
    fac_max = 1.0;
    if (tries > 200) {
      throw std::runtime_error("integrator: too many rejected steps");
    }
  }
}

StateVector Segment::at(double t) const {
  if (steps.empty()) throw DomainError("empty segment");
  if (t <= steps.front().t0) return steps.front().y0;
  if (t >= steps.back().t1) return steps.back().y1;
  auto it = std::lower_bound(
      steps.begin(), steps.end(), t,
      [](const DenseStep& s, double value) { return s.t1 < value; });
  return it->at(t);
}

Segment integrate_frozen(const ControlSystem& sys, const StateVector& x0,
                         const ControlVector& u_frozen, double t0, double t1,
                         const StepControl& control) {
  if (x0.size() != sys.state_dim()) {
    throw DimensionError("integrate_frozen: state dimension mismatch");
  }
  if (!(t1 >= t0)) throw DomainError("integrate_frozen: t1 < t0");
  Segment seg;
  Dopri5 stepper([&sys, &u_frozen](const StateVector& x) { return sys(x, u_frozen); },
                 control);
  if (t1 == t0) {
    DenseStep s;
    s.t0 = s.t1 = t0;
    s.y0 = s.y1 = x0;
    seg.steps.push_back(s);
    return seg;
  }
  double t = t0;
  StateVector y = x0;
  double h = stepper.initial_step(y, t1 - t0);
  while (t < t1) {
    const double remaining = t1 - t;
    DenseStep s = stepper.step(t, y, h, remaining);
    // Land exactly on t1.
    if (s.t1 >= t1 || t1 - s.t1 <= 1e-14 * std::max(1.0, std::abs(t1))) {
      s.t1 = t1;
    }
    t = s.t1;
    y = s.y1;
    seg.steps.push_back(std::move(s));
    if (!y.allFinite() || y.norm() > control.blowup_norm) {
      seg.blowup = true;
      break;
    }
  }
  return seg;
}

}  // namespace clf_etc
