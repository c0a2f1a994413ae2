#include "clf_etc/models.hpp"

#include <cmath>
#include <set>

#include "clf_etc/errors.hpp"

namespace clf_etc {
namespace {

constexpr double kDefaultSigma = 0.9;

ClfCertificate half_square_norm(RateFunction rate,
                                ClfCertificate::FeedbackFn feedback) {
  return ClfCertificate(
      [](const StateVector& x) { return 0.5 * x.squaredNorm(); },
      [](const StateVector& x) -> Gradient { return x.transpose(); },
      EnergyTimeMap(std::move(rate)), std::move(feedback), kDefaultSigma);
}

double sign(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

}  // namespace

std::string to_string(AssumptionStatus status) {
  return status == AssumptionStatus::kSatisfiesAll ? "satisfies_all"
                                                   : "violates_nondegeneracy";
}

Model acc_backstepping(const AccParams& params) {
  const double k = params.k;
  if (!(k > 1.0)) throw DomainError("acc: k must exceed 1");
  if (!params.tau_lag && !(params.tau > 0.0)) {
    throw DomainError("acc: lag tau must be positive");
  }
  const AccParams p = params;
  auto lag_at = [p](const StateVector& x) {
    const double tau = p.lag(p.v0 - (x[1] - p.k * x[0]));
    if (!(tau > 0.0)) throw DomainError("acc: lag tau(v) must be positive");
    return tau;
  };
  ControlSystem sys(3, 1, [k, lag_at](const StateVector& x, const ControlVector& u) {
    const double tau = lag_at(x);
    const double accel = 2.0 * k * x[1] - k * k * x[0] - x[2];
    StateVector dx(3);
    dx[0] = x[1] - k * x[0];
    dx[1] = x[2] - k * x[1];
    dx[2] = k * k * (x[1] - k * x[0]) + (1.0 / tau - 2.0 * k) * accel - u[0] / tau;
    return dx;
  });
  auto feedback = [k, lag_at](const StateVector& x) {
    const double tau = lag_at(x);
    const double accel = 2.0 * k * x[1] - k * k * x[0] - x[2];
    ControlVector u(1);
    u[0] = tau * k * k * (x[1] - k * x[0]) + (1.0 - 2.0 * k * tau) * accel -
           tau * (x[0] - k * x[2]);
    return u;
  };
  StateVector x0(3);
  x0 << 10.0, 10.0 * k, 10.0 * k * k;
  Model m{"acc",
          std::move(sys),
          half_square_norm(RateFunction::linear(2.0 * (k - 1.0)), feedback),
          {{"k", k}, {"tau", p.tau}, {"v0", p.v0}, {"d0", p.d0}},
          std::nullopt,
          AssumptionStatus::kSatisfiesAll,
          x0,
          20.0};
  return m;
}

StateVector acc_to_state(const AccParams& p, const VehicleState& s) {
  const double k = p.k;
  StateVector x(3);
  x[0] = s.d - p.d0;
  x[1] = (p.v0 - s.v) + k * x[0];
  x[2] = -s.a + 2.0 * k * (p.v0 - s.v) + k * k * x[0];
  return x;
}

VehicleState acc_from_state(const AccParams& p, const StateVector& x) {
  if (x.size() != 3) throw DimensionError("acc state has three coordinates");
  const double k = p.k;
  VehicleState s;
  s.d = x[0] + p.d0;
  s.v = p.v0 - (x[1] - k * x[0]);
  s.a = 2.0 * k * x[1] - k * k * x[0] - x[2];
  return s;
}

Model homogeneous_planar(double rate_scale) {
  if (!(rate_scale > 0.0)) throw DomainError("homog2d: rate_scale must be positive");
  ControlSystem sys(2, 1, [](const StateVector& x, const ControlVector& u) {
    StateVector dx(2);
    dx[0] = -x[0] * x[0] * x[0] + x[0] * x[1] * x[1];
    dx[1] = x[0] * x[1] * x[1] + u[0] - x[0] * x[0] * x[1];
    return dx;
  });
  auto feedback = [](const StateVector& x) {
    ControlVector u(1);
    u[0] = -x[1] * x[1] * x[1] - x[0] * x[1] * x[1];
    return u;
  };
  StateVector x0(2);
  x0 << 0.1, 0.4;
  Model m{"homog2d",
          std::move(sys),
          half_square_norm(RateFunction::power(rate_scale, 2.0), feedback),
          {{"rate_scale", rate_scale}},
          std::nullopt,
          AssumptionStatus::kSatisfiesAll,
          x0,
          1.0};
  return m;
}

Model zeno_polar(double r_star, double phi) {
  if (!(r_star > 0.0 && r_star < 1.0)) {
    throw DomainError("zeno-polar: r_star must lie in (0, 1)");
  }
  ControlSystem sys(2, 2, [](const StateVector& x, const ControlVector& u) {
    StateVector dx(2);
    dx[0] = x[1] + u[0];
    dx[1] = -x[0] + u[1];
    return dx;
  });
  auto feedback = [](const StateVector& x) {
    const double r = x.norm();
    ControlVector u = ControlVector::Zero(2);
    if (r == 0.0) return u;
    u[0] = -x[0] + x[1] / r;
    u[1] = -x[1] - x[0] / r;
    return u;
  };
  StateVector x0(2);
  x0 << r_star * std::cos(phi), r_star * std::sin(phi);
  Model m{"zeno-polar",
          std::move(sys),
          half_square_norm(RateFunction::linear(2.0), feedback),
          {{"r_star", r_star}, {"phi", phi}},
          std::nullopt,
          AssumptionStatus::kViolatesNondegeneracy,
          x0,
          1.0};
  return m;
}

double zeno_first_event_bound(double r) {
  if (!(r > 0.0 && r < 1.0)) {
    throw DomainError("zeno-polar: r_star must lie in (0, 1)");
  }
  const double q = r * std::sqrt(1.0 + r * r);
  return q * std::atan(r) / (q + 1.0 - r * r);
}

Model relay_1d() {
  ControlSystem sys(1, 1, [](const StateVector&, const ControlVector& u) {
    return StateVector(u);
  });
  auto feedback = [](const StateVector& x) {
    ControlVector u(1);
    u[0] = -sign(x[0]);
    return u;
  };
  ClfCertificate cert(
      [](const StateVector& x) { return x[0] * x[0]; },
      [](const StateVector& x) -> Gradient {
        Gradient g(1);
        g[0] = 2.0 * x[0];
        return g;
      },
      EnergyTimeMap(RateFunction::power(2.0, 0.5)), feedback, kDefaultSigma);
  StateVector x0(1);
  x0 << 1.0;
  Model m{"relay1d",
          std::move(sys),
          std::move(cert),
          {},
          std::nullopt,
          AssumptionStatus::kViolatesNondegeneracy,
          x0,
          2.0};
  return m;
}

std::vector<std::string> model_names() {
  return {"acc", "homog2d", "zeno-polar", "relay1d"};
}

Model make_model(const std::string& name,
                 const std::map<std::string, double>& params) {
  const auto take = [&params, &name](std::initializer_list<const char*> allowed) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : params) {
      if (!ok.count(key)) {
        throw ConfigError("model '" + name + "' has no parameter '" + key + "'");
      }
      if (!std::isfinite(value)) {
        throw ConfigError("model parameter '" + key + "' must be finite");
      }
    }
  };
  const auto get = [&params](const char* key, double fallback) {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  if (name == "acc") {
    take({"k", "tau", "v0", "d0"});
    AccParams p;
    p.k = get("k", p.k);
    p.tau = get("tau", p.tau);
    p.v0 = get("v0", p.v0);
    p.d0 = get("d0", p.d0);
    return acc_backstepping(p);
  }
  if (name == "homog2d") {
    take({"rate_scale"});
    return homogeneous_planar(get("rate_scale", 1.0));
  }
  if (name == "zeno-polar") {
    take({"r_star", "phi"});
    return zeno_polar(get("r_star", 0.5), get("phi", 0.0));
  }
  if (name == "relay1d") {
    take({});
    return relay_1d();
  }
  throw ConfigError("unknown model '" + name + "'");
}

}  // namespace clf_etc
