#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clf_etc/certificates.hpp"
#include "clf_etc/dynamics.hpp"

namespace clf_etc {

enum class AssumptionStatus { kSatisfiesAll, kViolatesNondegeneracy };

std::string to_string(AssumptionStatus status);

/// A system paired with its CLF certificate and the metadata a run needs.
struct Model {
  std::string name;
  ControlSystem system;
  ClfCertificate certificate;
  std::map<std::string, double> parameters;
  std::optional<CertificateConstants> known_constants;
  AssumptionStatus expected_status = AssumptionStatus::kSatisfiesAll;
  StateVector default_x0;
  /// Radius of the ball used for pointwise certificate checks.
  double check_radius = 1.0;
};

struct AccParams {
  double k = 1.01;
  double tau = 0.3;  // constant lag, used when tau_lag is empty
  std::function<double(double)> tau_lag;  // lag as a function of speed
  double v0 = 20.0;  // platoon speed
  double d0 = 10.0;  // desired gap

  double lag(double speed) const { return tau_lag ? tau_lag(speed) : tau; }
};

/// Backstepping coordinates x1 = d - d0, x2 = v0 - v + k x1,
/// x3 = -a + 2k (v0 - v) + k^2 x1 for the lagged vehicle tau(v) a' + a = u.
Model acc_backstepping(const AccParams& params = {});

struct VehicleState {
  double d = 0.0;
  double v = 0.0;
  double a = 0.0;
};
StateVector acc_to_state(const AccParams& params, const VehicleState& s);
VehicleState acc_from_state(const AccParams& params, const StateVector& x);

/// x1' = -x1^3 + x1 x2^2, x2' = x1 x2^2 + u - x1^2 x2 with V = |x|^2 / 2 and
/// gamma(v) = rate_scale * v^2.
Model homogeneous_planar(double rate_scale = 1.0);

/// Rotating planar system whose feedback violates non-degeneracy near 0.
/// default_x0 is r_star (cos phi, sin phi).
Model zeno_polar(double r_star, double phi = 0.0);

/// Upper bound on the first inter-event time from x* with |x*| = r_star.
double zeno_first_event_bound(double r_star);

/// x' = u with U(x) = -sign(x), V = x^2, gamma(v) = 2 sqrt(v).
Model relay_1d();

/// Registry: "acc", "homog2d", "zeno-polar", "relay1d". Parameters are
/// matched by name; unknown names throw ConfigError.
Model make_model(const std::string& name,
                 const std::map<std::string, double>& params = {});
std::vector<std::string> model_names();

}  // namespace clf_etc
