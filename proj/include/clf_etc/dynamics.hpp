#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace clf_etc {

using StateVector = Eigen::VectorXd;
using ControlVector = Eigen::VectorXd;
using Gradient = Eigen::RowVectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// x' = F(x, u) with fixed state and input dimensions. The right-hand side
/// must be a pure function of its arguments.
class ControlSystem {
 public:
  using Rhs =
      std::function<StateVector(const StateVector&, const ControlVector&)>;

  ControlSystem(int state_dim, int input_dim, Rhs rhs);

  int state_dim() const { return state_dim_; }
  int input_dim() const { return input_dim_; }

  /// Evaluates F(x, u); throws DimensionError on mismatched lengths.
  StateVector operator()(const StateVector& x, const ControlVector& u) const;

 private:
  int state_dim_;
  int input_dim_;
  Rhs rhs_;
};

enum class RateForm { kLinear, kPower, kCustom };

/// The decay rate gamma(v) of a gamma-stabilizing CLF. Linear and power
/// forms carry closed-form energy-time maps; custom forms fall back to
/// quadrature.
class RateFunction {
 public:
  using ScalarFn = std::function<double(double)>;

  /// gamma(v) = gain * v.
  static RateFunction linear(double gain);
  /// gamma(v) = gain * v^exponent; exponent == 1 is reduced to linear.
  static RateFunction power(double gain, double exponent);
  static RateFunction custom(ScalarFn gamma, std::optional<ScalarFn> gamma_prime,
                             bool monotone_nondecreasing);

  double operator()(double v) const;
  bool has_derivative() const { return static_cast<bool>(gamma_prime_); }
  /// gamma'(v); throws ConfigError when no derivative was supplied.
  double derivative(double v) const;
  bool monotone_nondecreasing() const { return monotone_; }

  RateForm form() const { return form_; }
  double gain() const { return gain_; }
  double exponent() const { return exponent_; }
  std::string describe() const;

 private:
  RateFunction() = default;

  RateForm form_ = RateForm::kCustom;
  double gain_ = 0.0;
  double exponent_ = 1.0;
  ScalarFn gamma_;
  ScalarFn gamma_prime_;
  bool monotone_ = false;
};

/// Gamma(s) = integral_1^s dv / gamma(v) together with its limits at 0 and
/// infinity. For custom rates the limits may be supplied; unknown limits are
/// reported as -inf / +inf and the inverse discovers them by bracketing.
class EnergyTimeMap {
 public:
  explicit EnergyTimeMap(RateFunction rate,
                         std::optional<double> lower_limit = std::nullopt,
                         std::optional<double> upper_limit = std::nullopt);

  const RateFunction& rate() const { return rate_; }
  double lower_limit() const { return lower_; }
  double upper_limit() const { return upper_; }

 private:
  RateFunction rate_;
  double lower_;
  double upper_;
};

double gamma_big(const EnergyTimeMap& map, double s);
double gamma_big_inverse(const EnergyTimeMap& map, double r);

/// Returns Gamma^{-1}(Gamma(v0) - sigma t), the bound on V(x(t)) for any
/// run that keeps V' <= -sigma gamma(V).
double convergence_bound(const EnergyTimeMap& map, double sigma, double v0,
                         double t);

/// A gamma-stabilizing CLF V with gradient V', rate gamma, feedback U and the
/// fraction sigma of the rate that sampled control must preserve.
class ClfCertificate {
 public:
  using ValueFn = std::function<double(const StateVector&)>;
  using GradientFn = std::function<Gradient(const StateVector&)>;
  using FeedbackFn = std::function<ControlVector(const StateVector&)>;

  ClfCertificate(ValueFn value, GradientFn gradient, EnergyTimeMap energy,
                 FeedbackFn feedback, double sigma);

  double value(const StateVector& x) const { return value_(x); }
  Gradient gradient(const StateVector& x) const { return gradient_(x); }
  ControlVector feedback(const StateVector& x) const { return feedback_(x); }
  const RateFunction& rate() const { return energy_.rate(); }
  const EnergyTimeMap& energy_time() const { return energy_; }
  double sigma() const { return sigma_; }

  ClfCertificate with_sigma(double sigma) const;

 private:
  ValueFn value_;
  GradientFn gradient_;
  EnergyTimeMap energy_;
  FeedbackFn feedback_;
  double sigma_;
};

double convergence_bound(const ClfCertificate& cert, double v0, double t);

/// W(x, u) = V'(x) F(x, u).
double lyapunov_derivative(const ClfCertificate& cert,
                           const ControlSystem& sys, const StateVector& x,
                           const ControlVector& u);

struct ClfViolation {
  std::size_t index;
  StateVector x;
  double margin;
};

struct ClfReport {
  std::size_t n_samples = 0;
  std::size_t n_skipped = 0;  // samples at the equilibrium
  double max_margin = -kInf;
  std::vector<ClfViolation> violations;

  bool ok() const { return violations.empty(); }
};

/// Checks gamma(V(x)) + W(x, U(x)) <= 0 on every sample. Margins above
/// rel_tol * (1 + gamma(V) + |W|) are reported as violations; they are data,
/// not errors.
ClfReport verify_clf_pointwise(const ClfCertificate& cert,
                               const ControlSystem& sys,
                               std::span<const StateVector> samples,
                               double rel_tol = 1e-10);

/// Central-difference gradient with step 1e-6 * (1 + |x_i|).
Gradient numerical_gradient(const std::function<double(const StateVector&)>& f,
                            const StateVector& x);

/// Central-difference Jacobian of a vector map, same step rule.
Eigen::MatrixXd numerical_jacobian(
    const std::function<Eigen::VectorXd(const StateVector&)>& f,
    const StateVector& x);

/// Largest value of |V'(x) - FD(V)(x)| / (1 + |V'(x)|) over the samples.
double gradient_consistency(const ClfCertificate& cert,
                            std::span<const StateVector> samples);

struct RateCheck {
  bool positive = true;
  bool monotone_ok = true;
  bool derivative_ok = true;
  double worst_derivative_error = 0.0;
};

/// Sampled validation of a rate function on (0, v_max]: positivity, the
/// monotonicity flag and, when present, gamma' against central differences.
RateCheck check_rate_function(const RateFunction& rate, double v_max,
                              int n_points = 1000, double tol = 1e-5);

}  // namespace clf_etc
