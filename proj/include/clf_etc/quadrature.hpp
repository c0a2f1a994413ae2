#pragma once

#include <functional>

namespace clf_etc {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int intervals = 0;
  bool converged = false;
};

/// Adaptive Gauss-Kronrod (7/15) quadrature of f over [a, b]. Intervals are
/// bisected, worst error first, until the summed error estimate drops below
/// max(abs_tol, rel_tol * |value|) or max_intervals is reached. b < a is
/// allowed and flips the sign.
QuadratureResult integrate_adaptive(const std::function<double(double)>& f,
                                    double a, double b, double rel_tol = 1e-10,
                                    double abs_tol = 1e-300,
                                    int max_intervals = 4000);

}  // namespace clf_etc
