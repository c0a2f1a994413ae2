#pragma once

#include <functional>
#include <vector>

#include "clf_etc/dynamics.hpp"

namespace clf_etc {

/// Autonomous vector field y' = f(y); the frozen-input flow F(., u*).
using Flow = std::function<StateVector(const StateVector&)>;

struct StepControl {
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  double max_step = kInf;
  double blowup_norm = 1e12;
};

/// One accepted Dormand-Prince step with its 4th-order continuous extension.
struct DenseStep {
  double t0 = 0.0;
  double t1 = 0.0;
  StateVector y0, y1;
  StateVector r2, r3, r4, r5;

  double h() const { return t1 - t0; }
  StateVector at(double t) const;
};

/// Dormand-Prince 5(4) with Hairer's step-size controller. The stepper keeps
/// the last stage so consecutive steps share one evaluation.
class Dopri5 {
 public:
  Dopri5(Flow f, StepControl control);

  /// Initial step size from Hairer's heuristic.
  double initial_step(const StateVector& y0, double span);

  /// Takes one accepted step from (t, y) of size at most min(h, h_cap),
  /// shrinking on rejection. On return h holds the suggested next size.
  DenseStep step(double t, const StateVector& y, double& h, double h_cap);

  /// A single unchecked step of size h; err receives the scaled error norm.
  StateVector single_step(const StateVector& y, double h, double& err);

  std::size_t evaluations() const { return n_eval_; }

 private:
  StateVector eval(const StateVector& y);
  DenseStep attempt(double t, const StateVector& y, double h, double& err);

  Flow f_;
  StepControl control_;
  StateVector cached_y_;
  StateVector cached_k1_;
  bool has_cache_ = false;
  StateVector k_last_;
  std::size_t n_eval_ = 0;
};

/// A run of consecutive dense steps over [t0, t1].
struct Segment {
  std::vector<DenseStep> steps;
  bool blowup = false;

  double t0() const { return steps.empty() ? 0.0 : steps.front().t0; }
  double t1() const { return steps.empty() ? 0.0 : steps.back().t1; }
  StateVector end() const { return steps.back().y1; }
  /// Dense value at t in [t0, t1].
  StateVector at(double t) const;
};

/// Integrates x' = F(x, u_frozen) over [t0, t1]. Stops early with
/// blowup = true when the state norm exceeds control.blowup_norm.
Segment integrate_frozen(const ControlSystem& sys, const StateVector& x0,
                         const ControlVector& u_frozen, double t0, double t1,
                         const StepControl& control = {});

}  // namespace clf_etc
