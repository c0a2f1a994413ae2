#include "clf_etc/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "clf_etc/errors.hpp"
#include "clf_etc/integrator.hpp"

namespace clf_etc {

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) {
    throw ConfigError("integrator tolerances must be positive");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ConfigError("horizon must be positive and finite");
  }
  if (max_step < 0.0 || event_time_tol < 0.0 || output_step < 0.0) {
    throw ConfigError("step sizes must be non-negative (0 selects the default)");
  }
  if (max_events < 1) throw ConfigError("max_events must be at least 1");
  if (!(zeno_floor > 0.0) || zeno_count < 1) {
    throw ConfigError("zeno_floor must be positive and zeno_count >= 1");
  }
  if (!(blowup_norm > 0.0)) throw ConfigError("blowup_norm must be positive");
  if (guard_probes < 1) throw ConfigError("guard_probes must be >= 1");
}

double IntegratorConfig::resolved_max_step() const {
  return max_step > 0.0 ? max_step : horizon / 1000.0;
}
double IntegratorConfig::resolved_event_tol() const {
  return event_time_tol > 0.0 ? event_time_tol : 1e-12 * horizon;
}
double IntegratorConfig::resolved_output_step() const {
  return output_step > 0.0 ? output_step : horizon / 1000.0;
}

std::string to_string(Termination termination) {
  switch (termination) {
    case Termination::kHorizon: return "horizon";
    case Termination::kEquilibrium: return "equilibrium";
    case Termination::kZenoAbort: return "zeno_abort";
    case Termination::kBlowup: return "blowup";
    case Termination::kEventCap: return "event_cap";
  }
  return "unknown";
}

double locate_event(const std::function<double(double)>& guard, double a,
                    double b, double tol) {
  if (!(b >= a)) throw DomainError("locate_event: empty bracket");
  if (!(tol > 0.0)) throw DomainError("locate_event: tolerance must be positive");
  if (guard(a) >= 0.0) return a;
  while (b - a > tol) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    if (guard(mid) >= 0.0) {
      b = mid;
    } else {
      a = mid;
    }
  }
  return b;
}

namespace {

class Engine {
 public:
  Engine(const ControlSystem& sys, const ClfCertificate& cert,
         const TriggerPolicy& policy, const IntegratorConfig& config)
      : sys_(sys),
        cert_(cert.with_sigma(policy_sigma(policy, cert.sigma()))),
        policy_(policy),
        config_(config),
        monitors_guard_(std::holds_alternative<EventTriggered>(policy)),
        periodic_(std::holds_alternative<PeriodicEvent>(policy)) {
    config_.validate();
    validate_policy(policy_);
    control_.rel_tol = config_.rel_tol;
    control_.abs_tol = config_.abs_tol;
    control_.max_step = config_.resolved_max_step();
    control_.blowup_norm = config_.blowup_norm;
    out_dt_ = config_.resolved_output_step();
    event_tol_ = config_.resolved_event_tol();
  }

  Trajectory run(const StateVector& x0) {
    if (x0.size() != sys_.state_dim()) {
      throw DimensionError("run_closed_loop: x0 has the wrong dimension");
    }
    if (!x0.allFinite()) throw DomainError("run_closed_loop: x0 must be finite");
    traj_.state_dim = sys_.state_dim();
    traj_.input_dim = sys_.input_dim();
    traj_.sigma = cert_.sigma();
    traj_.v0 = cert_.value(x0);
    clock_.equilibrium_level = std::max(1e-24, 1e-12 * traj_.v0);

    t_ = 0.0;
    x_ = x0;
    if (!fire(TriggerReason::kInitial, 0.0)) return finish();
    try {
      while (!done_) interval();
    } catch (const std::runtime_error& e) {
      // Step-size collapse: the solution left every compact set.
      done_ = true;
      termination_ = Termination::kBlowup;
      traj_.diagnostic = e.what();
    }
    return finish();
  }

 private:
  Trajectory finish() {
    if (!traj_.samples.empty() && traj_.samples.back().t < t_) emit(t_, x_, false);
    traj_.t_end = t_;
    traj_.termination = termination_;
    return std::move(traj_);
  }

  void emit(double t, const StateVector& x, bool event) {
    TrajectorySample s;
    s.t = t;
    s.x = x;
    s.u = u_;
    s.v = cert_.value(x);
    s.w = lyapunov_derivative(cert_, sys_, x, u_);
    s.event = event;
    last_emit_ = t;
    traj_.samples.push_back(std::move(s));
  }

  // Grid outputs with t0 < t_k <= t1 (t_k < t1 when `open_end`).
  void emit_grid(const DenseStep& step, double t1, bool open_end) {
    for (;;) {
      const double tk = static_cast<double>(next_grid_) * out_dt_;
      if (tk > t1 || (open_end && tk >= t1)) break;
      ++next_grid_;
      if (tk <= last_emit_) continue;
      emit(tk, step.at(tk), false);
    }
  }

  // Records an event at (t_, x_) and refreshes the control. Returns false
  // when the run has to stop instead.
  bool fire(TriggerReason reason, double guard_value) {
    if (traj_.events.size() >= config_.max_events) {
      done_ = true;
      termination_ = Termination::kEventCap;
      std::ostringstream msg;
      msg << "event cap " << config_.max_events << " reached at t = " << t_;
      traj_.diagnostic = msg.str();
      return false;
    }
    EventRecord rec;
    rec.index = traj_.events.size();
    rec.time = t_;
    rec.state = x_;
    rec.guard_value = guard_value;
    if (!traj_.events.empty()) {
      const double dwell = t_ - traj_.events.back().time;
      rec.dwell = dwell;
      short_dwells_ = dwell < config_.zeno_floor ? short_dwells_ + 1 : 0;
    }
    if (cert_.value(x_) <= clock_.equilibrium_level) {
      u_ = cert_.feedback(StateVector::Zero(x_.size()));
      frozen_ = true;
      reason = TriggerReason::kEquilibriumFrozen;
    } else {
      u_ = cert_.feedback(x_);
    }
    if (u_.size() != sys_.input_dim()) {
      throw DimensionError("feedback returned a control of the wrong dimension");
    }
    rec.control = u_;
    rec.reason = reason;
    traj_.events.push_back(std::move(rec));
    emit(t_, x_, true);

    clock_.n = traj_.events.size() - 1;
    clock_.t_last = t_;
    clock_.x_last = x_;
    if (short_dwells_ >= config_.zeno_count) {
      done_ = true;
      termination_ = Termination::kZenoAbort;
      std::ostringstream msg;
      msg << config_.zeno_count << " consecutive dwells below "
          << config_.zeno_floor << " s ending at t = " << t_;
      traj_.diagnostic = msg.str();
      return false;
    }
    return true;
  }

  std::optional<double> query() const {
    if (frozen_) return std::nullopt;
    std::optional<double> due = next_query_time(policy_, clock_);
    // A clock instant lost to rounding just past the horizon still counts.
    if (due && *due > config_.horizon && *due - config_.horizon <= event_tol_) {
      due = config_.horizon;
    }
    return due;
  }

  // Newton on the guard along an accurately re-integrated flow, so the
  // recorded state sits on the surface rather than on the dense output.
  double polish_root(const DenseStep& step, double root, double lo, double hi,
                     StateVector& x_root) const {
    StepControl fine = control_;
    fine.rel_tol = std::min(control_.rel_tol, 1e-12);
    fine.abs_tol = std::min(control_.abs_tol,
                            std::max(1e-300, 1e-13 * step.y0.lpNorm<Eigen::Infinity>()));
    const auto flow = [&](double t) {
      return t <= step.t0 ? step.y0
                          : integrate_frozen(sys_, step.y0, u_, step.t0, t, fine).end();
    };
    const double delta = std::max(1e-6 * step.h(), 4.0 * event_tol_);
    const double a = std::max(step.t0, root - delta);
    const double slope =
        (guard_at(step, root) - guard_at(step, a)) / std::max(root - a, 1e-300);
    x_root = flow(root);
    if (!(slope > 0.0) || !std::isfinite(slope)) return root;
    double t = root;
    for (int it = 0; it < 6; ++it) {
      const double g = event_guard(cert_, sys_, x_root, u_);
      if (std::abs(g) <= 1e-11 * cert_.rate()(cert_.value(x_root))) break;
      const double next = std::clamp(t - g / slope, lo, hi);
      if (next == t) break;
      t = next;
      x_root = flow(t);
    }
    return t;
  }

  double guard_at(const DenseStep& step, double t) const {
    return event_guard(cert_, sys_, step.at(t), u_);
  }

  // Integrates with the current control until the next control update, the
  // horizon, or a termination.
  void interval() {
    const ControlVector held = u_;
    Dopri5 stepper([this, held](const StateVector& x) { return sys_(x, held); },
                   control_);
    const double horizon = config_.horizon;
    std::optional<double> due = query();
    double h = stepper.initial_step(
        x_, std::max(std::min(horizon, due.value_or(horizon)) - t_, 1e-300));

    while (true) {
      const double target = std::min(horizon, due.value_or(horizon));
      double cap = target - t_;
      DenseStep step;
      double root = kInf, root_lo = 0.0, root_hi = 0.0;
      for (int halvings = 0;; ++halvings) {
        step = stepper.step(t_, x_, h, cap);
        if (step.t1 >= target || target - step.t1 <= 1e-14 * std::max(1.0, target)) {
          step.t1 = target;
        }
        if (!monitors_guard_ || frozen_) break;
        const int n = config_.guard_probes;
        double prev_t = step.t0;
        double prev_g = event_guard(cert_, sys_, step.y0, u_);
        int changes = 0;
        double lo = 0.0, hi = 0.0;
        for (int j = 1; j <= n + 1; ++j) {
          const double tj = j == n + 1 ? step.t1
                                       : step.t0 + step.h() * j / (n + 1.0);
          const double gj = guard_at(step, tj);
          if ((prev_g < 0.0) != (gj < 0.0)) {
            if (changes == 0) {
              lo = prev_t;
              hi = tj;
            }
            ++changes;
          }
          prev_t = tj;
          prev_g = gj;
        }
        if (changes > 1 && step.h() > 64.0 * event_tol_ && halvings < 60) {
          cap = 0.5 * step.h();
          h = cap;
          continue;
        }
        if (changes > 0) {
          root = locate_event([&](double t) { return guard_at(step, t); }, lo, hi,
                              event_tol_);
          root_lo = lo;
          root_hi = hi;
        }
        break;
      }

      if (std::isfinite(root)) {
        StateVector x_root;
        root = polish_root(step, root, root_lo, root_hi, x_root);
        emit_grid(step, root, true);
        const double g = event_guard(cert_, sys_, x_root, u_);
        t_ = root;
        x_ = x_root;
        fire(TriggerReason::kGuardZero, g);
        return;
      }

      emit_grid(step, step.t1, false);
      t_ = step.t1;
      x_ = step.y1;
      if (!x_.allFinite() || x_.norm() > config_.blowup_norm) {
        done_ = true;
        termination_ = Termination::kBlowup;
        std::ostringstream msg;
        msg << "state norm exceeded " << config_.blowup_norm << " at t = " << t_;
        traj_.diagnostic = msg.str();
        return;
      }
      const bool at_horizon = t_ >= horizon;
      if (due && t_ >= *due) {
        if (periodic_) {
          const auto& p = std::get<PeriodicEvent>(policy_);
          clock_.check_index += 1;
          traj_.n_checks += 1;
          if (!predicate_p(cert_, sys_, p.sigma_tilde, p.k_big, p.big_m, x_, u_)) {
            fire(TriggerReason::kPredicateFalse, event_guard(cert_, sys_, x_, u_));
            if (at_horizon) stop_at_horizon();
            return;
          }
          due = query();
        } else {
          fire(TriggerReason::kClock, event_guard(cert_, sys_, x_, u_));
          if (at_horizon) stop_at_horizon();
          return;
        }
      }
      if (at_horizon) {
        stop_at_horizon();
        return;
      }
    }
  }

  void stop_at_horizon() {
    if (done_) return;
    done_ = true;
    termination_ = frozen_ ? Termination::kEquilibrium : Termination::kHorizon;
  }

  const ControlSystem& sys_;
  ClfCertificate cert_;
  TriggerPolicy policy_;
  IntegratorConfig config_;
  StepControl control_;
  bool monitors_guard_;
  bool periodic_;
  double out_dt_ = 0.0;
  double event_tol_ = 0.0;

  Trajectory traj_;
  ClockState clock_;
  double t_ = 0.0;
  StateVector x_;
  ControlVector u_;
  bool frozen_ = false;
  bool done_ = false;
  int short_dwells_ = 0;
  std::size_t next_grid_ = 1;
  double last_emit_ = -kInf;
  Termination termination_ = Termination::kHorizon;
};

}  // namespace

Trajectory run_closed_loop(const ControlSystem& sys, const ClfCertificate& cert,
                           const TriggerPolicy& policy, const StateVector& x0,
                           const IntegratorConfig& config) {
  Engine engine(sys, cert, policy, config);
  return engine.run(x0);
}

RunStats run_stats(const Trajectory& traj) {
  if (traj.events.empty()) throw DomainError("run_stats: trajectory has no events");
  RunStats s;
  const auto& ev = traj.events;
  s.n_events = ev.size();
  for (const auto& e : ev) {
    if (e.time > 0.0) {
      s.first_event_time = e.time;
      break;
    }
  }
  if (ev.size() < 2) return s;
  double lo = kInf, hi = -kInf;
  for (std::size_t i = 1; i < ev.size(); ++i) {
    const double d = ev[i].time - ev[i - 1].time;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  s.min_dwell = lo;
  s.max_dwell = hi;
  const double span = ev.back().time - ev.front().time;
  if (span > 0.0) s.mean_event_frequency = static_cast<double>(ev.size() - 1) / span;
  if (ev.size() >= 3) {
    double alo = kInf, ahi = -kInf;
    for (std::size_t i = 2; i < ev.size(); ++i) {
      const double d = ev[i].time - ev[i - 1].time;
      alo = std::min(alo, d);
      ahi = std::max(ahi, d);
    }
    s.active_min_dwell = alo;
    s.active_max_dwell = ahi;
    const double active = ev.back().time - ev[1].time;
    if (active > 0.0) {
      s.active_event_frequency = static_cast<double>(ev.size() - 2) / active;
    }
  }
  return s;
}

RateCertificateCheck check_rate_certificate(const Trajectory& traj,
                                            const EnergyTimeMap& map,
                                            double sigma, double slack_rel) {
  RateCertificateCheck c;
  const double slack = slack_rel * (1.0 + traj.v0);
  for (const auto& s : traj.samples) {
    const double bound = convergence_bound(map, sigma, traj.v0, s.t);
    const double excess = s.v - bound - slack;
    ++c.n_points;
    if (excess > c.worst_excess) {
      c.worst_excess = excess;
      c.worst_time = s.t;
    }
    if (excess > 0.0) ++c.n_violations;
  }
  c.ok = c.n_violations == 0;
  return c;
}

double max_v_increase(const Trajectory& traj) {
  double worst = -kInf;
  for (std::size_t i = 1; i < traj.samples.size(); ++i) {
    worst = std::max(worst, traj.samples[i].v - traj.samples[i - 1].v);
  }
  return worst;
}

namespace {

void put(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

void write_csv(const Trajectory& traj, std::ostream& out) {
  out << "t";
  for (int i = 1; i <= traj.state_dim; ++i) out << ",x" << i;
  for (int i = 1; i <= traj.input_dim; ++i) out << ",u" << i;
  out << ",V,W,event_flag\n";
  for (const auto& s : traj.samples) {
    put(out, s.t);
    for (Eigen::Index i = 0; i < s.x.size(); ++i) {
      out << ',';
      put(out, s.x[i]);
    }
    for (Eigen::Index i = 0; i < s.u.size(); ++i) {
      out << ',';
      put(out, s.u[i]);
    }
    out << ',';
    put(out, s.v);
    out << ',';
    put(out, s.w);
    out << ',' << (s.event ? 1 : 0) << '\n';
  }
}

Trajectory read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("trajectory CSV is empty");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  Trajectory traj;
  for (const auto& c : cols) {
    if (c.size() > 1 && c[0] == 'x') ++traj.state_dim;
    if (c.size() > 1 && c[0] == 'u') ++traj.input_dim;
  }
  const std::size_t expected =
      static_cast<std::size_t>(traj.state_dim + traj.input_dim) + 4;
  if (cols.size() != expected || cols.front() != "t" || cols.back() != "event_flag") {
    throw ConfigError("trajectory CSV header must be t,x1..xd,u1..um,V,W,event_flag");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw ConfigError("trajectory CSV line " + std::to_string(line_no) +
                          ": bad number '" + c + "'");
      }
    }
    if (vals.size() != expected) {
      throw ConfigError("trajectory CSV line " + std::to_string(line_no) +
                        ": wrong column count");
    }
    TrajectorySample s;
    s.t = vals[0];
    s.x = Eigen::Map<Eigen::VectorXd>(vals.data() + 1, traj.state_dim);
    s.u = Eigen::Map<Eigen::VectorXd>(vals.data() + 1 + traj.state_dim,
                                      traj.input_dim);
    s.v = vals[expected - 3];
    s.w = vals[expected - 2];
    s.event = vals[expected - 1] != 0.0;
    if (s.event) {
      EventRecord e;
      e.index = traj.events.size();
      e.time = s.t;
      e.state = s.x;
      e.control = s.u;
      e.reason = e.index == 0 ? TriggerReason::kInitial : TriggerReason::kNone;
      if (!traj.events.empty()) e.dwell = s.t - traj.events.back().time;
      traj.events.push_back(std::move(e));
    }
    traj.samples.push_back(std::move(s));
  }
  if (!traj.samples.empty()) {
    traj.v0 = traj.samples.front().v;
    traj.t_end = traj.samples.back().t;
  }
  return traj;
}

}  // namespace clf_etc
