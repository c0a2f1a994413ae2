#include "clf_etc/certificates.hpp"

#include <cmath>
#include <optional>
#include <sstream>

#include "clf_etc/errors.hpp"
#include "clf_etc/sampling.hpp"

namespace clf_etc {
namespace {

constexpr std::uint64_t kStreamRays = 0x52415953ULL;
constexpr std::uint64_t kStreamKappa = 0x4b415050ULL;
constexpr std::uint64_t kStreamNu = 0x4e55ULL;

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

struct RunningMax {
  double value = 0.0;
  std::size_t index = 0;
  bool seen = false;

  // Ties keep the earlier sample index.
  void offer(double v, std::size_t i) {
    if (!seen || v > value) {
      value = v;
      index = i;
      seen = true;
    }
  }
};

void check_region(const SublevelRegion& region) {
  if (region.level < 0.0 || std::isnan(region.level)) {
    throw DomainError("sublevel region: level must be non-negative");
  }
}

// Sampled Lipschitz constant of `map` on the region: finite-difference
// Jacobian norms, consecutive-sample pairs and short perturbation pairs.
EstimationReport lipschitz_estimate(
    const std::string& name, const ClfCertificate& cert,
    const SublevelRegion& region, const SamplingOptions& options,
    std::uint64_t stream,
    const std::function<Eigen::VectorXd(const StateVector&)>& map) {
  EstimationReport report;
  report.constant = name;
  report.safety_factor = options.safety_factor;
  report.seed = options.seed;
  report.argmax_point = region.anchor;
  check_region(region);
  if (region.degenerate()) return report;  // B(0) = {0}: constant 0

  const std::vector<StateVector> pts =
      sample_sublevel(cert, region, options.n_samples, options.seed);
  report.n_samples = pts.size();
  const double scale = region.scale();
  const double offsets[] = {1e-4 * scale, 1e-2 * scale};

  RunningMax best;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const StateVector& x = pts[i];
    best.offer(spectral_norm(numerical_jacobian(map, x)), i);
    const Eigen::VectorXd fx = map(x);
    if (i + 1 < pts.size()) {
      const double dist = (pts[i + 1] - x).norm();
      if (dist > 0.0) best.offer((map(pts[i + 1]) - fx).norm() / dist, i);
    }
    for (int k = 0; k < 2; ++k) {
      const StateVector y =
          x + offsets[k] * hashed_direction(static_cast<int>(x.size()),
                                            options.seed, stream, 2 * i + k);
      if (!(cert.value(y) <= region.level)) continue;
      best.offer((map(y) - fx).norm() / offsets[k], i);
    }
  }
  report.raw_max = best.value;
  report.value = options.safety_factor * best.value;
  report.argmax_point = pts[best.index];
  return report;
}

// Scales x along the ray from the origin until V equals `target`.
std::optional<StateVector> project_to_level(const ClfCertificate& cert,
                                            const StateVector& x,
                                            double target) {
  if (!(cert.value(x) >= target)) return std::nullopt;
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cert.value(mid * x) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return StateVector(hi * x);
}

}  // namespace

double SublevelRegion::scale() const {
  if (lower.size() == 0) return 0.0;
  return 0.5 * (upper - lower).maxCoeff();
}

bool SublevelRegion::in_box(const StateVector& x) const {
  return (x.array() >= lower.array()).all() &&
         (x.array() <= upper.array()).all();
}

SublevelRegion bound_sublevel_box(const ClfCertificate& cert,
                                  const StateVector& anchor,
                                  const BoxPolicy& policy) {
  SublevelRegion region;
  region.anchor = anchor;
  region.level = cert.value(anchor);
  check_region(region);
  region.lower = anchor;
  region.upper = anchor;
  if (region.degenerate()) return region;

  const int dim = static_cast<int>(anchor.size());
  std::vector<Eigen::VectorXd> directions;
  for (int i = 0; i < dim; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e[i] = 1.0;
    directions.push_back(e);
    directions.push_back(-e);
  }
  for (int j = 0; j < policy.n_directions; ++j) {
    directions.push_back(hashed_direction(dim, policy.seed, kStreamRays, j));
  }

  const double start = std::max(anchor.norm(), 1e-12);
  for (const Eigen::VectorXd& dir : directions) {
    double lo = 0.0;
    double hi = start;
    int expansions = 0;
    while (cert.value(hi * dir) <= region.level) {
      lo = hi;
      hi *= 2.0;
      if (++expansions > policy.max_expansions) {
        std::ostringstream msg;
        msg << "V does not exceed level " << region.level
            << " along a ray from the origin (radius " << hi << ")";
        throw AssumptionViolation("properness", msg.str());
      }
    }
    for (int it = 0; it < policy.bisection_iterations; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (cert.value(mid * dir) <= region.level) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    const Eigen::VectorXd boundary = hi * dir;
    region.lower = region.lower.cwiseMin(boundary);
    region.upper = region.upper.cwiseMax(boundary);
  }
  const Eigen::VectorXd pad = 0.5 * policy.inflation * (region.upper - region.lower);
  region.lower -= pad;
  region.upper += pad;
  return region;
}

std::vector<StateVector> sample_sublevel(const ClfCertificate& cert,
                                         const SublevelRegion& region,
                                         std::size_t n, std::uint64_t seed) {
  std::vector<StateVector> pts;
  if (n == 0) return pts;
  pts.push_back(region.anchor);
  if (region.degenerate()) return pts;
  const int dim = static_cast<int>(region.anchor.size());
  const Eigen::VectorXd width = region.upper - region.lower;
  const std::size_t max_draws = 1000 * n + 10000;
  for (std::size_t i = 0; pts.size() < n && i < max_draws; ++i) {
    const StateVector x =
        region.lower + width.cwiseProduct(halton_point(i, dim, seed));
    if (cert.value(x) <= region.level) pts.push_back(x);
  }
  return pts;
}

EstimationReport estimate_kappa(const ControlSystem& sys,
                                const ClfCertificate& cert,
                                const SublevelRegion& region,
                                const SamplingOptions& options) {
  if (options.n_samples < 2) throw DomainError("estimate_kappa: n >= 2");
  const ControlVector frozen = cert.feedback(region.anchor);
  return lipschitz_estimate(
      "kappa", cert, region, options, kStreamKappa,
      [&sys, &frozen](const StateVector& x) { return sys(x, frozen); });
}

EstimationReport estimate_nu(const ClfCertificate& cert,
                             const SublevelRegion& region,
                             const SamplingOptions& options) {
  if (options.n_samples < 2) throw DomainError("estimate_nu: n >= 2");
  return lipschitz_estimate("nu", cert, region, options, kStreamNu,
                            [&cert](const StateVector& x) -> Eigen::VectorXd {
                              return cert.gradient(x).transpose();
                            });
}

NonDegeneracySample nondegeneracy_at(const ControlSystem& sys,
                                     const ClfCertificate& cert,
                                     const StateVector& x) {
  const StateVector fbar = sys(x, cert.feedback(x));
  const Gradient grad = cert.gradient(x);
  const double grad_norm = grad.norm();
  const double f_norm = fbar.norm();
  const double w = grad.dot(fbar.transpose());
  NonDegeneracySample s;
  s.ratio = (grad_norm * f_norm + f_norm * f_norm) / std::abs(w);
  s.cos_theta = w / (grad_norm * f_norm);
  s.speed_ratio = f_norm / grad_norm;
  return s;
}

EstimationReport estimate_big_m(const ControlSystem& sys,
                                const ClfCertificate& cert,
                                const SublevelRegion& region,
                                const SamplingOptions& options) {
  EstimationReport report;
  report.constant = "M";
  report.safety_factor = options.safety_factor;
  report.seed = options.seed;
  report.argmax_point = region.anchor;
  check_region(region);
  if (region.degenerate()) {
    // No point of B(0) \ {0}; any positive M satisfies the inequality.
    report.value = 1.0;
    return report;
  }

  const std::vector<StateVector> pts =
      sample_sublevel(cert, region, options.n_samples, options.seed);
  report.n_samples = pts.size();
  const double floor = options.equilibrium_fraction * region.level;

  RunningMax best;
  StateVector best_point = region.anchor;
  auto offer = [&](const StateVector& x, std::size_t index) {
    const double ratio = nondegeneracy_at(sys, cert, x).ratio;
    if (!std::isfinite(ratio)) {
      std::ostringstream msg;
      msg << "non-finite non-degeneracy ratio at sample " << index;
      throw AssumptionViolation("non-degeneracy", msg.str());
    }
    const bool improved = !best.seen || ratio > best.value;
    best.offer(ratio, index);
    if (improved) best_point = x;
    return ratio;
  };

  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (cert.value(pts[i]) < floor) continue;
    offer(pts[i], i);
  }
  const double outer_max = best.seen ? best.value : 0.0;

  if (options.check_divergence && options.divergence_shells > 0) {
    const std::size_t m = std::min<std::size_t>(64, pts.size());
    double innermost = 0.0;
    for (int j = 1; j <= options.divergence_shells; ++j) {
      const double target = region.level * std::pow(10.0, -2.0 * j);
      if (target < floor) break;
      double shell_max = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const auto y = project_to_level(cert, pts[i], target);
        if (!y) continue;
        shell_max = std::max(shell_max, offer(*y, pts.size() + j * m + i));
      }
      innermost = shell_max;
    }
    if (innermost > options.divergence_growth * std::max(outer_max, 1e-300)) {
      std::ostringstream msg;
      msg << "non-degeneracy ratio grows from " << outer_max << " on B(x*) to "
          << innermost << " near the origin (level fraction 1e-"
          << 2 * options.divergence_shells << ")";
      throw AssumptionViolation("non-degeneracy", msg.str());
    }
  }

  report.raw_max = best.value;
  report.value = options.safety_factor * best.value;
  report.argmax_point = best_point;
  return report;
}

double estimate_rho(const RateFunction& rate, double level) {
  if (level < 0.0 || std::isnan(level)) {
    throw DomainError("estimate_rho: level must be non-negative");
  }
  if (rate.monotone_nondecreasing()) return 0.0;
  if (!rate.has_derivative()) {
    throw ConfigError(
        "estimate_rho: gamma is neither flagged non-decreasing nor C1");
  }
  const auto penalty = [&rate](double v) { return -rate.derivative(v); };
  if (level == 0.0) return std::max(0.0, penalty(0.0));

  constexpr int kGrid = 10000;
  int best_j = 0;
  double best = penalty(0.0);
  for (int j = 1; j <= kGrid; ++j) {
    const double p = penalty(level * j / kGrid);
    if (p > best) {
      best = p;
      best_j = j;
    }
  }
  // Golden-section search for the maximum between the grid neighbours.
  double a = level * std::max(0, best_j - 1) / kGrid;
  double b = level * std::min(kGrid, best_j + 1) / kGrid;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = penalty(c);
  double fd = penalty(d);
  for (int it = 0; it < 80; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = penalty(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = penalty(d);
    }
  }
  best = std::max({best, fc, fd});
  return std::max(0.0, best);
}

double compute_mu(double kappa, double nu) {
  if (kappa < 0.0 || nu < 0.0 || std::isnan(kappa) || std::isnan(nu)) {
    throw DomainError("compute_mu: kappa and nu must be non-negative");
  }
  const double sqrt_e = std::sqrt(std::exp(1.0));
  return sqrt_e * std::max(kappa, nu * (1.0 + kappa * sqrt_e));
}

CertificateConstants CertificateConstants::make(
    double kappa, double nu, double big_m, double rho,
    ConstantsProvenance provenance, std::size_t n_samples,
    double safety_factor) {
  CertificateConstants c;
  c.kappa = kappa;
  c.nu = nu;
  c.big_m = big_m;
  c.rho = rho;
  c.mu = compute_mu(kappa, nu);
  c.provenance = provenance;
  c.n_samples = n_samples;
  c.safety_factor = safety_factor;
  c.validate();
  return c;
}

void CertificateConstants::validate() const {
  const auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!finite_nonneg(kappa) || !finite_nonneg(nu) || !finite_nonneg(rho) ||
      !finite_nonneg(mu)) {
    throw DomainError("certificate constants must be finite and non-negative");
  }
  if (!(big_m > 0.0) || !std::isfinite(big_m)) {
    throw DomainError("certificate constant M must be positive and finite");
  }
}

CertificateConstants estimate_constants(const ControlSystem& sys,
                                        const ClfCertificate& cert,
                                        const SublevelRegion& region,
                                        const SamplingOptions& options) {
  const EstimationReport kappa = estimate_kappa(sys, cert, region, options);
  const EstimationReport nu = estimate_nu(cert, region, options);
  const EstimationReport big_m = estimate_big_m(sys, cert, region, options);
  double rho = 0.0;
  if (!cert.rate().monotone_nondecreasing()) {
    rho = estimate_rho(cert.rate(), region.level);
  }
  return CertificateConstants::make(kappa.value, nu.value, big_m.value, rho,
                                    ConstantsProvenance::kSampled,
                                    kappa.n_samples, options.safety_factor);
}

}  // namespace clf_etc
