#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "clf_etc/dynamics.hpp"

namespace clf_etc {

/// The sublevel set B(x*) = {x : V(x) <= V(x*)} together with an
/// axis-aligned box that covers it at sample resolution.
struct SublevelRegion {
  StateVector anchor;
  double level = 0.0;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  bool degenerate() const { return !(level > 0.0); }
  /// Largest half-width of the box; the length scale for perturbation pairs.
  double scale() const;
  bool in_box(const StateVector& x) const;
};

struct BoxPolicy {
  double inflation = 0.05;
  int n_directions = 64;   // random rays on top of the 2d axis rays
  int max_expansions = 200;
  int bisection_iterations = 80;
  std::uint64_t seed = 0;
};

/// Bounds B(anchor) by ray bisection from the origin along every axis and a
/// set of seeded directions, then inflates the box by `inflation`. Throws
/// AssumptionViolation ("properness") when a ray never leaves the set.
SublevelRegion bound_sublevel_box(const ClfCertificate& cert,
                                  const StateVector& anchor,
                                  const BoxPolicy& policy = {});

struct SamplingOptions {
  std::size_t n_samples = 2048;
  double safety_factor = 1.25;
  std::uint64_t seed = 0;
  double equilibrium_fraction = 1e-12;
  /// Shell scan near the origin that detects a diverging non-degeneracy ratio.
  bool check_divergence = true;
  int divergence_shells = 6;
  double divergence_growth = 100.0;
};

/// Points of B(x*) drawn from the seeded Halton sequence over the region's
/// box (rejection on V > level). The anchor is always the first point.
std::vector<StateVector> sample_sublevel(const ClfCertificate& cert,
                                         const SublevelRegion& region,
                                         std::size_t n, std::uint64_t seed);

struct EstimationReport {
  std::string constant;
  double value = 0.0;
  double raw_max = 0.0;  // before the safety factor
  std::size_t n_samples = 0;
  double safety_factor = 1.0;
  StateVector argmax_point;
  std::uint64_t seed = 0;
};

/// Sampled Lipschitz constant of F(., U(anchor)) on B(anchor).
EstimationReport estimate_kappa(const ControlSystem& sys,
                                const ClfCertificate& cert,
                                const SublevelRegion& region,
                                const SamplingOptions& options = {});

/// Sampled Lipschitz constant of V' on B(anchor).
EstimationReport estimate_nu(const ClfCertificate& cert,
                             const SublevelRegion& region,
                             const SamplingOptions& options = {});

/// Sampled bound M of (|V'||Fbar| + |Fbar|^2) / |V' Fbar| on B(anchor)\{0}.
/// Throws AssumptionViolation("non-degeneracy") when a ratio is not finite
/// or the ratio keeps growing on shells that shrink towards the origin.
EstimationReport estimate_big_m(const ControlSystem& sys,
                                const ClfCertificate& cert,
                                const SublevelRegion& region,
                                const SamplingOptions& options = {});

/// max over v in [0, level] of max{0, -gamma'(v)}: 10^4-point grid plus
/// golden-section refinement. Zero for non-decreasing gamma.
double estimate_rho(const RateFunction& rate, double level);

/// sqrt(e) * max{kappa, nu (1 + kappa sqrt(e))}.
double compute_mu(double kappa, double nu);

enum class ConstantsProvenance { kClosedForm, kSampled };

struct CertificateConstants {
  double kappa = 0.0;
  double nu = 0.0;
  double big_m = 1.0;
  double rho = 0.0;
  double mu = 0.0;
  ConstantsProvenance provenance = ConstantsProvenance::kClosedForm;
  std::size_t n_samples = 0;
  double safety_factor = 1.0;

  /// Builds a record with mu recomputed from kappa and nu.
  static CertificateConstants make(double kappa, double nu, double big_m,
                                   double rho, ConstantsProvenance provenance,
                                   std::size_t n_samples = 0,
                                   double safety_factor = 1.0);
  void validate() const;
};

/// All constants for a region. rho is evaluated on [0, region.level] only
/// when gamma has a derivative and is not flagged monotone.
CertificateConstants estimate_constants(const ControlSystem& sys,
                                        const ClfCertificate& cert,
                                        const SublevelRegion& region,
                                        const SamplingOptions& options = {});

/// Pointwise non-degeneracy quantities at x != 0 for the pair (V, U).
struct NonDegeneracySample {
  double ratio;       // (|V'||Fbar| + |Fbar|^2) / |V' Fbar|
  double cos_theta;   // V' Fbar / (|V'||Fbar|)
  double speed_ratio; // |Fbar| / |V'|
};
NonDegeneracySample nondegeneracy_at(const ControlSystem& sys,
                                     const ClfCertificate& cert,
                                     const StateVector& x);

}  // namespace clf_etc
