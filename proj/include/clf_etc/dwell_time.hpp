#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "clf_etc/certificates.hpp"

namespace clf_etc {

/// Which dwell-time formula family applies: the plain one for
/// non-decreasing gamma, the rho-corrected one for C1 gamma.
enum class GammaMode { kNondecreasing, kC1 };

/// Prefers kNondecreasing when the rate is flagged monotone; throws
/// ConfigError when gamma is neither monotone nor has a derivative.
GammaMode gamma_mode_for(const RateFunction& rate);

struct DwellInputs {
  CertificateConstants constants;
  double sigma = 0.9;
  std::optional<double> sigma_tilde;
  std::optional<double> k_big;
  GammaMode gamma_mode = GammaMode::kNondecreasing;

  /// 0 < sigma < 1; when present sigma < sigma_tilde < 1 and K > 1.
  void validate() const;
  /// Throws DomainError unless sigma_tilde and K are both present and valid.
  void require_periodic() const;
};

/// The min{} argument that produced a dwell estimate.
enum class DwellBranch {
  kRate,          // the (1 - sigma)^2 / (mu M)^2 style term
  kLipschitzCap,  // 1 / (1 + 2 kappa)
  kRho,           // the gamma'-correction term
};

std::string to_string(DwellBranch branch);

struct DwellEstimate {
  double value = 0.0;
  DwellBranch branch = DwellBranch::kRate;
  DwellInputs inputs;
};

/// c(t) = ((e^{(2 kappa + 1) t} - 1) / (2 kappa + 1))^{1/2}.
double c_bound(double kappa, double t);

/// min{(1 - sigma)^2 / (mu^2 M^2), 1 / (1 + 2 kappa)}.
DwellEstimate tau_tilde(const DwellInputs& inputs);
/// min{tau_tilde at sigma0, (sigma0 - sigma) / (sigma (2 - sigma0) rho)},
/// sigma0 = (1 + sigma) / 2. Requires gamma_mode == kC1.
DwellEstimate tau_hat(const DwellInputs& inputs);
/// tau_tilde for non-decreasing gamma, tau_hat otherwise.
DwellEstimate tau_select(const DwellInputs& inputs);

/// min{(st - s)^2 / (K^2 mu^2 M^2 st^2), 1 / (1 + 2 kappa)}.
DwellEstimate tau_bar(const DwellInputs& inputs);
/// min{tau_bar at sigma1, (sigma1 - sigma) / (sigma (2 st - sigma1) rho)},
/// sigma1 = (st + sigma) / 2. Requires gamma_mode == kC1.
DwellEstimate tau_breve(const DwellInputs& inputs);
/// tau_bar for non-decreasing gamma, tau_breve otherwise (tau^0).
DwellEstimate tau0_select(const DwellInputs& inputs);

struct TauMinOptions {
  std::size_t n_anchors = 256;
  double safety = 1.1;
  /// Per-anchor constants over B(anchor); otherwise one estimate over the
  /// whole region is reused for every anchor (never larger, still valid).
  bool per_anchor = true;
  SamplingOptions sampling{512, 1.25, 0, 1e-12, false, 6, 100.0};
  BoxPolicy box{};
  /// Near-origin divergence scan for the whole-region M estimate.
  bool check_region_divergence = true;
};

struct DwellPolicyInputs {
  double sigma = 0.9;
  std::optional<double> sigma_tilde;  // set both to get inf tau^0
  std::optional<double> k_big;
};

struct TauMinResult {
  double value = 0.0;     // raw_min / safety
  double raw_min = 0.0;
  DwellBranch branch = DwellBranch::kRate;
  StateVector argmin_anchor;
  CertificateConstants region_constants;  // estimated over the whole region
  std::size_t n_anchors = 0;
  bool periodic = false;
};

/// Sampled inf over B(x0) of tau (or tau^0 when sigma_tilde and K are given).
/// Constants for the whole region are always estimated (and reported); with
/// the divergence scan on, a non-degeneracy failure surfaces here.
TauMinResult tau_min_over_sublevel(const ControlSystem& sys,
                                   const ClfCertificate& cert,
                                   const SublevelRegion& region,
                                   const DwellPolicyInputs& policy,
                                   const TauMinOptions& options = {});

/// Dwell estimate at a single anchor x*: tau(x*) or tau^0(x*), with
/// constants sampled over B(x*).
DwellEstimate tau_at(const ControlSystem& sys, const ClfCertificate& cert,
                     const StateVector& anchor,
                     const DwellPolicyInputs& policy,
                     const SamplingOptions& sampling,
                     const BoxPolicy& box = {});

}  // namespace clf_etc
