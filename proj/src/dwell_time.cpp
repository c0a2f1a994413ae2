#include "clf_etc/dwell_time.hpp"

#include <cmath>
#include <vector>

#include "clf_etc/errors.hpp"
#include "clf_etc/sampling.hpp"

namespace clf_etc {
namespace {

constexpr std::uint64_t kStreamAnchors = 0x414e4348ULL;

// min{rate_term, cap}; ties go to the rate branch.
DwellEstimate pick(double rate_term, double cap, const DwellInputs& inputs) {
  DwellEstimate e;
  e.inputs = inputs;
  if (rate_term <= cap) {
    e.value = rate_term;
    e.branch = DwellBranch::kRate;
  } else {
    e.value = cap;
    e.branch = DwellBranch::kLipschitzCap;
  }
  return e;
}

double lipschitz_cap(const CertificateConstants& c) {
  return 1.0 / (1.0 + 2.0 * c.kappa);
}

// (num)^2 / (mu M)^2 * scale, +inf when mu M == 0.
double rate_term(double num, double scale, const CertificateConstants& c) {
  const double mm = c.mu * c.big_m;
  if (!(mm > 0.0)) return kInf;
  return num * num * scale / (mm * mm);
}

void require_rho(const DwellInputs& inputs, const char* who) {
  if (inputs.gamma_mode != GammaMode::kC1) {
    throw ConfigError(std::string(who) +
                      ": needs the C1 gamma mode; use the selecting variant");
  }
}

DwellEstimate with_rho_branch(DwellEstimate base, double numer, double denom) {
  if (denom > 0.0) {
    const double rho_term = numer / denom;
    if (rho_term < base.value) {
      base.value = rho_term;
      base.branch = DwellBranch::kRho;
    }
  }
  return base;
}

}  // namespace

GammaMode gamma_mode_for(const RateFunction& rate) {
  if (rate.monotone_nondecreasing()) return GammaMode::kNondecreasing;
  if (rate.has_derivative()) return GammaMode::kC1;
  throw ConfigError(
      "gamma must be flagged non-decreasing or come with its derivative");
}

void DwellInputs::validate() const {
  if (!(sigma > 0.0 && sigma < 1.0)) {
    throw DomainError("sigma must lie in (0, 1)");
  }
  if (sigma_tilde && !(*sigma_tilde > sigma && *sigma_tilde < 1.0)) {
    throw DomainError("sigma_tilde must lie in (sigma, 1)");
  }
  if (k_big && !(*k_big > 1.0)) throw DomainError("K must exceed 1");
  constants.validate();
}

void DwellInputs::require_periodic() const {
  if (!sigma_tilde || !k_big) {
    throw DomainError("periodic dwell needs both sigma_tilde and K");
  }
  validate();
}

std::string to_string(DwellBranch branch) {
  switch (branch) {
    case DwellBranch::kRate: return "rate";
    case DwellBranch::kLipschitzCap: return "lipschitz_cap";
    case DwellBranch::kRho: return "rho";
  }
  return "unknown";
}

double c_bound(double kappa, double t) {
  if (t < 0.0) throw DomainError("c_bound: t must be non-negative");
  const double a = 2.0 * kappa + 1.0;
  if (a * t < 1e-8) return std::sqrt(t);
  return std::sqrt(std::expm1(a * t) / a);
}

DwellEstimate tau_tilde(const DwellInputs& inputs) {
  inputs.validate();
  const auto& c = inputs.constants;
  return pick(rate_term(1.0 - inputs.sigma, 1.0, c), lipschitz_cap(c), inputs);
}

DwellEstimate tau_hat(const DwellInputs& inputs) {
  inputs.validate();
  require_rho(inputs, "tau_hat");
  const double s = inputs.sigma;
  const double s0 = 0.5 * (1.0 + s);
  DwellInputs at_s0 = inputs;
  at_s0.sigma = s0;
  DwellEstimate e = tau_tilde(at_s0);
  e.inputs = inputs;
  return with_rho_branch(e, s0 - s, s * (2.0 - s0) * inputs.constants.rho);
}

DwellEstimate tau_select(const DwellInputs& inputs) {
  return inputs.gamma_mode == GammaMode::kNondecreasing ? tau_tilde(inputs)
                                                        : tau_hat(inputs);
}

DwellEstimate tau_bar(const DwellInputs& inputs) {
  inputs.require_periodic();
  const auto& c = inputs.constants;
  const double st = *inputs.sigma_tilde;
  const double k = *inputs.k_big;
  return pick(rate_term(st - inputs.sigma, 1.0 / (k * k * st * st), c),
              lipschitz_cap(c), inputs);
}

DwellEstimate tau_breve(const DwellInputs& inputs) {
  inputs.require_periodic();
  require_rho(inputs, "tau_breve");
  const double s = inputs.sigma;
  const double st = *inputs.sigma_tilde;
  const double s1 = 0.5 * (st + s);
  DwellInputs at_s1 = inputs;
  at_s1.sigma = s1;
  DwellEstimate e = tau_bar(at_s1);
  e.inputs = inputs;
  return with_rho_branch(e, s1 - s, s * (2.0 * st - s1) * inputs.constants.rho);
}

DwellEstimate tau0_select(const DwellInputs& inputs) {
  return inputs.gamma_mode == GammaMode::kNondecreasing ? tau_bar(inputs)
                                                        : tau_breve(inputs);
}

namespace {

DwellInputs make_inputs(const CertificateConstants& constants,
                        const DwellPolicyInputs& policy, GammaMode mode) {
  DwellInputs in;
  in.constants = constants;
  in.sigma = policy.sigma;
  in.sigma_tilde = policy.sigma_tilde;
  in.k_big = policy.k_big;
  in.gamma_mode = mode;
  return in;
}

bool wants_periodic(const DwellPolicyInputs& policy) {
  return policy.sigma_tilde.has_value() && policy.k_big.has_value();
}

DwellEstimate evaluate(const DwellInputs& in, bool periodic) {
  return periodic ? tau0_select(in) : tau_select(in);
}

}  // namespace

DwellEstimate tau_at(const ControlSystem& sys, const ClfCertificate& cert,
                     const StateVector& anchor,
                     const DwellPolicyInputs& policy,
                     const SamplingOptions& sampling, const BoxPolicy& box) {
  const GammaMode mode = gamma_mode_for(cert.rate());
  const SublevelRegion region = bound_sublevel_box(cert, anchor, box);
  const CertificateConstants constants =
      estimate_constants(sys, cert, region, sampling);
  return evaluate(make_inputs(constants, policy, mode), wants_periodic(policy));
}

TauMinResult tau_min_over_sublevel(const ControlSystem& sys,
                                   const ClfCertificate& cert,
                                   const SublevelRegion& region,
                                   const DwellPolicyInputs& policy,
                                   const TauMinOptions& options) {
  if (!(options.safety >= 1.0)) throw DomainError("tau_min: safety must be >= 1");
  const GammaMode mode = gamma_mode_for(cert.rate());
  const bool periodic = wants_periodic(policy);

  SamplingOptions region_sampling = options.sampling;
  region_sampling.check_divergence = options.check_region_divergence;
  TauMinResult result;
  result.periodic = periodic;
  result.region_constants = estimate_constants(sys, cert, region, region_sampling);
  const DwellInputs region_inputs =
      make_inputs(result.region_constants, policy, mode);
  region_inputs.validate();

  std::vector<StateVector> anchors = sample_sublevel(
      cert, region, options.n_anchors, options.sampling.seed ^ kStreamAnchors);
  std::vector<DwellEstimate> estimates(anchors.size());
  if (options.per_anchor) {
    parallel_for(anchors.size(), [&](std::size_t i) {
      BoxPolicy box = options.box;
      box.seed = options.box.seed + i;
      const SublevelRegion sub = bound_sublevel_box(cert, anchors[i], box);
      const CertificateConstants c =
          estimate_constants(sys, cert, sub, options.sampling);
      estimates[i] = evaluate(make_inputs(c, policy, mode), periodic);
    });
  } else {
    const DwellEstimate e = evaluate(region_inputs, periodic);
    for (auto& slot : estimates) slot = e;
  }

  // B(x) is a subset of B(x0) for every anchor, so region constants bound
  // the per-anchor ones; a degenerate anchor still gets a finite estimate.
  std::size_t best = 0;
  for (std::size_t i = 1; i < estimates.size(); ++i) {
    if (estimates[i].value < estimates[best].value) best = i;
  }
  if (estimates.empty()) {
    estimates.push_back(evaluate(region_inputs, periodic));
    anchors.push_back(region.anchor);
  }
  result.raw_min = estimates[best].value;
  result.branch = estimates[best].branch;
  result.argmin_anchor = anchors[best];
  result.n_anchors = anchors.size();
  result.value = result.raw_min / options.safety;
  return result;
}

}  // namespace clf_etc
