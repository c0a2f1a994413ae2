#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cstdint>
#include <random>
#include <vector>

#include "clf_etc/models.hpp"

namespace clf_etc::testing {

/// Uniform point in the ball of the given radius (rejection from the cube).
inline StateVector ball_point(std::mt19937_64& rng, int dim, double radius) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    StateVector x(dim);
    for (int i = 0; i < dim; ++i) x[i] = u(rng);
    if (x.norm() <= 1.0 && x.norm() > 1e-3) return radius * x;
  }
}

inline std::vector<StateVector> ball_points(std::uint64_t seed, int dim,
                                            double radius, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::vector<StateVector> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(ball_point(rng, dim, radius));
  return out;
}

/// Frozen-input ACC flow computed in vehicle coordinates (gap d, speed v,
/// acceleration a) with the leader at constant speed v0:
///   d' = v0 - v,  v' = a,  tau a' + a = u.
/// The affine system is solved exactly with the exponential of the augmented
/// matrix, then mapped into backstepping coordinates.
inline StateVector acc_oracle(const AccParams& p, const StateVector& x0,
                              double u, double t) {
  const VehicleState s0 = acc_from_state(p, x0);
  Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
  a(0, 1) = -1.0;
  a(0, 3) = p.v0;
  a(1, 2) = 1.0;
  a(2, 2) = -1.0 / p.tau;
  a(2, 3) = u / p.tau;
  const Eigen::Vector4d z0(s0.d, s0.v, s0.a, 1.0);
  const Eigen::Matrix4d e = (a * t).exp();
  const Eigen::Vector4d z = e * z0;
  return acc_to_state(p, VehicleState{z[0], z[1], z[2]});
}

}  // namespace clf_etc::testing
