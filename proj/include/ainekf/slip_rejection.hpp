// Mahalanobis gate on the velocity-kinematics innovation.

#ifndef AINEKF_SLIP_REJECTION_HPP
#define AINEKF_SLIP_REJECTION_HPP

#include "ainekf/adaptive_noise.hpp"

namespace ainekf {

struct SlipDecision {
  double distance = 0.0;  ///< squared Mahalanobis distance d_i
  bool rejected = false;
};

/// d = e^T S^-1 e with S = H_v P- H_v^T + R Q_v R^T. An ill-conditioned S is
/// treated as a rejection.
template <int N>
[[nodiscard]] SlipDecision mahalanobis(const Vec3& e, const CovMat<N>& P_minus,
                                       const GroupState<N>& chi,
                                       const NoiseConfig& cfg) {
  const Mat3 S = P_minus.template block<3, 3>(3, 3) +
                 chi.R * cfg.velocity_covariance() * chi.R.transpose();
  const Eigen::LLT<Mat3> llt(S);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-12)) {
    return {std::numeric_limits<double>::infinity(), true};
  }
  const double d = e.dot(llt.solve(e));
  return {d, d > cfg.slip_threshold};
}

/// Legs rejected this tick are treated as swinging: their foot noise becomes
/// Q_swing and the covariance prediction is re-run from the snapshot. Returns
/// the stance mask that remains eligible for the position update.
template <int N>
std::array<bool, N> apply_rejection(FilterState<N>& state, const CovMat<N>& P_prev,
                                    const PropagationJacobians<N>& jac,
                                    const std::array<bool, N>& stance,
                                    const std::array<SlipDecision, N>& decisions,
                                    const AlphaSet<N>& alpha,
                                    const NoiseConfig& cfg) {
  std::array<bool, N> kept = stance;
  bool any = false;
  for (std::size_t i = 0; i < static_cast<std::size_t>(N); ++i) {
    if (stance[i] && decisions[i].rejected) {
      kept[i] = false;
      any = true;
    }
  }
  if (any) {
    state.P = predict_covariance(P_prev, jac, build_Q<N>(kept, cfg, alpha));
  }
  return kept;
}

}  // namespace ainekf

#endif  // AINEKF_SLIP_REJECTION_HPP
