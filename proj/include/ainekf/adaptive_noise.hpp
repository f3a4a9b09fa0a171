// Foot-noise estimation: velocity-kinematics innovation, windowed innovation
// covariance, covariance matching and per-axis scaling of the contact-foot
// process noise.

#ifndef AINEKF_ADAPTIVE_NOISE_HPP
#define AINEKF_ADAPTIVE_NOISE_HPP

#include "ainekf/legged_model.hpp"

#include <algorithm>

namespace ainekf {

/// e = s_v (chi Y_v - b_v) = R_hat (-w^ p~ - v~) - v_hat, in the world frame.
/// `omega` is the bias-corrected body rate.
template <int N>
[[nodiscard]] Vec3 velocity_innovation(const GroupState<N>& chi, const Vec3& omega,
                                       const Vec3& rel_pos, const Vec3& rel_vel) {
  const Vec3 y = -omega.cross(rel_pos) - rel_vel;
  return chi.R * y - chi.v();
}

/// Moving average of the last m innovation outer products. Slots not yet
/// filled count as zero.
class InnovationWindow {
 public:
  explicit InnovationWindow(int size = 10);

  /// Pushes e e^T and returns U = (1/m) sum of the buffer.
  const Mat3& push(const Vec3& e);
  void reset();

  [[nodiscard]] int size() const { return size_; }
  [[nodiscard]] int filled() const { return filled_; }
  [[nodiscard]] const Mat3& covariance() const { return mean_; }

 private:
  std::array<Mat3, kMaxWindow> buffer_;
  int size_;
  int head_ = 0;
  int filled_ = 0;
  Mat3 mean_ = Mat3::Zero();
};

/// Q_uf = R^T (U - H_v P- H_v^T) R - Q_v, alpha_jj = clamp(Q_uf,jj / Q_f,jj, 1, alpha_max).
template <int N>
[[nodiscard]] Vec3 estimate_alpha(const Mat3& U, const CovMat<N>& P_minus,
                                  const GroupState<N>& chi,
                                  const NoiseConfig& cfg) {
  const Mat3 HPH = P_minus.template block<3, 3>(3, 3);
  const Mat3 Q_uf = chi.R.transpose() * (U - HPH) * chi.R - cfg.velocity_covariance();
  const Vec3 qf = cfg.foot_noise.cwiseAbs2();
  Vec3 alpha;
  for (int j = 0; j < 3; ++j) {
    alpha(j) = std::clamp(Q_uf(j, j) / qf(j), 1.0, cfg.alpha_max);
  }
  return alpha;
}

/// Re-runs the covariance prediction from the pre-prediction snapshot with the
/// contact-foot noise scaled by alpha. The mean is not touched.
template <int N>
void apply_adaptive_prediction(FilterState<N>& state, const CovMat<N>& P_prev,
                               const PropagationJacobians<N>& jac,
                               const std::array<bool, N>& stance,
                               const AlphaSet<N>& alpha, const NoiseConfig& cfg) {
  state.P = predict_covariance(P_prev, jac, build_Q<N>(stance, cfg, alpha));
}

}  // namespace ainekf

#endif  // AINEKF_ADAPTIVE_NOISE_HPP
