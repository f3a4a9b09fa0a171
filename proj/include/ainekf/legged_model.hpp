// Legged-robot instantiation of the right-invariant EKF: IMU strapdown plant,
// error dynamics, contact-switched process noise and the forward-kinematics
// position measurement.

#ifndef AINEKF_LEGGED_MODEL_HPP
#define AINEKF_LEGGED_MODEL_HPP

#include "ainekf/invariant_ekf.hpp"

#include <array>

namespace ainekf {

struct ImuSample {
  double t = 0.0;
  Vec3 gyro = Vec3::Zero();   ///< rad/s, body frame
  Vec3 accel = Vec3::Zero();  ///< m/s^2, body frame (specific force)
};

/// Body-frame forward kinematics of every leg, one column per leg.
template <int N>
struct LegKinSample {
  Eigen::Matrix<double, 3, N> rel_pos = Eigen::Matrix<double, 3, N>::Zero();
  Eigen::Matrix<double, 3, N> rel_vel = Eigen::Matrix<double, 3, N>::Zero();
};

template <int N>
struct ContactVector {
  std::array<bool, N> flag{};
  std::array<double, N> probability{};
};

/// Noise densities, measurement covariances and adaptation settings. Continuous
/// densities are standard deviations per sqrt(Hz).
struct NoiseConfig {
  double gyro_noise = 0.005;       ///< w_omega [rad/s/sqrt(Hz)]
  double accel_noise = 0.05;       ///< w_a [m/s^2/sqrt(Hz)]
  double gyro_bias_walk = 1e-4;    ///< w_bomega
  double accel_bias_walk = 1e-4;   ///< w_ba
  Vec3 foot_noise = Vec3::Constant(0.02);  ///< w_f per body axis, in contact
  double swing_foot_variance = 1e4;        ///< Q_swing = value * I
  double kinematic_noise = 0.01;           ///< w_p [m], N_p = w_p^2 I
  Vec3 velocity_kinematic_noise = Vec3::Constant(0.05);  ///< w_v [m/s], Q_v = diag(w_v^2)
  int window = 10;                  ///< innovation window m
  double alpha_max = 9.0;
  double slip_threshold = 7.81;     ///< sigma on the squared Mahalanobis distance
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);

  [[nodiscard]] Mat3 foot_covariance() const {
    return foot_noise.cwiseAbs2().asDiagonal();
  }
  [[nodiscard]] Mat3 velocity_covariance() const {
    return velocity_kinematic_noise.cwiseAbs2().asDiagonal();
  }
  [[nodiscard]] Mat3 kinematic_covariance() const {
    return kinematic_noise * kinematic_noise * Mat3::Identity();
  }

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

inline constexpr int kMaxWindow = 64;

// -----------------------------------------------------------------------------
// Plant
// -----------------------------------------------------------------------------

template <int N>
struct PlantRates {
  Mat3 R_dot = Mat3::Zero();
  /// Columns: v_dot, p_dot, r_dot_1..N.
  Eigen::Matrix<double, 3, 2 + N> translation_rates =
      Eigen::Matrix<double, 3, 2 + N>::Zero();
  Vec6 bias_rate = Vec6::Zero();
};

/// Noise-free mean of the continuous plant with bias-corrected IMU inputs.
template <int N>
[[nodiscard]] PlantRates<N> plant_dynamics(const GroupState<N>& chi,
                                           const Vec6& bias,
                                           const ImuSample& imu,
                                           const Vec3& gravity) {
  const Vec3 omega = imu.gyro - bias.head<3>();
  const Vec3 accel = imu.accel - bias.tail<3>();
  PlantRates<N> rates;
  rates.R_dot = chi.R * hat(omega);
  rates.translation_rates.col(0) = chi.R * accel + gravity;
  rates.translation_rates.col(1) = chi.v();
  return rates;
}

struct PlantInput {
  Vec3 omega = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
};

/// The same plant written on the (5+N)x(5+N) embedding, for group-affine checks.
template <int N>
[[nodiscard]] EmbeddingMat<N> plant_matrix(const EmbeddingMat<N>& X,
                                           const PlantInput& u) {
  EmbeddingMat<N> F = EmbeddingMat<N>::Zero();
  const Mat3 R = X.template topLeftCorner<3, 3>();
  F.template topLeftCorner<3, 3>() = R * hat(u.omega);
  F.template block<3, 1>(0, 3) = R * u.accel + u.gravity;
  F.template block<3, 1>(0, 4) = X.template block<3, 1>(0, 3);
  return F;
}

/// Discretized mean f^d: R <- R exp(w T), v <- v + R J(wT) a T + g T,
/// p <- p + v T + R J2(wT) a T^2 + g T^2 / 2, feet constant. `omega`, `accel`
/// are bias-corrected.
template <int N>
[[nodiscard]] GroupState<N> integrate_mean(const GroupState<N>& chi,
                                           const Vec3& omega, const Vec3& accel,
                                           double T, const Vec3& gravity) {
  // Exact for constant body rate and specific force over the interval.
  GroupState<N> out = chi;
  const Vec3 phi = omega * T;
  out.R = chi.R * exp_so3(phi);
  out.v() = chi.v() + chi.R * (left_jacobian_so3(phi) * accel) * T + gravity * T;
  out.p() = chi.p() + chi.v() * T + chi.R * (second_integral_so3(phi) * accel) * (T * T) +
            0.5 * T * T * gravity;
  return out;
}

// -----------------------------------------------------------------------------
// Error dynamics and noise
// -----------------------------------------------------------------------------

/// Error-propagation matrix over (xi, eps_bw, eps_ba).
template <int N>
[[nodiscard]] CovMat<N> build_A(const GroupState<N>& chi, const Vec3& gravity) {
  constexpr int kBw = kTangentDim<N>;
  constexpr int kBa = kBw + 3;
  CovMat<N> A = CovMat<N>::Zero();
  A.template block<3, 3>(3, 0) = hat(gravity);
  A.template block<3, 3>(6, 3) = Mat3::Identity();
  A.template block<3, 3>(0, kBw) = -chi.R;
  for (int j = 0; j < 2 + N; ++j) {
    A.template block<3, 3>(3 + 3 * j, kBw).noalias() =
        -hat(chi.translations.col(j)) * chi.R;
  }
  A.template block<3, 3>(3, kBa) = -chi.R;
  return A;
}

/// Per-leg diagonal foot-noise scale; 1 means nominal.
template <int N>
using AlphaSet = std::array<Vec3, N>;

template <int N>
[[nodiscard]] AlphaSet<N> unit_alpha() {
  AlphaSet<N> a;
  a.fill(Vec3::Ones());
  return a;
}

/// Continuous process covariance. A leg's foot block is alpha * Q_f while
/// `stance[i]` holds and Q_swing otherwise.
template <int N>
[[nodiscard]] CovMat<N> build_Q(const std::array<bool, N>& stance,
                                const NoiseConfig& cfg,
                                const AlphaSet<N>& alpha) {
  constexpr int kBw = kTangentDim<N>;
  CovMat<N> Q = CovMat<N>::Zero();
  Q.template block<3, 3>(0, 0).diagonal().setConstant(cfg.gyro_noise * cfg.gyro_noise);
  Q.template block<3, 3>(3, 3).diagonal().setConstant(cfg.accel_noise * cfg.accel_noise);
  const Vec3 qf = cfg.foot_noise.cwiseAbs2();
  for (int i = 0; i < N; ++i) {
    auto blk = Q.template block<3, 3>(9 + 3 * i, 9 + 3 * i).diagonal();
    if (stance[static_cast<std::size_t>(i)]) {
      blk = alpha[static_cast<std::size_t>(i)].cwiseProduct(qf);
    } else {
      blk.setConstant(cfg.swing_foot_variance);
    }
  }
  Q.template block<3, 3>(kBw, kBw).diagonal().setConstant(cfg.gyro_bias_walk * cfg.gyro_bias_walk);
  Q.template block<3, 3>(kBw + 3, kBw + 3).diagonal().setConstant(cfg.accel_bias_walk * cfg.accel_bias_walk);
  return Q;
}

// -----------------------------------------------------------------------------
// Kinematic position measurement
// -----------------------------------------------------------------------------

/// Y = (p~; 0; 1; -e_leg) = chi^-1 (0; 0; 1; -e_leg) + noise, with
/// H = (0 0 -I ... I ...), M = R_hat, N = N_p.
template <int N>
[[nodiscard]] ObservationBlock<N> build_position_observation(
    int leg, const Vec3& rel_pos, const GroupState<N>& chi_est,
    const NoiseConfig& cfg) {
  ObservationBlock<N> blk;
  blk.Y.template head<3>() = rel_pos;
  blk.Y(4) = 1.0;
  blk.Y(5 + leg) = -1.0;
  blk.b(4) = 1.0;
  blk.b(5 + leg) = -1.0;
  blk.H.template block<3, 3>(0, 6) = -Mat3::Identity();
  blk.H.template block<3, 3>(0, 9 + 3 * leg) = Mat3::Identity();
  blk.M = chi_est.R;
  blk.Ncov = cfg.kinematic_covariance();
  return blk;
}

}  // namespace ainekf

#endif  // AINEKF_LEGGED_MODEL_HPP
