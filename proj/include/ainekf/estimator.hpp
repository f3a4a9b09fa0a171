// Per-tick pipeline of the adaptive invariant EKF:
//   propagate -> foot-noise re-prediction (FE) -> slip-rejection re-prediction
//   (SR) -> kinematic position update.

#ifndef AINEKF_ESTIMATOR_HPP
#define AINEKF_ESTIMATOR_HPP

#include "ainekf/slip_rejection.hpp"

#include <stdexcept>

namespace ainekf {

enum class ImuIntegration {
  kPreviousSample,  ///< hold the sample at the start of the interval
  kTrapezoidal,     ///< average the samples bracketing the interval
};

struct EstimatorOptions {
  bool foot_noise_estimation = false;
  bool slip_rejection = false;
  Discretization discretization = Discretization::kFirstOrder;
  ImuIntegration imu_integration = ImuIntegration::kTrapezoidal;
};

template <int N>
struct TickDiagnostics {
  double t = 0.0;
  std::array<bool, N> contact{};
  std::array<bool, N> rejected{};
  std::array<bool, N> updated{};
  std::array<double, N> mahalanobis{};
  AlphaSet<N> alpha = unit_alpha<N>();
  std::array<Vec3, N> innovation{};
  Mat3 velocity_prior = Mat3::Zero();  ///< H_v P- H_v^T of the nominal prior
  FilterStatus status = FilterStatus::kOk;
};

template <int N>
class AdaptiveInvariantEkf {
 public:
  AdaptiveInvariantEkf(const NoiseConfig& cfg, const EstimatorOptions& options)
      : cfg_(cfg), options_(options) {
    cfg_.validate();
    for (auto& w : windows_) {
      w = InnovationWindow(cfg_.window);
    }
  }

  /// Sets the state at the time of `imu`; subsequent step() calls propagate
  /// from there.
  void initialize(const FilterState<N>& state, const ImuSample& imu) {
    state_ = state;
    prev_imu_ = imu;
    prev_stance_.fill(false);
    for (auto& w : windows_) {
      w.reset();
    }
    initialized_ = true;
  }

  [[nodiscard]] FilterStatus step(const ImuSample& imu, const LegKinSample<N>& kin,
                                  const ContactVector<N>& contact) {
    if (!initialized_) {
      throw std::logic_error("AdaptiveInvariantEkf::step before initialize");
    }
    const double T = imu.t - prev_imu_.t;
    if (!(T > 0.0) || !imu.gyro.allFinite() || !imu.accel.allFinite()) {
      throw std::invalid_argument("IMU samples must be finite with increasing time");
    }
    diag_ = TickDiagnostics<N>{};
    diag_.t = imu.t;
    diag_.contact = contact.flag;

    // Propagation with nominal foot noise.
    const Vec3 bw = state_.gyro_bias();
    const Vec3 ba = state_.accel_bias();
    Vec3 omega = prev_imu_.gyro - bw;
    Vec3 accel = prev_imu_.accel - ba;
    if (options_.imu_integration == ImuIntegration::kTrapezoidal) {
      omega = 0.5 * (prev_imu_.gyro + imu.gyro) - bw;
      accel = 0.5 * (prev_imu_.accel + imu.accel) - ba;
    }
    const CovMat<N> P_prev = state_.P;
    LinearizedDynamics<N> dyn;
    dyn.A = build_A(state_.chi, cfg_.gravity);
    dyn.T = T;
    state_.chi = integrate_mean(state_.chi, omega, accel, T, cfg_.gravity);
    const PropagationJacobians<N> jac =
        make_jacobians(dyn, state_.chi, options_.discretization);
    const std::array<bool, N>& stance = contact.flag;
    state_.P = predict_covariance(P_prev, jac, build_Q<N>(stance, cfg_, unit_alpha<N>()));
    prev_imu_ = imu;
    if (!state_.P.allFinite() || !state_.chi.translations.allFinite()) {
      return finish(FilterStatus::kNonFinite);
    }

    // Velocity-kinematics innovations against the nominal prior.
    const CovMat<N> P_nominal = state_.P;
    diag_.velocity_prior = P_nominal.template block<3, 3>(3, 3);
    // The innovation uses the same body-rate estimate as the propagation.
    const Vec3 omega_now = options_.imu_integration == ImuIntegration::kTrapezoidal
                               ? omega
                               : Vec3(imu.gyro - state_.gyro_bias());
    bool any_alpha = false;
    std::array<SlipDecision, N> decisions{};
    for (int i = 0; i < N; ++i) {
      const auto li = static_cast<std::size_t>(i);
      if (!stance[li]) {
        windows_[li].reset();
        continue;
      }
      if (!prev_stance_[li]) {
        windows_[li].reset();
      }
      const Vec3 e = velocity_innovation(state_.chi, omega_now, kin.rel_pos.col(i),
                                         kin.rel_vel.col(i));
      diag_.innovation[li] = e;
      const Mat3& U = windows_[li].push(e);
      diag_.alpha[li] = estimate_alpha<N>(U, P_nominal, state_.chi, cfg_);
      decisions[li] = mahalanobis<N>(e, P_nominal, state_.chi, cfg_);
      diag_.mahalanobis[li] = decisions[li].distance;
      any_alpha = any_alpha || (diag_.alpha[li].array() > 1.0).any();
    }
    prev_stance_ = stance;

    AlphaSet<N> alpha = unit_alpha<N>();
    if (options_.foot_noise_estimation) {
      alpha = diag_.alpha;
      if (any_alpha) {
        apply_adaptive_prediction<N>(state_, P_prev, jac, stance, alpha, cfg_);
      }
    }
    std::array<bool, N> eligible = stance;
    if (options_.slip_rejection) {
      eligible = apply_rejection<N>(state_, P_prev, jac, stance, decisions, alpha, cfg_);
      for (std::size_t i = 0; i < static_cast<std::size_t>(N); ++i) {
        diag_.rejected[i] = stance[i] && !eligible[i];
      }
    }

    // Position update with the legs still considered static.
    std::array<ObservationBlock<N>, kMaxBlocks<N>> blocks;
    std::size_t count = 0;
    for (int i = 0; i < N; ++i) {
      if (eligible[static_cast<std::size_t>(i)]) {
        blocks[count++] =
            build_position_observation<N>(i, kin.rel_pos.col(i), state_.chi, cfg_);
        diag_.updated[static_cast<std::size_t>(i)] = true;
      }
    }
    const FilterStatus status =
        update<N>(state_, std::span<const ObservationBlock<N>>(blocks.data(), count));
    return finish(status);
  }

  [[nodiscard]] const FilterState<N>& state() const { return state_; }
  [[nodiscard]] const TickDiagnostics<N>& diagnostics() const { return diag_; }
  [[nodiscard]] const NoiseConfig& config() const { return cfg_; }
  [[nodiscard]] const EstimatorOptions& options() const { return options_; }

 private:
  FilterStatus finish(FilterStatus status) {
    diag_.status = status;
    return status;
  }

  NoiseConfig cfg_;
  EstimatorOptions options_;
  FilterState<N> state_;
  ImuSample prev_imu_;
  bool initialized_ = false;
  std::array<bool, N> prev_stance_{};
  std::array<InnovationWindow, N> windows_;
  TickDiagnostics<N> diag_;
};

}  // namespace ainekf

#endif  // AINEKF_ESTIMATOR_HPP
