// Discrete-time right-invariant EKF on SE_{2+N}(3) with additive IMU bias
// augmentation.
//
// Error state ordering: (xi_R, xi_v, xi_p, xi_r1..xi_rN, eps_bw, eps_ba), where
// the group part is the right-invariant error chi_hat * chi^-1 and the bias part
// is b_hat - b. Corrections are applied on the left: chi+ = Exp(K_xi z) chi-.

#ifndef AINEKF_INVARIANT_EKF_HPP
#define AINEKF_INVARIANT_EKF_HPP

#include "ainekf/lie_group.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <random>
#include <span>

namespace ainekf {

template <int N>
inline constexpr int kErrorDim = kTangentDim<N> + 6;

template <int N>
using ErrorVec = Eigen::Matrix<double, kErrorDim<N>, 1>;

template <int N>
using CovMat = Eigen::Matrix<double, kErrorDim<N>, kErrorDim<N>>;

using Vec6 = Eigen::Matrix<double, 6, 1>;

template <int N>
struct FilterState {
  GroupState<N> chi;
  /// (b_w [rad/s], b_a [m/s^2]) in the body frame.
  Vec6 bias = Vec6::Zero();
  CovMat<N> P = CovMat<N>::Identity();

  auto gyro_bias() const { return bias.template head<3>(); }
  auto accel_bias() const { return bias.template tail<3>(); }
};

/// One right-invariant observation Y = chi^-1 b + V, reduced to its first three
/// rows by the selection s = (I 0 ... 0).
template <int N>
struct ObservationBlock {
  Eigen::Matrix<double, 5 + N, 1> Y = Eigen::Matrix<double, 5 + N, 1>::Zero();
  Eigen::Matrix<double, 5 + N, 1> b = Eigen::Matrix<double, 5 + N, 1>::Zero();
  /// Satisfies H xi = -s xi^ b on the group part; bias columns are zero.
  Eigen::Matrix<double, 3, kErrorDim<N>> H =
      Eigen::Matrix<double, 3, kErrorDim<N>>::Zero();
  Mat3 M = Mat3::Identity();
  Mat3 Ncov = Mat3::Identity();
};

/// Continuous error dynamics d/dt e = A e + blockdiag(Ad_chi, I) w, E[ww^T] = Qc.
template <int N>
struct LinearizedDynamics {
  CovMat<N> A = CovMat<N>::Zero();
  CovMat<N> Qc = CovMat<N>::Zero();
  double T = 1e-3;
};

enum class Discretization {
  kFirstOrder,   ///< A_d = I + A T, Q_d = Q T
  kExponential,  ///< A_d = exp(A T), Q_d by Van Loan
};

enum class FilterStatus {
  kOk,
  kNonFinite,           ///< NaN/Inf in the state or covariance
  kSingularInnovation,  ///< S too ill-conditioned; update skipped
};

/// Discrete transition and noise-injection matrices for one prediction. Kept so
/// that the covariance prediction can be re-run with a different Qc.
template <int N>
struct PropagationJacobians {
  CovMat<N> Phi = CovMat<N>::Identity();
  CovMat<N> G = CovMat<N>::Identity();
  CovMat<N> A = CovMat<N>::Zero();
  double T = 1e-3;
  Discretization mode = Discretization::kFirstOrder;
};

template <int N>
void symmetrize(CovMat<N>& P) {
  P = 0.5 * (P + P.transpose()).eval();
}

/// G = blockdiag(Ad_chi, I_6).
template <int N>
[[nodiscard]] CovMat<N> noise_injection(const GroupState<N>& chi) {
  CovMat<N> G = CovMat<N>::Identity();
  G.template topLeftCorner<kTangentDim<N>, kTangentDim<N>>() = adjoint(chi);
  return G;
}

template <int N>
[[nodiscard]] PropagationJacobians<N> make_jacobians(
    const LinearizedDynamics<N>& dyn, const GroupState<N>& chi_pred,
    Discretization mode) {
  PropagationJacobians<N> jac;
  jac.A = dyn.A;
  jac.T = dyn.T;
  jac.mode = mode;
  jac.G = noise_injection(chi_pred);
  if (mode == Discretization::kFirstOrder) {
    jac.Phi = CovMat<N>::Identity() + dyn.A * dyn.T;
  } else {
    jac.Phi = (dyn.A * dyn.T).exp();
  }
  return jac;
}

/// P- = Phi P Phi^T + Q_d, with Q_d built from G Qc G^T per the discretization.
template <int N>
[[nodiscard]] CovMat<N> predict_covariance(const CovMat<N>& P_prev,
                                           const PropagationJacobians<N>& jac,
                                           const CovMat<N>& Qc) {
  constexpr int K = kErrorDim<N>;
  CovMat<N> P;
  CovMat<N> tmp;
  tmp.noalias() = jac.Phi * P_prev;
  P.noalias() = tmp * jac.Phi.transpose();
  if (jac.mode == Discretization::kFirstOrder) {
    tmp.noalias() = jac.G * Qc;
    P.noalias() += jac.T * tmp * jac.G.transpose();
  } else {
    // Van Loan: exp([[-A, GQG^T], [0, A^T]] T) = [[., Phi^-1 Qd], [0, Phi^T]].
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(2 * K, 2 * K);
    M.topLeftCorner(K, K) = -jac.A;
    M.topRightCorner(K, K) = jac.G * Qc * jac.G.transpose();
    M.bottomRightCorner(K, K) = jac.A.transpose();
    const Eigen::MatrixXd E = (M * jac.T).exp();
    const CovMat<N> Phi = E.bottomRightCorner(K, K).transpose();
    P += Phi * E.topRightCorner(K, K);
  }
  symmetrize<N>(P);
  return P;
}

/// Propagates mean and covariance. `mean_fn` is the discretized plant f^d and
/// maps the posterior group state to the prior one; biases follow a random walk.
template <int N, typename MeanFn>
[[nodiscard]] FilterStatus propagate(FilterState<N>& state,
                                     const LinearizedDynamics<N>& dyn,
                                     MeanFn&& mean_fn,
                                     Discretization mode = Discretization::kFirstOrder) {
  state.chi = mean_fn(state.chi);
  const PropagationJacobians<N> jac = make_jacobians(dyn, state.chi, mode);
  state.P = predict_covariance(state.P, jac, dyn.Qc);
  if (!state.P.allFinite() || !state.chi.is_valid(1e-6)) {
    return FilterStatus::kNonFinite;
  }
  return FilterStatus::kOk;
}

/// s (chi_hat Y - b): the first three rows of the embedded residual.
template <int N>
[[nodiscard]] Vec3 observation_residual(const GroupState<N>& chi,
                                        const ObservationBlock<N>& block) {
  Vec3 r = chi.R * block.Y.template head<3>();
  r.noalias() += chi.translations * block.Y.template tail<2 + N>();
  return r - block.b.template head<3>();
}

/// Upper bound on the number of stacked blocks accepted by update().
template <int N>
inline constexpr int kMaxBlocks = N + 2;

/// Stacked right-invariant update. On kSingularInnovation the state is left
/// untouched.
template <int N>
[[nodiscard]] FilterStatus update(FilterState<N>& state,
                                  std::span<const ObservationBlock<N>> blocks) {
  constexpr int K = kErrorDim<N>;
  constexpr int kMaxRows = 3 * kMaxBlocks<N>;
  using StackedH = Eigen::Matrix<double, Eigen::Dynamic, K, Eigen::RowMajor, kMaxRows, K>;
  using StackedVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxRows, 1>;
  using StackedS = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxRows, kMaxRows>;
  using GainT = Eigen::Matrix<double, Eigen::Dynamic, K, 0, kMaxRows, K>;

  if (blocks.empty()) {
    return FilterStatus::kOk;
  }
  if (blocks.size() > static_cast<std::size_t>(kMaxBlocks<N>)) {
    throw std::invalid_argument("too many observation blocks in one update");
  }
  const int rows = 3 * static_cast<int>(blocks.size());

  StackedH H(rows, K);
  StackedVec z(rows);
  StackedS S = StackedS::Zero(rows, rows);
  for (int i = 0; i < static_cast<int>(blocks.size()); ++i) {
    const auto& blk = blocks[static_cast<std::size_t>(i)];
    H.template middleRows<3>(3 * i) = blk.H;
    z.template segment<3>(3 * i) = observation_residual(state.chi, blk);
    S.template block<3, 3>(3 * i, 3 * i) = blk.M * blk.Ncov * blk.M.transpose();
  }

  GainT HP(rows, K);
  HP.noalias() = H * state.P;
  S.noalias() += HP * H.transpose();

  Eigen::LLT<StackedS> llt(S);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-12)) {
    return FilterStatus::kSingularInnovation;
  }
  // K^T = S^-1 H P, since P and S are symmetric.
  const GainT KT = llt.solve(HP);

  ErrorVec<N> delta;
  delta.noalias() = KT.transpose() * z;
  state.chi = compose(exp_se2n3<N>(delta.template head<kTangentDim<N>>()), state.chi);
  state.chi.R = project_to_so3(state.chi.R);
  state.bias += delta.template tail<6>();

  state.P.noalias() -= KT.transpose() * HP;
  symmetrize<N>(state.P);

  if (!state.P.allFinite() || !state.chi.translations.allFinite()) {
    return FilterStatus::kNonFinite;
  }
  return FilterStatus::kOk;
}

/// log(est * truth^-1); used for evaluation and consistency statistics only.
template <int N>
[[nodiscard]] TangentVec<N> right_invariant_error(const GroupState<N>& est,
                                                  const GroupState<N>& truth) {
  return log_se2n3(compose(est, inverse(truth)));
}

/// Largest violation of the group-affine condition
///   f(X1 X2) = f(X1) X2 + X1 f(X2) - X1 f(I) X2
/// over random group elements and inputs. `f(X, u)` returns the time derivative
/// of the embedding matrix X; `sample_input(rng)` draws an input u.
template <int N, typename PlantFn, typename InputSampler>
[[nodiscard]] double check_group_affine(PlantFn&& f, InputSampler&& sample_input,
                                        int samples, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random_state = [&]() {
    TangentVec<N> xi;
    for (int i = 0; i < xi.size(); ++i) {
      xi(i) = normal(rng);
    }
    return exp_se2n3<N>(xi).matrix();
  };
  const EmbeddingMat<N> I = EmbeddingMat<N>::Identity();
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    const EmbeddingMat<N> X1 = random_state();
    const EmbeddingMat<N> X2 = random_state();
    const auto u = sample_input(rng);
    const EmbeddingMat<N> residual =
        f(X1 * X2, u) - f(X1, u) * X2 - X1 * f(X2, u) + X1 * f(I, u) * X2;
    worst = std::max(worst, residual.norm());
  }
  return worst;
}

}  // namespace ainekf

#endif  // AINEKF_INVARIANT_EKF_HPP
