// SO(3) and SE_{2+N}(3) group operations.
//
// An element of SE_{2+N}(3) packs a rotation R together with 2+N translational
// columns: body velocity v, body position p and N contact (foot) positions.
// Tangent vectors are ordered (xi_R, xi_v, xi_p, xi_r1, ..., xi_rN).

#ifndef AINEKF_LIE_GROUP_HPP
#define AINEKF_LIE_GROUP_HPP

#include <Eigen/Core>
#include <Eigen/LU>

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace ainekf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// -----------------------------------------------------------------------------
// SO(3)
// -----------------------------------------------------------------------------

/// Skew-symmetric matrix such that hat(w) * y == w.cross(y).
[[nodiscard]] Mat3 hat(const Vec3& w);

/// Inverse of hat() for a skew-symmetric input; reads the antisymmetric part.
[[nodiscard]] Vec3 vee(const Mat3& W);

/// Rodrigues formula; 4th-order Taylor coefficients below |w| = 1e-6.
[[nodiscard]] Mat3 exp_so3(const Vec3& w);

/// Principal logarithm, |w| <= pi. The theta ~ pi branch is recovered from the
/// symmetric part of R.
[[nodiscard]] Vec3 log_so3(const Mat3& R);

/// Left Jacobian J_l(w) = sum_k (w^)^k / (k+1)!.
[[nodiscard]] Mat3 left_jacobian_so3(const Vec3& w);

/// Integral of left_jacobian_so3(s w) over s in [0, 1], i.e. the position
/// term of exact constant-rate integration.
[[nodiscard]] Mat3 second_integral_so3(const Vec3& w);
/// Inverse of left_jacobian_so3(); valid for |w| < 2 pi.
[[nodiscard]] Mat3 left_jacobian_inverse_so3(const Vec3& w);

/// One Newton step of the polar decomposition, R <- (R + R^-T) / 2.
[[nodiscard]] Mat3 project_to_so3(const Mat3& R);

/// ZYX (yaw-pitch-roll) Euler angles, returned as (roll, pitch, yaw).
[[nodiscard]] Vec3 euler_zyx(const Mat3& R);

[[nodiscard]] bool is_rotation(const Mat3& R, double tol = 1e-9);

// -----------------------------------------------------------------------------
// SE_{2+N}(3)
// -----------------------------------------------------------------------------

template <int N>
inline constexpr int kTangentDim = 9 + 3 * N;

template <int N>
using TangentVec = Eigen::Matrix<double, kTangentDim<N>, 1>;

template <int N>
using AdjointMat = Eigen::Matrix<double, kTangentDim<N>, kTangentDim<N>>;

/// (5+N)x(5+N) homogeneous embedding of a group or algebra element.
template <int N>
using EmbeddingMat = Eigen::Matrix<double, 5 + N, 5 + N>;

template <int N>
struct GroupState {
  static_assert(N >= 0, "number of contact points must be non-negative");
  static constexpr int kLegs = N;
  static constexpr int kDim = kTangentDim<N>;

  Mat3 R = Mat3::Identity();
  /// Columns: v, p, r_1, ..., r_N.
  Eigen::Matrix<double, 3, 2 + N> translations =
      Eigen::Matrix<double, 3, 2 + N>::Zero();

  [[nodiscard]] static GroupState identity() { return GroupState{}; }

  auto v() { return translations.col(0); }
  auto v() const { return translations.col(0); }
  auto p() { return translations.col(1); }
  auto p() const { return translations.col(1); }
  auto foot(int i) { return translations.col(2 + i); }
  auto foot(int i) const { return translations.col(2 + i); }

  [[nodiscard]] EmbeddingMat<N> matrix() const {
    EmbeddingMat<N> X = EmbeddingMat<N>::Identity();
    X.template topLeftCorner<3, 3>() = R;
    X.template topRightCorner<3, 2 + N>() = translations;
    return X;
  }

  [[nodiscard]] static GroupState from_matrix(const EmbeddingMat<N>& X) {
    GroupState g;
    g.R = X.template topLeftCorner<3, 3>();
    g.translations = X.template topRightCorner<3, 2 + N>();
    return g;
  }

  /// Finite entries and an orthonormal, right-handed rotation block.
  [[nodiscard]] bool is_valid(double tol = 1e-9) const {
    return R.allFinite() && translations.allFinite() && is_rotation(R, tol);
  }
};

template <int N>
[[nodiscard]] GroupState<N> compose(const GroupState<N>& a,
                                    const GroupState<N>& b) {
  GroupState<N> out;
  out.R = a.R * b.R;
  out.translations.noalias() = a.R * b.translations;
  out.translations += a.translations;
  return out;
}

template <int N>
[[nodiscard]] GroupState<N> inverse(const GroupState<N>& a) {
  GroupState<N> out;
  out.R = a.R.transpose();
  out.translations.noalias() = -out.R * a.translations;
  return out;
}

/// Lie algebra embedding xi^ of a tangent vector.
template <int N>
[[nodiscard]] EmbeddingMat<N> hat_se2n3(const TangentVec<N>& xi) {
  EmbeddingMat<N> X = EmbeddingMat<N>::Zero();
  X.template topLeftCorner<3, 3>() = hat(xi.template head<3>());
  for (int j = 0; j < 2 + N; ++j) {
    X.template block<3, 1>(0, 3 + j) = xi.template segment<3>(3 + 3 * j);
  }
  return X;
}

/// Exp: R = exp_so3(xi_R), every translational block is J_l(xi_R) * xi_x.
template <int N>
[[nodiscard]] GroupState<N> exp_se2n3(const TangentVec<N>& xi) {
  const Vec3 phi = xi.template head<3>();
  const Mat3 J = left_jacobian_so3(phi);
  GroupState<N> out;
  out.R = exp_so3(phi);
  for (int j = 0; j < 2 + N; ++j) {
    out.translations.col(j).noalias() = J * xi.template segment<3>(3 + 3 * j);
  }
  return out;
}

template <int N>
[[nodiscard]] TangentVec<N> log_se2n3(const GroupState<N>& chi) {
  TangentVec<N> xi;
  const Vec3 phi = log_so3(chi.R);
  const Mat3 Jinv = left_jacobian_inverse_so3(phi);
  xi.template head<3>() = phi;
  for (int j = 0; j < 2 + N; ++j) {
    xi.template segment<3>(3 + 3 * j).noalias() = Jinv * chi.translations.col(j);
  }
  return xi;
}

/// Ad_chi, satisfying (Ad_chi xi)^ = chi xi^ chi^-1.
template <int N>
[[nodiscard]] AdjointMat<N> adjoint(const GroupState<N>& chi) {
  AdjointMat<N> Ad = AdjointMat<N>::Zero();
  Ad.template topLeftCorner<3, 3>() = chi.R;
  for (int j = 0; j < 2 + N; ++j) {
    const int row = 3 + 3 * j;
    Ad.template block<3, 3>(row, 0).noalias() =
        hat(chi.translations.col(j)) * chi.R;
    Ad.template block<3, 3>(row, row) = chi.R;
  }
  return Ad;
}

/// Builds a tangent vector from untyped storage; throws on a length mismatch.
template <int N>
[[nodiscard]] TangentVec<N> tangent_from(std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(kTangentDim<N>)) {
    throw std::invalid_argument("tangent vector for N=" + std::to_string(N) +
                                " needs " + std::to_string(kTangentDim<N>) +
                                " entries, got " +
                                std::to_string(values.size()));
  }
  return Eigen::Map<const TangentVec<N>>(values.data());
}

}  // namespace ainekf

#endif  // AINEKF_LIE_GROUP_HPP
