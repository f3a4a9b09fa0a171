#include "ainekf/lie_group.hpp"

#include <algorithm>
#include <numbers>

namespace ainekf {

namespace {

constexpr double kSmallAngle = 1e-6;
// Below this angle the Jacobian coefficients, which cancel to O(t^2) in closed
// form, are evaluated by their power series.
constexpr double kSeriesAngle = 0.1;

/// First eight terms of sum_k (-1)^k t^(2k) / (2k + first)!.
double even_series(double t2, int first) {
  double fact = 1.0;
  for (int i = 2; i <= first; ++i) fact *= i;
  double term = 1.0 / fact;
  double sum = term;
  for (int k = 1; k < 8; ++k) {
    term *= -t2 / static_cast<double>((2 * k + first - 1) * (2 * k + first));
    sum += term;
  }
  return sum;
}

}  // namespace

Mat3 hat(const Vec3& w) {
  Mat3 W;
  // clang-format off
  W <<  0.0,  -w.z(),  w.y(),
        w.z(),  0.0,  -w.x(),
       -w.y(),  w.x(),  0.0;
  // clang-format on
  return W;
}

Vec3 vee(const Mat3& W) {
  return 0.5 * Vec3(W(2, 1) - W(1, 2), W(0, 2) - W(2, 0), W(1, 0) - W(0, 1));
}

Mat3 exp_so3(const Vec3& w) {
  const double t2 = w.squaredNorm();
  const double t = std::sqrt(t2);
  double a;  // sin(t)/t
  double b;  // (1-cos(t))/t^2
  if (t < kSmallAngle) {
    a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
  } else {
    a = std::sin(t) / t;
    b = (1.0 - std::cos(t)) / t2;
  }
  const Mat3 W = hat(w);
  return Mat3::Identity() + a * W + b * W * W;
}

Vec3 log_so3(const Mat3& R) {
  const Vec3 axis_sin = vee(R);  // sin(theta) * n
  const double s = axis_sin.norm();
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(s, c);

  if (theta < kSmallAngle) {
    return (1.0 + theta * theta / 6.0) * axis_sin;
  }
  if (theta < std::numbers::pi - kSmallAngle) {
    return (theta / s) * axis_sin;
  }

  // theta ~ pi: sin(theta) carries no direction; use (R + R^T)/2 = I + (1-c)(nn^T - I).
  const Mat3 nnT = (0.5 * (R + R.transpose()) - c * Mat3::Identity()) / (1.0 - c);
  int k = 0;
  nnT.diagonal().maxCoeff(&k);
  Vec3 n = nnT.col(k) / std::sqrt(nnT(k, k));
  n.normalize();
  if (n.dot(axis_sin) < 0.0) {
    n = -n;
  }
  return theta * n;
}

Mat3 left_jacobian_so3(const Vec3& w) {
  const double t2 = w.squaredNorm();
  const double t = std::sqrt(t2);
  double b;  // (1-cos(t))/t^2
  double c;  // (t-sin(t))/t^3
  if (t < kSeriesAngle) {
    b = even_series(t2, 2);
    c = even_series(t2, 3);
  } else {
    const double h = std::sin(0.5 * t) / t;
    b = 2.0 * h * h;
    c = (t - std::sin(t)) / (t2 * t);
  }
  const Mat3 W = hat(w);
  return Mat3::Identity() + b * W + c * W * W;
}

Mat3 second_integral_so3(const Vec3& w) {
  const double t2 = w.squaredNorm();
  const double t = std::sqrt(t2);
  double b;  // (t - sin(t)) / t^3
  double c;  // (t^2 + 2 cos(t) - 2) / (2 t^4)
  if (t < kSeriesAngle) {
    b = even_series(t2, 3);
    c = even_series(t2, 4);
  } else {
    const double h = std::sin(0.5 * t);
    b = (t - std::sin(t)) / (t2 * t);
    c = (t2 - 4.0 * h * h) / (2.0 * t2 * t2);
  }
  const Mat3 W = hat(w);
  return 0.5 * Mat3::Identity() + b * W + c * W * W;
}

Mat3 left_jacobian_inverse_so3(const Vec3& w) {
  const double t2 = w.squaredNorm();
  const double t = std::sqrt(t2);
  double d;  // (1 - (t/2) cot(t/2)) / t^2
  if (t < kSeriesAngle) {
    d = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0 + t2 * t2 * t2 / 1209600.0 +
        t2 * t2 * t2 * t2 / 47900160.0;
  } else {
    d = (1.0 - 0.5 * t / std::tan(0.5 * t)) / t2;
  }
  const Mat3 W = hat(w);
  return Mat3::Identity() - 0.5 * W + d * W * W;
}

Mat3 project_to_so3(const Mat3& R) {
  return 0.5 * (R + R.inverse().transpose());
}

Vec3 euler_zyx(const Mat3& R) {
  const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  const double roll = std::atan2(R(2, 1), R(2, 2));
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  return {roll, pitch, yaw};
}

bool is_rotation(const Mat3& R, double tol) {
  if (!R.allFinite()) {
    return false;
  }
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

}  // namespace ainekf
