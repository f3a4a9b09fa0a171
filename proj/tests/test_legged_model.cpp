#include "ainekf/legged_model.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace ainekf {
namespace {

using test::random_state;
using test::random_vec;
using test::random_vector;
using test::vee_se2n3;

constexpr int N = 4;
constexpr int kBw = kTangentDim<N>;
constexpr int kBa = kBw + 3;
const Vec3 kGravity(0, 0, -9.81);

template <int M>
EmbeddingMat<M> rate_matrix(const PlantRates<M>& r) {
  EmbeddingMat<M> X = EmbeddingMat<M>::Zero();
  X.template topLeftCorner<3, 3>() = r.R_dot;
  X.template topRightCorner<3, 2 + M>() = r.translation_rates;
  return X;
}

TEST(Plant, HoverIsStatic) {
  std::mt19937_64 rng(1);
  GroupState<N> chi = random_state<N>(rng);
  chi.v().setZero();
  ImuSample imu;
  imu.accel = -chi.R.transpose() * kGravity;
  const auto r = plant_dynamics<N>(chi, Vec6::Zero(), imu, kGravity);
  EXPECT_EQ(r.R_dot, Mat3::Zero());
  EXPECT_LT(r.translation_rates.norm(), 1e-14);
  EXPECT_EQ(r.bias_rate, Vec6::Zero());
}

TEST(Plant, FreeFall) {
  std::mt19937_64 rng(2);
  const GroupState<N> chi = random_state<N>(rng);
  const auto r = plant_dynamics<N>(chi, Vec6::Zero(), ImuSample{}, kGravity);
  EXPECT_EQ(Vec3(r.translation_rates.col(0)), kGravity);
  EXPECT_EQ(Vec3(r.translation_rates.col(1)), Vec3(chi.v()));
  for (int i = 0; i < N; ++i) EXPECT_EQ(Vec3(r.translation_rates.col(2 + i)), Vec3::Zero());
}

TEST(Plant, IsGroupAffine) {
  auto f = [](const EmbeddingMat<N>& X, const PlantInput& u) { return plant_matrix<N>(X, u); };
  auto sample = [](std::mt19937_64& rng) {
    PlantInput u;
    u.omega = random_vec(rng);
    u.accel = random_vec(rng, 5.0);
    return u;
  };
  EXPECT_LT((check_group_affine<N>(f, sample, 1000)), 1e-9);
}

TEST(Plant, MatrixFormMatchesRates) {
  std::mt19937_64 rng(3);
  const GroupState<N> chi = random_state<N>(rng);
  ImuSample imu;
  imu.gyro = random_vec(rng);
  imu.accel = random_vec(rng, 5.0);
  PlantInput u;
  u.omega = imu.gyro;
  u.accel = imu.accel;
  u.gravity = kGravity;
  const auto rates = plant_dynamics<N>(chi, Vec6::Zero(), imu, kGravity);
  EXPECT_LT((plant_matrix<N>(chi.matrix(), u) - rate_matrix(rates)).norm(), 1e-14);
}

TEST(IntegrateMean, MatchesFineStepIntegration) {
  std::mt19937_64 rng(4);
  const GroupState<N> chi = random_state<N>(rng);
  const Vec3 w = random_vec(rng, 2.0);
  const Vec3 a = random_vec(rng, 5.0);
  const double T = 0.01;
  const GroupState<N> out = integrate_mean(chi, w, a, T, kGravity);
  GroupState<N> ref = chi;
  const int n = 20000;
  const double h = T / n;
  for (int k = 0; k < n; ++k) {
    // Midpoint rule on v and p with the exact rotation over each substep.
    const Mat3 R_mid = ref.R * exp_so3(0.5 * h * w);
    const Vec3 acc = R_mid * a + kGravity;
    ref.p() += ref.v() * h + 0.5 * acc * h * h;
    ref.v() += acc * h;
    ref.R = ref.R * exp_so3(h * w);
  }
  EXPECT_LT((out.R - ref.R).norm(), 1e-11);
  EXPECT_LT((out.v() - ref.v()).norm(), 1e-10);
  EXPECT_LT((out.p() - ref.p()).norm(), 1e-12);
  for (int i = 0; i < N; ++i) EXPECT_EQ(Vec3(out.foot(i)), Vec3(chi.foot(i)));
}

TEST(BuildA, AtIdentity) {
  const CovMat<N> A = build_A(GroupState<N>::identity(), kGravity);
  CovMat<N> expected = CovMat<N>::Zero();
  expected.block<3, 3>(3, 0) = hat(kGravity);
  expected.block<3, 3>(6, 3) = Mat3::Identity();
  expected.block<3, 3>(0, kBw) = -Mat3::Identity();
  expected.block<3, 3>(3, kBa) = -Mat3::Identity();
  EXPECT_EQ(A, expected);
}

TEST(BuildA, BiasFreeBlockIsStateIndependent) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 100; ++k) {
    const CovMat<N> A1 = build_A(random_state<N>(rng), kGravity);
    const CovMat<N> A2 = build_A(random_state<N>(rng), kGravity);
    EXPECT_EQ((A1.topLeftCorner<kBw, kBw>()), (A2.topLeftCorner<kBw, kBw>()));
  }
}

TEST(BuildA, MatchesNonlinearErrorDynamics) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 100; ++k) {
    const GroupState<N> chi_hat = random_state<N>(rng);
    const Vec6 b_hat = random_vector<6>(rng, 0.1);
    ErrorVec<N> e = random_vector<kErrorDim<N>>(rng);
    e *= 1e-6 / e.norm();
    const TangentVec<N> xi = e.head<kBw>();
    const GroupState<N> chi = compose(inverse(exp_se2n3<N>(xi)), chi_hat);
    const Vec6 b = b_hat - e.tail<6>();

    ImuSample imu;
    imu.gyro = random_vec(rng);
    imu.accel = random_vec(rng, 5.0);
    const auto rate_hat = rate_matrix(plant_dynamics<N>(chi_hat, b_hat, imu, kGravity));
    const auto rate = rate_matrix(plant_dynamics<N>(chi, b, imu, kGravity));
    const EmbeddingMat<N> eta = compose(chi_hat, inverse(chi)).matrix();
    const EmbeddingMat<N> chi_inv = inverse(chi).matrix();
    const EmbeddingMat<N> eta_dot = rate_hat * chi_inv - eta * rate * chi_inv;
    const TangentVec<N> xi_dot = vee_se2n3<N>(eta_dot * eta.inverse());

    const ErrorVec<N> predicted = build_A(chi_hat, kGravity) * e;
    EXPECT_LT((xi_dot - predicted.head<kBw>()).norm(), 1e-4 * predicted.norm());
  }
}

std::array<bool, N> contacts(bool a, bool b, bool c, bool d) { return {a, b, c, d}; }

TEST(BuildQ, ContactSwingAndScaling) {
  NoiseConfig cfg;
  const Vec3 qf = cfg.foot_noise.cwiseAbs2();
  const auto Q = build_Q<N>(contacts(true, true, true, true), cfg, unit_alpha<N>());
  for (int i = 0; i < N; ++i) {
    EXPECT_EQ(Mat3(Q.block<3, 3>(9 + 3 * i, 9 + 3 * i)), Mat3(qf.asDiagonal()));
  }
  AlphaSet<N> alpha = unit_alpha<N>();
  alpha[1] = Vec3(9, 9, 9);
  alpha[0] = Vec3(9, 1, 1);
  const auto Qs = build_Q<N>(contacts(true, false, true, true), cfg, alpha);
  EXPECT_EQ(Mat3(Qs.block<3, 3>(12, 12)), Mat3(cfg.swing_foot_variance * Mat3::Identity()));
  EXPECT_EQ(Qs(9, 9), 9.0 * qf.x());
  EXPECT_EQ(Qs(10, 10), qf.y());
  EXPECT_EQ(Qs(0, 0), cfg.gyro_noise * cfg.gyro_noise);
  EXPECT_EQ(Qs(3, 3), cfg.accel_noise * cfg.accel_noise);
  EXPECT_EQ(Qs(kBw, kBw), cfg.gyro_bias_walk * cfg.gyro_bias_walk);
  EXPECT_EQ(Qs(kBa, kBa), cfg.accel_bias_walk * cfg.accel_bias_walk);
}

TEST(BuildQ, PsdForEveryContactMask) {
  NoiseConfig cfg;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(1.0, cfg.alpha_max);
  for (int mask = 0; mask < (1 << N); ++mask) {
    std::array<bool, N> stance;
    AlphaSet<N> alpha;
    for (int i = 0; i < N; ++i) {
      stance[static_cast<std::size_t>(i)] = (mask >> i) & 1;
      alpha[static_cast<std::size_t>(i)] = Vec3(u(rng), u(rng), u(rng));
    }
    const auto Q = build_Q<N>(stance, cfg, alpha);
    EXPECT_EQ(Q, CovMat<N>(Q.transpose()));
    EXPECT_GE(Q.diagonal().minCoeff(), 0.0);
    EXPECT_EQ((Q - CovMat<N>(Q.diagonal().asDiagonal())).norm(), 0.0);
  }
}

Vec3 truth_rel_pos(const GroupState<N>& chi, int leg) {
  return chi.R.transpose() * (chi.foot(leg) - chi.p());
}

TEST(PositionObservation, ZeroResidualAtTruth) {
  std::mt19937_64 rng(8);
  NoiseConfig cfg;
  for (int k = 0; k < 100; ++k) {
    const GroupState<N> chi = random_state<N>(rng);
    for (int leg = 0; leg < N; ++leg) {
      const auto blk = build_position_observation<N>(leg, truth_rel_pos(chi, leg), chi, cfg);
      EXPECT_LT(observation_residual(chi, blk).norm(), 1e-12);
    }
  }
}

TEST(PositionObservation, ResidualIsLinearizedError) {
  std::mt19937_64 rng(9);
  NoiseConfig cfg;
  for (int k = 0; k < 100; ++k) {
    const GroupState<N> chi = random_state<N>(rng);
    TangentVec<N> xi = random_vector<kBw>(rng);
    xi *= 1e-4 / xi.norm();
    const GroupState<N> est = compose(exp_se2n3<N>(xi), chi);
    const int leg = k % N;
    const auto blk = build_position_observation<N>(leg, truth_rel_pos(chi, leg), est, cfg);
    ErrorVec<N> e = ErrorVec<N>::Zero();
    e.head<kBw>() = xi;
    const Vec3 z = observation_residual(est, blk);
    // With eta = chi_hat chi^-1 the residual is s xi^ b = xi_p - xi_r = -H xi.
    EXPECT_LT((z + blk.H * e).norm(), 1e-7);
    // Offset only in xi_p: residual is xi_p.
    TangentVec<N> xp = TangentVec<N>::Zero();
    xp.segment<3>(6) = xi.segment<3>(6);
    const GroupState<N> est_p = compose(exp_se2n3<N>(xp), chi);
    const auto blk_p = build_position_observation<N>(leg, truth_rel_pos(chi, leg), est_p, cfg);
    EXPECT_LT((observation_residual(est_p, blk_p) - xp.segment<3>(6)).norm(), 1e-14);
  }
}

TEST(PositionObservation, BlindToYawAboutGravity) {
  std::mt19937_64 rng(10);
  NoiseConfig cfg;
  for (int k = 0; k < 100; ++k) {
    const GroupState<N> chi = random_state<N>(rng);
    TangentVec<N> xi = TangentVec<N>::Zero();
    xi.head<3>() = -kGravity.normalized() * (0.5 * (k + 1) / 100.0);
    const GroupState<N> est = compose(exp_se2n3<N>(xi), chi);
    const auto blk = build_position_observation<N>(k % N, truth_rel_pos(chi, k % N), est, cfg);
    EXPECT_LT(observation_residual(est, blk).norm(), 1e-12);
    ErrorVec<N> e = ErrorVec<N>::Zero();
    e.head<kBw>() = xi;
    EXPECT_EQ((blk.H * e).norm(), 0.0);
  }
}

TEST(NoiseConfig, Validation) {
  NoiseConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.foot_noise.y() = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = NoiseConfig{};
  cfg.window = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = NoiseConfig{};
  cfg.alpha_max = 0.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = NoiseConfig{};
  cfg.swing_foot_variance = 1e-6;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace ainekf
