#include "ainekf/estimator.hpp"
#include "ainekf/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace ainekf {
namespace {

constexpr int N = 4;
using Filter = AdaptiveInvariantEkf<N>;
const Vec3 kGravity(0, 0, -9.81);

/// Trajectory generated by the filter's own discrete plant from held IMU
/// samples, with feet re-placed below the hips at every touchdown.
struct DiscreteWorld {
  double dt = 0.001;
  std::vector<ImuSample> imu;
  std::vector<GroupState<N>> truth;
  std::vector<LegKinSample<N>> kin;
  std::vector<ContactVector<N>> contact;

  explicit DiscreteWorld(double duration) {
    const auto steps = static_cast<std::size_t>(duration / dt);
    const std::array<Vec3, N> hips = {Vec3(0.2, 0.1, -0.3), Vec3(0.2, -0.1, -0.3),
                                      Vec3(-0.2, 0.1, -0.3), Vec3(-0.2, -0.1, -0.3)};
    GroupState<N> x;
    x.v() = Vec3(0.5, 0.0, 0.0);
    x.p() = Vec3(0.0, 0.0, 0.3);
    for (int i = 0; i < N; ++i) x.foot(i) = x.p() + hips[static_cast<std::size_t>(i)];
    std::array<bool, N> prev{};
    for (std::size_t k = 0; k <= steps; ++k) {
      const double t = static_cast<double>(k) * dt;
      ImuSample s;
      s.t = t;
      s.gyro = Vec3(0.3 * std::sin(6.0 * t), 0.2 * std::cos(5.0 * t), 0.1 * std::sin(2.0 * t));
      s.accel = -x.R.transpose() * kGravity + Vec3(0.5 * std::cos(7.0 * t), 0.3 * std::sin(4.0 * t),
                                                    1.0 * std::sin(13.0 * t));
      if (k > 0) x = integrate_mean(x, imu.back().gyro, imu.back().accel, dt, kGravity);
      const bool pair_a = std::fmod(t, 0.4) < 0.2;
      ContactVector<N> c;
      c.flag = {pair_a, !pair_a, !pair_a, pair_a};
      for (int i = 0; i < N; ++i) {
        const auto li = static_cast<std::size_t>(i);
        if (c.flag[li] && !prev[li]) x.foot(i) = x.p() + x.R * hips[li];
        c.probability[li] = c.flag[li] ? 1.0 : 0.0;
      }
      prev = c.flag;
      const Vec3 w = s.gyro;
      LegKinSample<N> ks;
      for (int i = 0; i < N; ++i) {
        ks.rel_pos.col(i) = x.R.transpose() * (x.foot(i) - x.p());
        ks.rel_vel.col(i) = -x.R.transpose() * x.v() - w.cross(Vec3(ks.rel_pos.col(i)));
      }
      imu.push_back(s);
      truth.push_back(x);
      kin.push_back(ks);
      contact.push_back(c);
    }
  }
};

EstimatorOptions held_sample(bool fe, bool sr) {
  EstimatorOptions o;
  o.imu_integration = ImuIntegration::kPreviousSample;
  o.foot_noise_estimation = fe;
  o.slip_rejection = sr;
  return o;
}

FilterState<N> exact_init(const GroupState<N>& x) {
  FilterState<N> s;
  s.chi = x;
  s.P = CovMat<N>::Identity() * 1e-6;
  return s;
}

TEST(Estimator, NoiselessExactInitStaysOnTruth) {
  const DiscreteWorld w(10.0);
  for (bool fe : {false, true}) {
    for (bool sr : {false, true}) {
      NoiseConfig cfg;
      Filter f(cfg, held_sample(fe, sr));
      f.initialize(exact_init(w.truth[0]), w.imu[0]);
      double worst = 0.0;
      for (std::size_t k = 1; k < w.imu.size(); ++k) {
        ASSERT_EQ(f.step(w.imu[k], w.kin[k], w.contact[k]), FilterStatus::kOk);
        const auto& x = f.state().chi;
        const auto& t = w.truth[k];
        worst = std::max({worst, (x.R - t.R).norm(), (x.v() - t.v()).norm(),
                          (x.p() - t.p()).norm()});
        for (std::size_t i = 0; i < N; ++i) {
          if (w.contact[k].flag[i]) worst = std::max(worst, (x.foot(int(i)) - t.foot(int(i))).norm());
          ASSERT_FALSE(f.diagnostics().rejected[i]);
        }
      }
      EXPECT_LT(worst, 1e-6) << "fe=" << fe << " sr=" << sr;
      EXPECT_LT(f.state().bias.norm(), 1e-6);
    }
  }
}

TEST(Estimator, RollErrorConvergesOnNoiselessData) {
  const DiscreteWorld w(3.0);
  NoiseConfig cfg;
  Filter f(cfg, held_sample(false, false));
  FilterState<N> s = exact_init(w.truth[0]);
  s.chi.R = exp_so3(Vec3(0.1, 0, 0)) * s.chi.R;
  s.P.block<3, 3>(0, 0) = Mat3::Identity() * 0.01;
  s.P.block<3, 3>(3, 3) = Mat3::Identity() * 0.01;
  s.P.block<3, 3>(kTangentDim<N>, kTangentDim<N>) = Mat3::Identity() * 2.5e-5;
  s.P.block<3, 3>(kTangentDim<N> + 3, kTangentDim<N> + 3) = Mat3::Identity() * 2.5e-3;
  f.initialize(s, w.imu[0]);
  double err_at_2s = 1.0;
  for (std::size_t k = 1; k < w.imu.size(); ++k) {
    ASSERT_EQ(f.step(w.imu[k], w.kin[k], w.contact[k]), FilterStatus::kOk);
    if (k == 2000) {
      const Vec3 e = euler_zyx(w.truth[k].R.transpose() * f.state().chi.R);
      err_at_2s = std::abs(e(0));
    }

  }
  EXPECT_LT(err_at_2s, 1e-3);
}

TEST(Estimator, AllSwingMeansNoAdaptation) {
  const DiscreteWorld w(0.2);
  NoiseConfig cfg;
  Filter plain(cfg, held_sample(false, false));
  Filter adaptive(cfg, held_sample(true, true));
  plain.initialize(exact_init(w.truth[0]), w.imu[0]);
  adaptive.initialize(exact_init(w.truth[0]), w.imu[0]);
  ContactVector<N> none;
  for (std::size_t k = 1; k < w.imu.size(); ++k) {
    ASSERT_EQ(plain.step(w.imu[k], w.kin[k], none), FilterStatus::kOk);
    ASSERT_EQ(adaptive.step(w.imu[k], w.kin[k], none), FilterStatus::kOk);
    for (const auto& a : adaptive.diagnostics().alpha) ASSERT_EQ(a, Vec3::Ones());
  }
  EXPECT_EQ(plain.state().P, adaptive.state().P);
}

TEST(Estimator, AllLegsRejectedMeansPurePropagation) {
  const DiscreteWorld w(0.05);
  NoiseConfig cfg;
  cfg.slip_threshold = 1e-12;  // everything in contact is rejected
  Filter f(cfg, held_sample(false, true));
  f.initialize(exact_init(w.truth[0]), w.imu[0]);
  ContactVector<N> all;
  all.flag.fill(true);
  LegKinSample<N> moving = w.kin[1];
  moving.rel_vel.array() += 0.3;
  FilterState<N> before = f.state();
  ASSERT_EQ(f.step(w.imu[1], moving, all), FilterStatus::kOk);
  for (bool u : f.diagnostics().updated) EXPECT_FALSE(u);
  for (bool r : f.diagnostics().rejected) EXPECT_TRUE(r);

  // Reference: plain prediction with every leg treated as swinging.
  LinearizedDynamics<N> dyn;
  dyn.A = build_A(before.chi, cfg.gravity);
  dyn.T = w.dt;
  dyn.Qc = build_Q<N>(std::array<bool, N>{}, cfg, unit_alpha<N>());
  ASSERT_EQ(propagate<N>(before, dyn,
                         [&](const GroupState<N>& c) {
                           return integrate_mean(c, w.imu[0].gyro, w.imu[0].accel, w.dt,
                                                 cfg.gravity);
                         }),
            FilterStatus::kOk);
  EXPECT_LT((f.state().P - before.P).norm(), 1e-12);
  EXPECT_LT((f.state().chi.matrix() - before.chi.matrix()).norm(), 1e-15);
}

TEST(Estimator, StepValidatesInput) {
  NoiseConfig cfg;
  Filter f(cfg, EstimatorOptions{});
  ImuSample s;
  EXPECT_THROW((void)f.step(s, LegKinSample<N>{}, ContactVector<N>{}), std::logic_error);
  f.initialize(FilterState<N>{}, s);
  EXPECT_THROW((void)f.step(s, LegKinSample<N>{}, ContactVector<N>{}), std::invalid_argument);
  s.t = 0.001;
  s.gyro.x() = std::nan("");
  EXPECT_THROW((void)f.step(s, LegKinSample<N>{}, ContactVector<N>{}), std::invalid_argument);
}

TEST(Estimator, SlipDrivesAlphaToMaxWithinWindow) {
  // Standing robot with nominal sensor noise; one foot slides at 0.1 m/s.
  harness::Config cfg;
  cfg.scenario.gait = GaitType::kStand;
  cfg.scenario.duration = 4.0;
  cfg.harness.contact_source = harness::ContactSource::kTruth;
  const double onset = 3.0;
  cfg.scenario.slips.push_back({1, onset, 0.05, Vec3(0.1, 0.0, 0.0)});
  const sim::Streams s = sim::generate(cfg.scenario);
  const int m = cfg.harness.noise.window;
  std::optional<std::size_t> first_max;
  auto observer = [&](const harness::TickView& v) {
    const double t = v.truth.t;
    if (t < onset || first_max) return;
    const Vec3 body = v.truth.R.transpose() * Vec3(1, 0, 0);
    int axis = 0;
    body.cwiseAbs().maxCoeff(&axis);
    if (v.filter.diagnostics().alpha[1](axis) >= cfg.harness.noise.alpha_max) first_max = v.index;
  };
  (void)harness::run_variant(s, harness::Variant::kIekfFe, cfg, observer);
  ASSERT_TRUE(first_max.has_value());
  const auto onset_index = static_cast<std::size_t>(std::llround(onset / s.dt));
  EXPECT_LE(*first_max - onset_index, static_cast<std::size_t>(m));
}

}  // namespace
}  // namespace ainekf
