#include "ainekf/contact_detection.hpp"
#include "ainekf/simulator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace ainekf {
namespace {

constexpr double kDt = 0.001;

TEST(Gait, ParseAndDefaults) {
  EXPECT_EQ(parse_gait("trot"), GaitType::kTrot);
  EXPECT_EQ(parse_gait("flying_trot"), GaitType::kFlyingTrot);
  EXPECT_EQ(parse_gait("flying-trot"), GaitType::kFlyingTrot);
  EXPECT_EQ(parse_gait("pronk"), GaitType::kPronk);
  EXPECT_THROW((void)parse_gait("gallop"), std::invalid_argument);
  for (GaitType g : {GaitType::kTrot, GaitType::kFlyingTrot, GaitType::kPronk, GaitType::kStand}) {
    EXPECT_EQ(parse_gait(to_string(g)), g);
  }
  const auto trot = GaitSchedule::make(GaitType::kTrot);
  EXPECT_EQ(trot.period, 0.4);
  EXPECT_EQ(trot.duty, 0.6);
  const auto ft = GaitSchedule::make(GaitType::kFlyingTrot);
  EXPECT_EQ(ft.period, 0.3);
  EXPECT_EQ(ft.duty, 0.35);
  const auto pronk = GaitSchedule::make(GaitType::kPronk);
  EXPECT_EQ(pronk.period, 0.4);
  EXPECT_EQ(pronk.duty, 0.4);
  for (int leg = 1; leg < 4; ++leg) EXPECT_EQ(pronk.phase(0.13, leg), pronk.phase(0.13, 0));
}

TEST(Gait, TrotPairsAndTransitions) {
  const auto g = GaitSchedule::make(GaitType::kTrot);
  for (double t = 0.0; t < 2.0; t += 0.0137) {
    EXPECT_EQ(g.in_stance(t, 0), g.in_stance(t, 3));
    EXPECT_EQ(g.in_stance(t, 1), g.in_stance(t, 2));
  }
  EXPECT_TRUE(g.in_stance(0.0, 0));
  EXPECT_FALSE(g.in_stance(0.25, 0));
  EXPECT_NEAR(g.time_since_transition(0.05, 0), 0.05, 1e-12);
  EXPECT_NEAR(g.time_since_transition(0.26, 0), 0.02, 1e-12);
  const auto stand = GaitSchedule::make(GaitType::kStand);
  EXPECT_TRUE(stand.in_stance(12.3, 2));
  EXPECT_TRUE(std::isinf(stand.time_since_transition(1.0, 0)));
}

TEST(ForceObserver, SteadyStateAndZero) {
  ForceResidualObserver obs(2, 30.0);
  const double tau = obs.time_constant();
  EXPECT_NEAR(tau, 1.0 / (2.0 * std::numbers::pi * 30.0), 1e-15);
  const std::array<double, 2> f{100.0, 0.0};
  const int steps = static_cast<int>(std::ceil(5.0 * tau / kDt));
  for (int k = 0; k < steps; ++k) obs.update(f, kDt);
  EXPECT_NEAR(obs.estimate()[0], 100.0, 1.0);
  EXPECT_EQ(obs.estimate()[1], 0.0);
}

TEST(ForceObserver, StepResponseMatchesFirstOrder) {
  ForceResidualObserver obs(1, 30.0);
  const double tau = obs.time_constant();
  const std::array<double, 1> f{1.0};
  for (int k = 1; k <= 50; ++k) {
    obs.update(f, kDt);
    const double expected = 1.0 - std::exp(-k * kDt / tau);
    EXPECT_NEAR(obs.estimate()[0], expected, 0.05 * expected);
  }
  obs.reset();
  EXPECT_EQ(obs.estimate()[0], 0.0);
}

/// Independent scalar Kalman recurrence for the fused contact probability.
struct ScalarKf {
  double x;
  double p;
  void step(double prior, double z, double r, const ContactFusionConfig& c) {
    const double xp = (1.0 - c.prior_pull) * x + c.prior_pull * prior;
    const double pp = std::pow(1.0 - c.prior_pull, 2) * p + c.process_variance;
    const double k = pp / (pp + r);
    x = std::clamp(xp + k * (z - xp), 0.0, 1.0);
    p = (1.0 - k) * pp;
  }
};

TEST(FuseContact, AgreeingEvidence) {
  ContactFusionConfig cfg;
  ContactBelief b;
  for (int k = 0; k < 5; ++k) b = fuse_contact(b, 1.0, 200.0, 0.1, cfg);
  EXPECT_GT(b.probability, 0.95);
  EXPECT_TRUE(b.flag);
}

TEST(FuseContact, MissedContactDecays) {
  ContactFusionConfig cfg;
  ContactBelief b{1.0, 0.01, true};
  ScalarKf oracle{1.0, 0.01};
  const double z = 1.0 / (1.0 + std::exp(cfg.force_midpoint / cfg.force_scale));
  int below = -1;
  for (int k = 1; k <= 5; ++k) {
    b = fuse_contact(b, 1.0, 0.0, 0.1, cfg);
    oracle.step(1.0, z, cfg.measurement_variance * (1.0 + cfg.transition_boost * std::exp(-10.0)),
                cfg);
    EXPECT_NEAR(b.probability, oracle.x, 1e-12);
    EXPECT_NEAR(b.variance, oracle.p, 1e-12);
    if (below < 0 && b.probability < 0.5) below = k;
  }
  ASSERT_GT(below, 0);
  EXPECT_LE(below, 5);
}

TEST(FuseContact, EarlyTouchdownCrossesOnThreshold) {
  ContactFusionConfig cfg;
  ContactBelief b{0.0, 0.01, false};
  ScalarKf oracle{0.0, 0.01};
  const double z = 1.0 / (1.0 + std::exp(-(200.0 - cfg.force_midpoint) / cfg.force_scale));
  int crossed = -1;
  for (int k = 1; k <= 10; ++k) {
    b = fuse_contact(b, 0.0, 200.0, 0.1, cfg);
    oracle.step(0.0, z, cfg.measurement_variance * (1.0 + cfg.transition_boost * std::exp(-10.0)),
                cfg);
    EXPECT_NEAR(b.probability, oracle.x, 1e-12);
    if (crossed < 0 && b.probability > 0.6) crossed = k;
  }
  ASSERT_GT(crossed, 0);
  EXPECT_LE(crossed, 10);
  EXPECT_TRUE(b.flag);
}

TEST(FuseContact, BoundedProbabilityAndPositiveVariance) {
  ContactFusionConfig cfg;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> force(-100.0, 500.0);
  std::uniform_real_distribution<double> since(0.0, 0.3);
  std::bernoulli_distribution coin(0.5);
  ContactBelief b;
  for (int k = 0; k < 100000; ++k) {
    b = fuse_contact(b, coin(rng) ? 1.0 : 0.0, force(rng), since(rng), cfg);
    ASSERT_GE(b.probability, 0.0);
    ASSERT_LE(b.probability, 1.0);
    ASSERT_GT(b.variance, 0.0);
  }
}

TEST(FuseContact, HysteresisPreventsChatter) {
  // Evidence oscillating +-10% around the force whose pseudo-measurement sits
  // halfway between the thresholds, with an uninformative prior of 0.5.
  ContactFusionConfig cfg;
  const double mid = 0.5 * (cfg.on_threshold + cfg.off_threshold);
  const double f0 = cfg.force_midpoint + cfg.force_scale * std::log(mid / (1.0 - mid));
  ContactBelief b{mid, 0.01, false};
  int toggles = 0;
  int windows_over = 0;
  int in_window = 0;
  bool last = b.flag;
  for (int k = 0; k < 10000; ++k) {
    const double f = f0 * (k % 2 == 0 ? 1.1 : 0.9);
    b = fuse_contact(b, 0.5, f, 0.1, cfg);
    if (b.flag != last) {
      ++toggles;
      ++in_window;
      last = b.flag;
    }
    if (k % 50 == 49) {
      if (in_window > 1) ++windows_over;
      in_window = 0;
    }
  }
  EXPECT_EQ(windows_over, 0);
  EXPECT_LE(toggles, 10000 / 50);
}

TEST(ContactDetector, AccurateOnPerfectEvidence) {
  for (GaitType gait : {GaitType::kTrot, GaitType::kFlyingTrot, GaitType::kPronk}) {
    sim::ScenarioConfig sc;
    sc.gait = gait;
    sc.duration = 10.0;
    sc.noise = sim::SensorNoise::none();
    const sim::Streams s = sim::generate(sc);
    ContactDetector det(GaitSchedule::make(gait), ContactFusionConfig{}, 30.0);
    std::size_t agree = 0;
    std::array<int, 4> pending{-1, -1, -1, -1};
    int worst_latency = 0;
    std::array<bool, 4> prev_truth{};
    std::array<bool, 4> prev_flag{};
    for (std::size_t k = 0; k < s.sensors.size(); ++k) {
      det.update(s.sensors[k].imu.t, s.sensors[k].force, s.dt);
      for (std::size_t i = 0; i < 4; ++i) {
        const bool truth = s.truth[k].contact[i];
        const bool flag = det.beliefs()[i].flag;
        agree += truth == flag;
        if (k > 0 && truth != prev_truth[i]) pending[i] = static_cast<int>(k);
        if (pending[i] >= 0 && flag == truth && flag != prev_flag[i]) {
          worst_latency = std::max(worst_latency, static_cast<int>(k) - pending[i]);
          pending[i] = -1;
        }
        prev_truth[i] = truth;
        prev_flag[i] = flag;
      }
    }
    const double accuracy = static_cast<double>(agree) / (4.0 * s.sensors.size());
    EXPECT_GE(accuracy, 0.995) << to_string(gait);
    EXPECT_LE(worst_latency, 10) << to_string(gait);
  }
}

TEST(ContactConfig, Validation) {
  ContactFusionConfig c;
  EXPECT_NO_THROW(c.validate());
  c.on_threshold = 0.3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(ForceResidualObserver(4, 0.0), std::invalid_argument);
  GaitSchedule g;
  g.duty = 1.5;
  EXPECT_THROW(g.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace ainekf
