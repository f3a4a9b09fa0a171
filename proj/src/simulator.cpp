#include "ainekf/simulator.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace ainekf::sim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kGravity = 9.81;
constexpr double kForceRamp = 0.005;   // s, load/unload time at touchdown/lift-off
constexpr double kPhantomForce = 80.0; // N

struct Term {
  double amplitude;
  double frequency;  // Hz
  double phase;
};

/// offset + rate t + sum a sin(2 pi f t + phase), with analytic derivatives.
struct Channel {
  double offset = 0.0;
  double rate = 0.0;
  std::vector<Term> terms;

  [[nodiscard]] double value(double t) const {
    double y = offset + rate * t;
    for (const auto& k : terms) y += k.amplitude * std::sin(kTwoPi * k.frequency * t + k.phase);
    return y;
  }
  [[nodiscard]] double d1(double t) const {
    double y = rate;
    for (const auto& k : terms) {
      const double w = kTwoPi * k.frequency;
      y += k.amplitude * w * std::cos(w * t + k.phase);
    }
    return y;
  }
  [[nodiscard]] double d2(double t) const {
    double y = 0.0;
    for (const auto& k : terms) {
      const double w = kTwoPi * k.frequency;
      y -= k.amplitude * w * w * std::sin(w * t + k.phase);
    }
    return y;
  }
};

struct BodyState {
  Mat3 R;
  Vec3 p, v, a, omega;
};

Mat3 rotation_zyx(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

struct GaitMotion {
  double speed;
  double bob;         // vertical amplitude [m]
  double bob_harmonic;
  double roll;        // rad
  double pitch;       // rad
  double pitch_harmonic;
  double sway;        // lateral amplitude [m]
  double swing_height;
};

GaitMotion gait_motion(GaitType gait) {
  switch (gait) {
    case GaitType::kTrot:
      return {0.5, 0.005, 2.0, 0.02, 0.015, 2.0, 0.01, 0.08};
    case GaitType::kFlyingTrot:
      return {1.0, 0.01, 2.0, 0.03, 0.03, 2.0, 0.015, 0.10};
    case GaitType::kPronk:
      return {0.4, 0.03, 1.0, 0.01, 0.04, 1.0, 0.005, 0.10};
    case GaitType::kStand:
      return {0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0};
  }
  return {};
}

class Trajectory {
 public:
  Trajectory(const ScenarioConfig& cfg, const GaitSchedule& schedule, std::mt19937_64& rng)
      : motion_(gait_motion(cfg.gait)), schedule_(schedule) {
    const double f = 1.0 / schedule.period;
    const double speed = cfg.speed >= 0.0 ? cfg.speed : motion_.speed;
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    std::uniform_real_distribution<double> freq(1.5, 6.0);
    std::uniform_real_distribution<double> wavelength(0.3, 1.0);

    x_.rate = speed;
    y_.terms.push_back({motion_.sway, f, 0.0});
    z_.offset = cfg.body_height;
    z_.terms.push_back({motion_.bob, motion_.bob_harmonic * f, 0.5 * std::numbers::pi});
    roll_.terms.push_back({motion_.roll, f, 0.0});
    pitch_.terms.push_back({motion_.pitch, motion_.pitch_harmonic * f, 0.25 * std::numbers::pi});
    if (cfg.gait != GaitType::kStand) {
      yaw_.terms.push_back({0.15, 0.05, 0.0});
    }

    if (cfg.terrain == Terrain::kRough) {
      const double A = cfg.rough_amplitude;
      for (int k = 0; k < 3; ++k) {
        terrain_.push_back({A * (k == 0 ? 0.5 : (k == 1 ? 0.3 : 0.2)), wavelength(rng), phase(rng)});
      }
      if (cfg.gait != GaitType::kStand) {
        for (int k = 0; k < 3; ++k) {
          z_.terms.push_back({0.3 * A, freq(rng), phase(rng)});
          roll_.terms.push_back({0.5 * A, freq(rng), phase(rng)});
          pitch_.terms.push_back({0.5 * A, freq(rng), phase(rng)});
          y_.terms.push_back({0.2 * A, freq(rng), phase(rng)});
        }
      }
    }
  }

  [[nodiscard]] BodyState body(double t) const {
    BodyState s;
    const double r = roll_.value(t), pt = pitch_.value(t), yw = yaw_.value(t);
    const double dr = roll_.d1(t), dp = pitch_.d1(t), dy = yaw_.d1(t);
    s.R = rotation_zyx(r, pt, yw);
    s.p = Vec3(x_.value(t), y_.value(t), z_.value(t));
    s.v = Vec3(x_.d1(t), y_.d1(t), z_.d1(t));
    s.a = Vec3(x_.d2(t), y_.d2(t), z_.d2(t));
    // ZYX Euler rates to body angular velocity.
    s.omega = Vec3(dr - dy * std::sin(pt),
                   dp * std::cos(r) + dy * std::sin(r) * std::cos(pt),
                   -dp * std::sin(r) + dy * std::cos(r) * std::cos(pt));
    return s;
  }

  [[nodiscard]] double terrain_height(double x, double y) const {
    if (terrain_.empty()) return 0.0;
    return terrain_[0].amplitude * std::sin(kTwoPi * x / terrain_[0].frequency + terrain_[0].phase) +
           terrain_[1].amplitude * std::sin(kTwoPi * y / terrain_[1].frequency + terrain_[1].phase) +
           terrain_[2].amplitude *
               std::sin(kTwoPi * (x + y) / terrain_[2].frequency + terrain_[2].phase);
  }

  /// Foothold of stance cycle `c` of `leg`: hip position at mid-stance dropped
  /// onto the terrain.
  [[nodiscard]] Vec3 foothold(int leg, long c) const {
    const double t_mid = touchdown_time(leg, c) + 0.5 * schedule_.duty * schedule_.period;
    const BodyState s = body(t_mid);
    const Vec3 hip = s.p + s.R * hip_offsets()[static_cast<std::size_t>(leg)];
    return {hip.x(), hip.y(), terrain_height(hip.x(), hip.y())};
  }

  [[nodiscard]] double touchdown_time(int leg, long c) const {
    return (static_cast<double>(c) - schedule_.offsets[static_cast<std::size_t>(leg)]) *
           schedule_.period;
  }

  [[nodiscard]] long cycle(int leg, double t) const {
    return static_cast<long>(
        std::floor(t / schedule_.period + schedule_.offsets[static_cast<std::size_t>(leg)]));
  }

  [[nodiscard]] double swing_height() const { return motion_.swing_height; }

 private:
  GaitMotion motion_;
  GaitSchedule schedule_;
  Channel x_, y_, z_, roll_, pitch_, yaw_;
  std::vector<Term> terrain_;  // amplitude, wavelength, phase
};

struct Interval {
  double begin;
  double end;
};

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

std::string_view to_string(Terrain terrain) {
  return terrain == Terrain::kFlat ? "flat" : "rough";
}

Terrain parse_terrain(std::string_view name) {
  if (name == "flat") return Terrain::kFlat;
  if (name == "rough") return Terrain::kRough;
  throw std::invalid_argument("unknown terrain '" + std::string(name) + "'");
}

SensorNoise SensorNoise::none() {
  return {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("scenario: " + what);
  };
  if (!(dt > 0.0)) fail("dt must be > 0");
  if (!(duration >= 1.0)) fail("duration must be >= 1 s");
  if (!(rough_amplitude >= 0.0)) fail("rough amplitude must be >= 0");
  if (!(body_height > 0.0)) fail("body height must be > 0");
  if (!(mass > 0.0)) fail("mass must be > 0");
  if (slip_rate < 0.0 || misdetection_rate < 0.0) fail("event rates must be >= 0");
  if (slip_rate > 0.0 && !(slip_speed_min >= 0.0 && slip_speed_max >= slip_speed_min && slip_duration > 0.0)) {
    fail("random slip speed range / duration invalid");
  }
  if (misdetection_rate > 0.0 && !(misdetection_duration > 0.0)) fail("misdetection duration must be > 0");
  for (const auto& s : slips) {
    if (s.leg < 0 || s.leg >= kLegs) fail("slip leg out of range: " + std::to_string(s.leg));
    if (!(s.duration > 0.0)) fail("slip duration must be > 0");
    if (s.t_start < 0.0 || s.t_start + s.duration > duration) fail("slip event outside the scenario duration");
    if (!s.velocity.allFinite()) fail("slip velocity must be finite");
  }
}

const std::array<Vec3, kLegs>& hip_offsets() {
  static const std::array<Vec3, kLegs> offsets = {
      Vec3(0.2, 0.12, 0.0), Vec3(0.2, -0.12, 0.0), Vec3(-0.2, 0.12, 0.0), Vec3(-0.2, -0.12, 0.0)};
  return offsets;
}

GroupState<kLegs> TruthFrame::group_state() const {
  GroupState<kLegs> g;
  g.R = R;
  g.v() = v;
  g.p() = p;
  for (int i = 0; i < kLegs; ++i) g.foot(i) = foot_pos[static_cast<std::size_t>(i)];
  return g;
}

std::vector<SlipEvent> resolve_slips(const ScenarioConfig& cfg) {
  std::vector<SlipEvent> events = cfg.slips;
  if (cfg.slip_rate <= 0.0) return events;

  const GaitSchedule schedule = GaitSchedule::make(cfg.gait);
  // Independent stream so that scripted settings do not shift other draws.
  std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 17);
  std::exponential_distribution<double> gap(cfg.slip_rate);
  std::uniform_int_distribution<int> leg_pick(0, kLegs - 1);
  std::uniform_real_distribution<double> speed(cfg.slip_speed_min, cfg.slip_speed_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);

  const double stance = schedule.duty * schedule.period;
  double t = 1.0 + gap(rng);  // leave the first second clean
  while (t < cfg.duration - 1.0) {
    const int leg = leg_pick(rng);
    // Start inside the stance interval that contains or follows t.
    const double x = t / schedule.period + schedule.offsets[static_cast<std::size_t>(leg)];
    long c = static_cast<long>(std::floor(x));
    double td = (static_cast<double>(c) - schedule.offsets[static_cast<std::size_t>(leg)]) * schedule.period;
    if (t - td >= stance) {
      td += schedule.period;
    }
    const double dur = std::min(cfg.slip_duration, 0.8 * stance);
    const double start = td + unit(rng) * std::max(0.0, stance - dur - 0.01);
    const double s = speed(rng);
    const double heading = angle(rng);
    // Uniform over the lower hemisphere: sliding and sinking.
    const double down = unit(rng);
    const double flat = std::sqrt(1.0 - down * down);
    const Vec3 dir(flat * std::cos(heading), flat * std::sin(heading), -down);
    if (start + dur <= cfg.duration) {
      events.push_back({leg, start, dur, s * dir});
    }
    t = std::max(t, start + dur) + gap(rng);
  }
  return events;
}

double terrain_height(const ScenarioConfig& cfg, double x, double y) {
  std::mt19937_64 rng(cfg.seed);
  const Trajectory traj(cfg, GaitSchedule::make(cfg.gait), rng);
  return traj.terrain_height(x, y);
}

Streams generate(const ScenarioConfig& cfg) {
  cfg.validate();
  const GaitSchedule schedule = GaitSchedule::make(cfg.gait);
  std::mt19937_64 rng(cfg.seed);
  const Trajectory traj(cfg, schedule, rng);
  const std::vector<SlipEvent> slips = resolve_slips(cfg);

  // Force-channel misdetection windows per leg.
  std::array<std::vector<Interval>, kLegs> misdetections;
  if (cfg.misdetection_rate > 0.0) {
    std::mt19937_64 mrng(cfg.seed * 0xD1B54A32D192ED03ULL + 5);
    std::exponential_distribution<double> gap(cfg.misdetection_rate);
    for (auto& list : misdetections) {
      for (double t = gap(mrng); t < cfg.duration; t += cfg.misdetection_duration + gap(mrng)) {
        list.push_back({t, t + cfg.misdetection_duration});
      }
    }
  }

  auto slip_displacement = [&](int leg, double a, double b) {
    Vec3 d = Vec3::Zero();
    for (const auto& s : slips) {
      if (s.leg == leg) d += s.velocity * overlap(a, b, s.t_start, s.t_start + s.duration);
    }
    return d;
  };
  auto slip_velocity = [&](int leg, double t) {
    Vec3 u = Vec3::Zero();
    for (const auto& s : slips) {
      if (s.leg == leg && t >= s.t_start && t < s.t_start + s.duration) u += s.velocity;
    }
    return u;
  };

  const auto ticks = static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt)) + 1;
  Streams out;
  out.dt = cfg.dt;
  out.truth.reserve(ticks);
  out.sensors.reserve(ticks);

  std::normal_distribution<double> normal(0.0, 1.0);
  auto noise3 = [&](double sigma) -> Vec3 {
    const double x = normal(rng), y = normal(rng), z = normal(rng);
    return Vec3(x, y, z) * sigma;
  };
  Vec3 bg = cfg.initial_gyro_bias;
  Vec3 ba = cfg.initial_accel_bias;
  const double stance = schedule.duty * schedule.period;
  const double swing = schedule.period - stance;
  const double sqrt_dt = std::sqrt(cfg.dt);

  for (std::size_t k = 0; k < ticks; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    const BodyState body = traj.body(t);

    TruthFrame tf;
    tf.t = t;
    tf.R = body.R;
    tf.p = body.p;
    tf.v = body.v;
    tf.omega = body.omega;
    tf.gyro_bias = bg;
    tf.accel_bias = ba;

    std::array<double, kLegs> weight{};
    double weight_sum = 0.0;
    for (int i = 0; i < kLegs; ++i) {
      const auto li = static_cast<std::size_t>(i);
      const long c = traj.cycle(i, t);
      const double td = traj.touchdown_time(i, c);
      const double lo = td + stance;
      if (t < lo) {
        tf.contact[li] = true;
        tf.foot_pos[li] = traj.foothold(i, c) + slip_displacement(i, td, t);
        tf.foot_vel[li] = slip_velocity(i, t);
        weight[li] = schedule.duty >= 1.0
                         ? 1.0
                         : std::clamp(std::min(t - td, lo - t) / kForceRamp, 0.02, 1.0);
        weight_sum += weight[li];
      } else {
        tf.contact[li] = false;
        const Vec3 start = traj.foothold(i, c) + slip_displacement(i, td, lo);
        const Vec3 end = traj.foothold(i, c + 1);
        const double tau = (t - lo) / swing;
        const double s = tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
        const double ds = 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau) / swing;
        const double bump = 64.0 * std::pow(tau * (1.0 - tau), 3);
        const double dbump = 192.0 * tau * tau * (1.0 - tau) * (1.0 - tau) * (1.0 - 2.0 * tau) / swing;
        tf.foot_pos[li] = start + (end - start) * s;
        tf.foot_pos[li].z() += traj.swing_height() * bump;
        tf.foot_vel[li] = (end - start) * ds;
        tf.foot_vel[li].z() += traj.swing_height() * dbump;
      }
    }
    const double total = std::max(0.0, cfg.mass * (kGravity + body.a.z()));
    for (std::size_t i = 0; i < kLegs; ++i) {
      tf.force[i] = weight_sum > 0.0 ? total * weight[i] / weight_sum : 0.0;
    }

    SensorFrame sf;
    sf.imu.t = t;
    sf.imu.gyro = body.omega + bg + noise3(cfg.noise.gyro / sqrt_dt);
    sf.imu.accel = body.R.transpose() * (body.a + Vec3(0.0, 0.0, kGravity)) + ba +
                   noise3(cfg.noise.accel / sqrt_dt);
    for (int i = 0; i < kLegs; ++i) {
      const auto li = static_cast<std::size_t>(i);
      const Vec3 rel = body.R.transpose() * (tf.foot_pos[li] - body.p);
      const Vec3 rel_vel = body.R.transpose() * (tf.foot_vel[li] - body.v) - body.omega.cross(rel);
      sf.kin.rel_pos.col(i) = rel + noise3(cfg.noise.kinematic_position);
      sf.kin.rel_vel.col(i) = rel_vel + noise3(cfg.noise.kinematic_velocity);
      double f = tf.force[li] + cfg.noise.force * normal(rng);
      for (const auto& m : misdetections[li]) {
        if (t >= m.begin && t < m.end) {
          f = tf.contact[li] ? 0.0 : kPhantomForce;
          break;
        }
      }
      sf.force[li] = f;
    }

    out.truth.push_back(tf);
    out.sensors.push_back(sf);

    bg += noise3(cfg.noise.gyro_bias_walk * sqrt_dt);
    ba += noise3(cfg.noise.accel_bias_walk * sqrt_dt);
  }
  return out;
}

}  // namespace ainekf::sim
