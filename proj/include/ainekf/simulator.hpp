// Procedural quadruped motion and sensor synthesis.
//
// The body follows an analytic trajectory (forward walk, gait-synchronous
// bobbing and attitude oscillation, plus seeded perturbations on rough
// terrain). Stance feet stay where they touched down unless a scripted slip
// moves them; swing feet follow minimum-jerk splines to the next foothold.
// Sensors are sampled from this truth, so every signal is exactly consistent.

#ifndef AINEKF_SIMULATOR_HPP
#define AINEKF_SIMULATOR_HPP

#include "ainekf/contact_detection.hpp"
#include "ainekf/legged_model.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace ainekf::sim {

inline constexpr int kLegs = 4;

enum class Terrain { kFlat, kRough };

[[nodiscard]] std::string_view to_string(Terrain terrain);
[[nodiscard]] Terrain parse_terrain(std::string_view name);

struct SlipEvent {
  int leg = 0;
  double t_start = 0.0;   ///< s
  double duration = 0.05; ///< s
  Vec3 velocity = Vec3::Zero();  ///< world frame, m/s
};

struct SensorNoise {
  double gyro = 0.005;          ///< rad/s/sqrt(Hz)
  double accel = 0.05;          ///< m/s^2/sqrt(Hz)
  double gyro_bias_walk = 1e-4;
  double accel_bias_walk = 1e-4;
  double kinematic_position = 0.002;  ///< m per sample
  double kinematic_velocity = 0.02;   ///< m/s per sample
  double force = 5.0;                 ///< N per sample

  [[nodiscard]] static SensorNoise none();
};

struct ScenarioConfig {
  GaitType gait = GaitType::kTrot;
  Terrain terrain = Terrain::kFlat;
  double rough_amplitude = 0.03;  ///< height-field amplitude [m]
  double duration = 20.0;         ///< s
  double dt = 0.001;              ///< s
  std::uint64_t seed = 1;

  SensorNoise noise;
  Vec3 initial_gyro_bias = Vec3::Zero();
  Vec3 initial_accel_bias = Vec3::Zero();

  /// Scripted slips.
  std::vector<SlipEvent> slips;
  /// Additional random slips: expected events per second (all legs), placed in
  /// stance intervals with speed drawn uniformly from [min, max].
  double slip_rate = 0.0;
  double slip_speed_min = 0.1;
  double slip_speed_max = 0.6;
  double slip_duration = 0.06;

  /// Force-channel misdetections per leg per second (dropout in stance,
  /// phantom load in swing), each lasting misdetection_duration.
  double misdetection_rate = 0.0;
  double misdetection_duration = 0.03;

  /// Body motion; negative values select the gait default.
  double speed = -1.0;
  double body_height = 0.3;
  double mass = 20.0;

  /// Throws std::invalid_argument with a diagnostic on an invalid field.
  void validate() const;
};

struct TruthFrame {
  double t = 0.0;
  Mat3 R = Mat3::Identity();
  Vec3 v = Vec3::Zero();
  Vec3 p = Vec3::Zero();
  Vec3 omega = Vec3::Zero();  ///< body rate, body frame
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
  std::array<Vec3, kLegs> foot_pos{};
  std::array<Vec3, kLegs> foot_vel{};
  std::array<bool, kLegs> contact{};
  std::array<double, kLegs> force{};  ///< normal ground-reaction force [N]

  [[nodiscard]] GroupState<kLegs> group_state() const;
};

struct SensorFrame {
  ImuSample imu;
  LegKinSample<kLegs> kin;
  std::array<double, kLegs> force{};
};

struct Streams {
  double dt = 0.001;
  std::vector<TruthFrame> truth;
  std::vector<SensorFrame> sensors;
};

/// Expands random slip/misdetection settings into explicit events
/// (deterministic in the seed) and appends them to the scripted list.
[[nodiscard]] std::vector<SlipEvent> resolve_slips(const ScenarioConfig& cfg);

[[nodiscard]] Streams generate(const ScenarioConfig& cfg);

/// Ground height of the scenario's terrain at (x, y); 0 on flat ground.
[[nodiscard]] double terrain_height(const ScenarioConfig& cfg, double x, double y);

/// Body-frame hip positions (FL, FR, HL, HR).
[[nodiscard]] const std::array<Vec3, kLegs>& hip_offsets();

// -----------------------------------------------------------------------------
// Log files
// -----------------------------------------------------------------------------

/// Error while reading a log; carries the 1-based line number.
class LogError : public std::runtime_error {
 public:
  LogError(const std::string& path, std::size_t line, const std::string& what);
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

void write_sensor_log(const Streams& streams, const std::filesystem::path& path);
void write_truth_log(const Streams& streams, const std::filesystem::path& path);

/// Reads a sensor log; fills `sensors` and `dt`.
[[nodiscard]] Streams read_sensor_log(const std::filesystem::path& path);
/// Reads a truth log into `truth` (R, v, p, feet, contact; other fields zero).
[[nodiscard]] std::vector<TruthFrame> read_truth_log(const std::filesystem::path& path);

/// Convenience: sensors from `sensor_path`, truth from `truth_path`.
[[nodiscard]] Streams read_logs(const std::filesystem::path& sensor_path,
                                const std::filesystem::path& truth_path);

}  // namespace ainekf::sim

#endif  // AINEKF_SIMULATOR_HPP
