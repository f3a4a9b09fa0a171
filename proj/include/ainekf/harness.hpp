// Replay of sensor logs through the filter variants, RMSE evaluation, foot
// noise sweep, Table-style matrix runs and per-leg trace output.

#ifndef AINEKF_HARNESS_HPP
#define AINEKF_HARNESS_HPP

#include "ainekf/estimator.hpp"
#include "ainekf/simulator.hpp"

#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ainekf::harness {

inline constexpr int kLegs = sim::kLegs;
using Filter = AdaptiveInvariantEkf<kLegs>;

enum class Variant { kIekf, kIekfSr, kIekfFe, kIekfSrFe };
inline constexpr std::array<Variant, 4> kAllVariants = {Variant::kIekf, Variant::kIekfSr,
                                                        Variant::kIekfFe, Variant::kIekfSrFe};

/// "IEKF", "IEKF+SR", "IEKF+FE", "IEKF+SR+FE".
[[nodiscard]] std::string_view to_string(Variant v);
/// Case-insensitive; also accepts "-" or "_" for "+" and "fe+sr" ordering.
[[nodiscard]] Variant parse_variant(std::string_view name);
[[nodiscard]] EstimatorOptions options_for(Variant v, EstimatorOptions base);

enum class ContactSource { kTruth, kDetector };

/// 1-sigma initial uncertainty.
struct InitialUncertainty {
  double rotation = 0.05;     ///< rad
  double velocity = 0.1;      ///< m/s
  double position = 1e-3;     ///< m
  double foot = 0.02;         ///< m
  double gyro_bias = 0.005;   ///< rad/s
  double accel_bias = 0.05;   ///< m/s^2
};

struct HarnessConfig {
  NoiseConfig noise;
  EstimatorOptions estimator;
  ContactSource contact_source = ContactSource::kDetector;
  ContactFusionConfig fusion;
  double force_cutoff_hz = 30.0;
  double burn_in = 1.0;  ///< s excluded from RMSE
  InitialUncertainty init;
  Vec3 init_rotation_error = Vec3::Zero();  ///< R_hat = Exp(err) R_true
  Vec3 init_velocity_error = Vec3::Zero();
  double divergence_trace = 1e9;

  void validate() const;
};

struct Config {
  sim::ScenarioConfig scenario;
  HarnessConfig harness;
};

/// Bad config file or value. line() is 0 when not tied to a file line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, std::size_t line, const std::string& what);
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Applies flat `key = value` lines onto `cfg`. '#' starts a comment; `slip`
/// may repeat ("leg, t_start, duration, vx, vy, vz").
void apply_config_text(std::string_view text, Config& cfg, const std::string& source = "<text>");
void load_config_file(const std::filesystem::path& path, Config& cfg);
/// Every key with its current value, in the format read back by
/// apply_config_text().
[[nodiscard]] std::string dump_config(const Config& cfg);

// -----------------------------------------------------------------------------
// Errors
// -----------------------------------------------------------------------------

struct Rmse {
  Vec3 velocity = Vec3::Zero();  ///< body frame, m/s
  double roll = 0.0;             ///< deg
  double pitch = 0.0;            ///< deg
  std::size_t samples = 0;
};

/// Roll and pitch (ZYX Euler) of the body-frame error R^T R_hat, in rad.
[[nodiscard]] std::array<double, 2> roll_pitch_error(const Mat3& R_hat, const Mat3& R);

class ErrorAccumulator {
 public:
  void add(const Mat3& R_hat, const Vec3& v_hat, const Mat3& R, const Vec3& v);
  [[nodiscard]] Rmse result() const;

 private:
  Vec3 sq_vel_ = Vec3::Zero();
  double sq_roll_ = 0.0;
  double sq_pitch_ = 0.0;
  std::size_t n_ = 0;
};

// -----------------------------------------------------------------------------
// Runs
// -----------------------------------------------------------------------------

struct TickView {
  std::size_t index;
  const Filter& filter;
  const sim::TruthFrame& truth;
  const ContactVector<kLegs>& contact;
  std::array<double, kLegs> prior;
};
using TickObserver = std::function<void(const TickView&)>;

struct RunResult {
  Variant variant = Variant::kIekf;
  Rmse rmse;
  bool diverged = false;
  double diverged_at = 0.0;
  std::string fault;
  std::size_t ticks = 0;
};

[[nodiscard]] FilterState<kLegs> initial_state(const sim::Streams& streams,
                                               const HarnessConfig& cfg);

/// Replays the streams through one variant. The scenario supplies the gait
/// schedule used by the contact detector. Stops at the first numerical fault
/// (non-finite state, failed update or trace(P) above the limit).
[[nodiscard]] RunResult run_variant(const sim::Streams& streams, Variant variant,
                                    const Config& cfg, const TickObserver& observer = {});

struct EvalReport {
  std::string scenario;
  double burn_in = 1.0;
  std::vector<RunResult> runs;  ///< sorted by variant
};

[[nodiscard]] EvalReport run_eval(const sim::Streams& streams, std::vector<Variant> variants,
                                  const Config& cfg, const std::string& scenario = "");
void write_report(const EvalReport& report, std::ostream& out);
[[nodiscard]] bool any_diverged(const EvalReport& report);

struct SweepRow {
  double foot_noise = 0.0;
  RunResult result;
};

/// One run per isotropic foot noise w_f in `grid`.
[[nodiscard]] std::vector<SweepRow> noise_sweep(const sim::Streams& streams,
                                                const std::vector<double>& grid,
                                                Variant variant, const Config& cfg);
void write_sweep(const std::vector<SweepRow>& rows, Variant variant, std::ostream& out);

struct TableRow {
  GaitType gait;
  sim::Terrain terrain;
  RunResult result;
};

/// Gait x terrain x variant matrix on scenarios derived from cfg.scenario.
[[nodiscard]] std::vector<TableRow> table(const Config& cfg);
void write_table(const std::vector<TableRow>& rows, std::ostream& out);

/// Writes one CSV per leg: t, contact, probability, d, rejected,
/// alpha_xx/alpha_max, alpha_yy/alpha_max, alpha_zz/alpha_max, prior.
class TraceWriter {
 public:
  TraceWriter(const std::filesystem::path& dir, Variant variant, double alpha_max);
  void operator()(const TickView& view);

 private:
  std::array<std::ofstream, kLegs> files_;
  double alpha_max_;
  std::string line_;
};

/// Zero-point calibration of the velocity-kinematics noise from a standstill
/// log: mean over stance samples of diag(R^T (e e^T - H P H^T) R). Returns
/// the per-axis standard deviation.
[[nodiscard]] Vec3 calibrate_velocity_noise(const sim::Streams& streams, const Config& cfg);

}  // namespace ainekf::harness

#endif  // AINEKF_HARNESS_HPP
