// Contact estimation from a gait-schedule prior and a per-leg force residual,
// fused by one scalar Kalman filter per leg.

#ifndef AINEKF_CONTACT_DETECTION_HPP
#define AINEKF_CONTACT_DETECTION_HPP

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ainekf {

enum class GaitType { kTrot, kFlyingTrot, kPronk, kStand };

[[nodiscard]] std::string_view to_string(GaitType gait);
/// Accepts "trot", "flying-trot" (or "flying_trot"), "pronk" and "stand".
[[nodiscard]] GaitType parse_gait(std::string_view name);

/// Periodic stance/swing timetable. Leg order is FL, FR, HL, HR.
struct GaitSchedule {
  GaitType type = GaitType::kTrot;
  double period = 0.4;  ///< s
  double duty = 0.6;    ///< stance fraction of the period, in (0, 1]
  std::vector<double> offsets = {0.0, 0.5, 0.5, 0.0};

  /// Default parameters for a quadruped gait.
  [[nodiscard]] static GaitSchedule make(GaitType type);

  /// Phase in [0, 1); stance occupies [0, duty).
  [[nodiscard]] double phase(double t, int leg) const;
  [[nodiscard]] bool in_stance(double t, int leg) const;
  /// Prior contact probability from the timetable.
  [[nodiscard]] double prior(double t, int leg) const;
  /// Time elapsed since the most recent scheduled touchdown or lift-off.
  [[nodiscard]] double time_since_transition(double t, int leg) const;
  [[nodiscard]] int legs() const { return static_cast<int>(offsets.size()); }

  void validate() const;
};

/// First-order low-pass residual on the per-leg force channel, discretized
/// exactly: y += (1 - exp(-dt/tau)) (u - y), tau = 1 / (2 pi f_c).
class ForceResidualObserver {
 public:
  ForceResidualObserver(int legs, double cutoff_hz);

  /// Returns the filtered per-leg force estimate [N].
  std::span<const double> update(std::span<const double> force, double dt);
  void reset();

  [[nodiscard]] double time_constant() const { return tau_; }
  [[nodiscard]] std::span<const double> estimate() const { return estimate_; }

 private:
  double tau_;
  std::vector<double> estimate_;
};

struct ContactFusionConfig {
  double force_midpoint = 40.0;   ///< F0 [N] of the logistic squash
  double force_scale = 10.0;      ///< k [N]
  double prior_pull = 0.7;        ///< fraction of the gap to the prior closed per step
  double process_variance = 0.03;
  double measurement_variance = 0.02;
  /// The force channel lags scheduled transitions; right after one the
  /// measurement variance is scaled by (1 + boost exp(-dt_transition / lag)).
  double transition_boost = 50.0;
  double transition_lag = 0.01;   ///< s
  double on_threshold = 0.6;
  double off_threshold = 0.4;
  double initial_variance = 0.25;

  void validate() const;
};

struct ContactBelief {
  double probability = 0.0;
  double variance = 0.25;
  bool flag = false;
};

/// Logistic map from estimated normal force to a contact pseudo-measurement.
[[nodiscard]] double force_to_probability(double force, const ContactFusionConfig& cfg);

/// One predict/update cycle of the per-leg scalar filter followed by the
/// hysteresis on the binary flag.
[[nodiscard]] ContactBelief fuse_contact(const ContactBelief& belief, double prior,
                                         double force, double time_since_transition,
                                         const ContactFusionConfig& cfg);

/// Gait prior + force residual + fusion for all legs.
class ContactDetector {
 public:
  ContactDetector(GaitSchedule schedule, ContactFusionConfig cfg, double cutoff_hz);

  /// Consumes one tick of raw force evidence at time t.
  void update(double t, std::span<const double> force, double dt);

  [[nodiscard]] const std::vector<ContactBelief>& beliefs() const { return beliefs_; }
  [[nodiscard]] const GaitSchedule& schedule() const { return schedule_; }
  [[nodiscard]] std::span<const double> filtered_force() const { return observer_.estimate(); }

 private:
  GaitSchedule schedule_;
  ContactFusionConfig cfg_;
  ForceResidualObserver observer_;
  std::vector<ContactBelief> beliefs_;
};

}  // namespace ainekf

#endif  // AINEKF_CONTACT_DETECTION_HPP
