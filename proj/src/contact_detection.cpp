#include "ainekf/contact_detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ainekf {

std::string_view to_string(GaitType gait) {
  switch (gait) {
    case GaitType::kTrot:
      return "trot";
    case GaitType::kFlyingTrot:
      return "flying-trot";
    case GaitType::kPronk:
      return "pronk";
    case GaitType::kStand:
      return "stand";
  }
  return "unknown";
}

GaitType parse_gait(std::string_view name) {
  if (name == "trot") return GaitType::kTrot;
  if (name == "flying-trot" || name == "flying_trot") return GaitType::kFlyingTrot;
  if (name == "pronk") return GaitType::kPronk;
  if (name == "stand") return GaitType::kStand;
  throw std::invalid_argument("unknown gait '" + std::string(name) + "'");
}

GaitSchedule GaitSchedule::make(GaitType type) {
  GaitSchedule g;
  g.type = type;
  switch (type) {
    case GaitType::kTrot:
      g.period = 0.4;
      g.duty = 0.6;
      g.offsets = {0.0, 0.5, 0.5, 0.0};
      break;
    case GaitType::kFlyingTrot:
      g.period = 0.3;
      g.duty = 0.35;
      g.offsets = {0.0, 0.5, 0.5, 0.0};
      break;
    case GaitType::kPronk:
      g.period = 0.4;
      g.duty = 0.4;
      g.offsets = {0.0, 0.0, 0.0, 0.0};
      break;
    case GaitType::kStand:
      g.period = 1.0;
      g.duty = 1.0;
      g.offsets = {0.0, 0.0, 0.0, 0.0};
      break;
  }
  return g;
}

double GaitSchedule::phase(double t, int leg) const {
  const double x = t / period + offsets.at(static_cast<std::size_t>(leg));
  return x - std::floor(x);
}

bool GaitSchedule::in_stance(double t, int leg) const {
  return phase(t, leg) < duty;
}

double GaitSchedule::prior(double t, int leg) const {
  return in_stance(t, leg) ? 1.0 : 0.0;
}

double GaitSchedule::time_since_transition(double t, int leg) const {
  if (duty >= 1.0) {
    return std::numeric_limits<double>::infinity();
  }
  const double ph = phase(t, leg);
  return (ph < duty ? ph : ph - duty) * period;
}

void GaitSchedule::validate() const {
  if (!(period > 0.0)) throw std::invalid_argument("gait period must be > 0");
  if (!(duty > 0.0 && duty <= 1.0)) throw std::invalid_argument("duty factor must be in (0, 1]");
  if (offsets.empty()) throw std::invalid_argument("gait needs at least one leg");
}

ForceResidualObserver::ForceResidualObserver(int legs, double cutoff_hz)
    : tau_(1.0 / (2.0 * std::numbers::pi * cutoff_hz)),
      estimate_(static_cast<std::size_t>(legs), 0.0) {
  if (!(cutoff_hz > 0.0)) {
    throw std::invalid_argument("force observer cutoff must be > 0");
  }
}

std::span<const double> ForceResidualObserver::update(std::span<const double> force,
                                                       double dt) {
  const double gain = 1.0 - std::exp(-dt / tau_);
  const std::size_t n = std::min(force.size(), estimate_.size());
  for (std::size_t i = 0; i < n; ++i) {
    estimate_[i] += gain * (force[i] - estimate_[i]);
  }
  return estimate_;
}

void ForceResidualObserver::reset() {
  std::fill(estimate_.begin(), estimate_.end(), 0.0);
}

void ContactFusionConfig::validate() const {
  if (!(force_scale > 0.0)) throw std::invalid_argument("contact force scale must be > 0");
  if (!(prior_pull >= 0.0 && prior_pull <= 1.0)) throw std::invalid_argument("prior pull must be in [0, 1]");
  if (!(process_variance > 0.0 && measurement_variance > 0.0 && initial_variance > 0.0)) {
    throw std::invalid_argument("contact filter variances must be > 0");
  }
  if (!(off_threshold < on_threshold)) throw std::invalid_argument("hysteresis needs off < on");
  if (!(transition_boost >= 0.0 && transition_lag > 0.0)) {
    throw std::invalid_argument("transition boost must be >= 0 and lag > 0");
  }
}

double force_to_probability(double force, const ContactFusionConfig& cfg) {
  const double f = std::max(force, 0.0);
  return 1.0 / (1.0 + std::exp(-(f - cfg.force_midpoint) / cfg.force_scale));
}

ContactBelief fuse_contact(const ContactBelief& belief, double prior, double force,
                           double time_since_transition, const ContactFusionConfig& cfg) {
  const double keep = 1.0 - cfg.prior_pull;
  const double x_pred = belief.probability + cfg.prior_pull * (prior - belief.probability);
  const double p_pred = keep * keep * belief.variance + cfg.process_variance;

  const double r = cfg.measurement_variance *
                   (1.0 + cfg.transition_boost *
                              std::exp(-time_since_transition / cfg.transition_lag));
  const double z = force_to_probability(force, cfg);
  const double gain = p_pred / (p_pred + r);

  ContactBelief out;
  out.probability = std::clamp(x_pred + gain * (z - x_pred), 0.0, 1.0);
  out.variance = (1.0 - gain) * p_pred;
  out.flag = belief.flag;
  if (!belief.flag && out.probability >= cfg.on_threshold) {
    out.flag = true;
  } else if (belief.flag && out.probability <= cfg.off_threshold) {
    out.flag = false;
  }
  return out;
}

ContactDetector::ContactDetector(GaitSchedule schedule, ContactFusionConfig cfg,
                                 double cutoff_hz)
    : schedule_(std::move(schedule)),
      cfg_(cfg),
      observer_(schedule_.legs(), cutoff_hz),
      beliefs_(static_cast<std::size_t>(schedule_.legs())) {
  schedule_.validate();
  cfg_.validate();
  for (auto& b : beliefs_) {
    b.variance = cfg_.initial_variance;
  }
}

void ContactDetector::update(double t, std::span<const double> force, double dt) {
  const auto filtered = observer_.update(force, dt);
  for (int i = 0; i < schedule_.legs(); ++i) {
    auto& b = beliefs_[static_cast<std::size_t>(i)];
    b = fuse_contact(b, schedule_.prior(t, i), filtered[static_cast<std::size_t>(i)],
                     schedule_.time_since_transition(t, i), cfg_);
  }
}

}  // namespace ainekf
