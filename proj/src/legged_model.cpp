#include "ainekf/legged_model.hpp"

#include <stdexcept>
#include <string>

namespace ainekf {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) {
    throw std::invalid_argument("noise config: " + what);
  }
}

}  // namespace

void NoiseConfig::validate() const {
  require(gyro_noise >= 0.0 && accel_noise >= 0.0, "IMU noise must be >= 0");
  require(gyro_bias_walk >= 0.0 && accel_bias_walk >= 0.0, "bias walk must be >= 0");
  require((foot_noise.array() > 0.0).all(), "foot noise must be > 0 on every axis");
  require(swing_foot_variance > foot_noise.cwiseAbs2().maxCoeff(),
          "swing foot variance must exceed the contact foot variance");
  require(kinematic_noise > 0.0, "kinematic noise must be > 0");
  require((velocity_kinematic_noise.array() >= 0.0).all(),
          "velocity kinematic noise must be >= 0");
  require(window >= 1 && window <= kMaxWindow,
          "window must be in [1, " + std::to_string(kMaxWindow) + "]");
  require(alpha_max >= 1.0, "alpha_max must be >= 1");
  require(slip_threshold > 0.0, "slip threshold must be > 0");
  require(gravity.allFinite(), "gravity must be finite");
}

}  // namespace ainekf
