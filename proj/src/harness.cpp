#include "ainekf/harness.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace ainekf::harness {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_short(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// Value parsers throw std::invalid_argument; the caller adds file/line.
double to_double(std::string_view s) {
  s = trim(s);
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(x)) {
    throw std::invalid_argument("expected a number, got '" + std::string(s) + "'");
  }
  return x;
}

long long to_int(std::string_view s) {
  s = trim(s);
  long long x = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected an integer, got '" + std::string(s) + "'");
  }
  return x;
}

std::vector<double> to_list(std::string_view s) {
  std::vector<double> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(to_double(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

/// "x" broadcasts to all three axes; "x, y, z" sets each.
Vec3 to_vec3(std::string_view s) {
  const auto v = to_list(s);
  if (v.size() == 1) return Vec3::Constant(v[0]);
  if (v.size() == 3) return {v[0], v[1], v[2]};
  throw std::invalid_argument("expected 1 or 3 comma-separated numbers");
}

std::string vec_text(const Vec3& v) {
  return fmt(v.x()) + ", " + fmt(v.y()) + ", " + fmt(v.z());
}

struct Key {
  std::function<void(Config&, std::string_view)> set;
  std::function<std::string(const Config&)> get;
};

template <typename Get>
Key number_key(Get field) {
  return {[field](Config& c, std::string_view v) { field(c) = to_double(v); },
          [field](const Config& c) { return fmt(field(const_cast<Config&>(c))); }};
}

template <typename Get>
Key vec_key(Get field) {
  return {[field](Config& c, std::string_view v) { field(c) = to_vec3(v); },
          [field](const Config& c) { return vec_text(field(const_cast<Config&>(c))); }};
}

const std::map<std::string, Key>& keys() {
  static const std::map<std::string, Key> table = [] {
    std::map<std::string, Key> k;
    // Scenario.
    k["gait"] = {[](Config& c, std::string_view v) { c.scenario.gait = parse_gait(trim(v)); },
                 [](const Config& c) { return std::string(to_string(c.scenario.gait)); }};
    k["terrain"] = {
        [](Config& c, std::string_view v) { c.scenario.terrain = sim::parse_terrain(trim(v)); },
        [](const Config& c) { return std::string(sim::to_string(c.scenario.terrain)); }};
    k["rough_amplitude"] = number_key([](Config& c) -> double& { return c.scenario.rough_amplitude; });
    k["duration"] = number_key([](Config& c) -> double& { return c.scenario.duration; });
    k["dt"] = number_key([](Config& c) -> double& { return c.scenario.dt; });
    k["seed"] = {[](Config& c, std::string_view v) {
                   const long long s = to_int(v);
                   if (s < 0) throw std::invalid_argument("seed must be >= 0");
                   c.scenario.seed = static_cast<std::uint64_t>(s);
                 },
                 [](const Config& c) { return std::to_string(c.scenario.seed); }};
    k["speed"] = number_key([](Config& c) -> double& { return c.scenario.speed; });
    k["body_height"] = number_key([](Config& c) -> double& { return c.scenario.body_height; });
    k["mass"] = number_key([](Config& c) -> double& { return c.scenario.mass; });
    k["initial_gyro_bias"] = vec_key([](Config& c) -> Vec3& { return c.scenario.initial_gyro_bias; });
    k["initial_accel_bias"] = vec_key([](Config& c) -> Vec3& { return c.scenario.initial_accel_bias; });
    k["slip_rate"] = number_key([](Config& c) -> double& { return c.scenario.slip_rate; });
    k["slip_speed_min"] = number_key([](Config& c) -> double& { return c.scenario.slip_speed_min; });
    k["slip_speed_max"] = number_key([](Config& c) -> double& { return c.scenario.slip_speed_max; });
    k["slip_duration"] = number_key([](Config& c) -> double& { return c.scenario.slip_duration; });
    k["misdetection_rate"] = number_key([](Config& c) -> double& { return c.scenario.misdetection_rate; });
    k["misdetection_duration"] =
        number_key([](Config& c) -> double& { return c.scenario.misdetection_duration; });
    k["sensor_gyro"] = number_key([](Config& c) -> double& { return c.scenario.noise.gyro; });
    k["sensor_accel"] = number_key([](Config& c) -> double& { return c.scenario.noise.accel; });
    k["sensor_gyro_bias_walk"] =
        number_key([](Config& c) -> double& { return c.scenario.noise.gyro_bias_walk; });
    k["sensor_accel_bias_walk"] =
        number_key([](Config& c) -> double& { return c.scenario.noise.accel_bias_walk; });
    k["sensor_kinematic_position"] =
        number_key([](Config& c) -> double& { return c.scenario.noise.kinematic_position; });
    k["sensor_kinematic_velocity"] =
        number_key([](Config& c) -> double& { return c.scenario.noise.kinematic_velocity; });
    k["sensor_force"] = number_key([](Config& c) -> double& { return c.scenario.noise.force; });

    // Filter noise.
    k["gyro_noise"] = number_key([](Config& c) -> double& { return c.harness.noise.gyro_noise; });
    k["accel_noise"] = number_key([](Config& c) -> double& { return c.harness.noise.accel_noise; });
    k["gyro_bias_walk"] = number_key([](Config& c) -> double& { return c.harness.noise.gyro_bias_walk; });
    k["accel_bias_walk"] = number_key([](Config& c) -> double& { return c.harness.noise.accel_bias_walk; });
    k["foot_noise"] = vec_key([](Config& c) -> Vec3& { return c.harness.noise.foot_noise; });
    k["swing_foot_variance"] =
        number_key([](Config& c) -> double& { return c.harness.noise.swing_foot_variance; });
    k["kinematic_noise"] = number_key([](Config& c) -> double& { return c.harness.noise.kinematic_noise; });
    k["velocity_kinematic_noise"] =
        vec_key([](Config& c) -> Vec3& { return c.harness.noise.velocity_kinematic_noise; });
    k["window"] = {[](Config& c, std::string_view v) {
                     c.harness.noise.window = static_cast<int>(to_int(v));
                   },
                   [](const Config& c) { return std::to_string(c.harness.noise.window); }};
    k["alpha_max"] = number_key([](Config& c) -> double& { return c.harness.noise.alpha_max; });
    k["slip_threshold"] = number_key([](Config& c) -> double& { return c.harness.noise.slip_threshold; });
    k["gravity"] = vec_key([](Config& c) -> Vec3& { return c.harness.noise.gravity; });

    // Estimator.
    k["discretization"] = {
        [](Config& c, std::string_view v) {
          const std::string s = lower(trim(v));
          if (s == "first-order" || s == "first_order") {
            c.harness.estimator.discretization = Discretization::kFirstOrder;
          } else if (s == "exponential") {
            c.harness.estimator.discretization = Discretization::kExponential;
          } else {
            throw std::invalid_argument("discretization must be first-order or exponential");
          }
        },
        [](const Config& c) {
          return std::string(c.harness.estimator.discretization == Discretization::kFirstOrder
                                 ? "first-order"
                                 : "exponential");
        }};
    k["imu_integration"] = {
        [](Config& c, std::string_view v) {
          const std::string s = lower(trim(v));
          if (s == "trapezoidal") {
            c.harness.estimator.imu_integration = ImuIntegration::kTrapezoidal;
          } else if (s == "previous") {
            c.harness.estimator.imu_integration = ImuIntegration::kPreviousSample;
          } else {
            throw std::invalid_argument("imu_integration must be trapezoidal or previous");
          }
        },
        [](const Config& c) {
          return std::string(c.harness.estimator.imu_integration == ImuIntegration::kTrapezoidal
                                 ? "trapezoidal"
                                 : "previous");
        }};

    // Harness.
    k["contact_source"] = {
        [](Config& c, std::string_view v) {
          const std::string s = lower(trim(v));
          if (s == "truth") {
            c.harness.contact_source = ContactSource::kTruth;
          } else if (s == "detector") {
            c.harness.contact_source = ContactSource::kDetector;
          } else {
            throw std::invalid_argument("contact_source must be truth or detector");
          }
        },
        [](const Config& c) {
          return std::string(c.harness.contact_source == ContactSource::kTruth ? "truth"
                                                                                : "detector");
        }};
    k["burn_in"] = number_key([](Config& c) -> double& { return c.harness.burn_in; });
    k["divergence_trace"] = number_key([](Config& c) -> double& { return c.harness.divergence_trace; });
    k["init_sigma_rotation"] = number_key([](Config& c) -> double& { return c.harness.init.rotation; });
    k["init_sigma_velocity"] = number_key([](Config& c) -> double& { return c.harness.init.velocity; });
    k["init_sigma_position"] = number_key([](Config& c) -> double& { return c.harness.init.position; });
    k["init_sigma_foot"] = number_key([](Config& c) -> double& { return c.harness.init.foot; });
    k["init_sigma_gyro_bias"] = number_key([](Config& c) -> double& { return c.harness.init.gyro_bias; });
    k["init_sigma_accel_bias"] = number_key([](Config& c) -> double& { return c.harness.init.accel_bias; });
    k["init_rotation_error"] = vec_key([](Config& c) -> Vec3& { return c.harness.init_rotation_error; });
    k["init_velocity_error"] = vec_key([](Config& c) -> Vec3& { return c.harness.init_velocity_error; });
    k["force_cutoff_hz"] = number_key([](Config& c) -> double& { return c.harness.force_cutoff_hz; });
    k["contact_force_midpoint"] = number_key([](Config& c) -> double& { return c.harness.fusion.force_midpoint; });
    k["contact_force_scale"] = number_key([](Config& c) -> double& { return c.harness.fusion.force_scale; });
    k["contact_prior_pull"] = number_key([](Config& c) -> double& { return c.harness.fusion.prior_pull; });
    k["contact_process_variance"] =
        number_key([](Config& c) -> double& { return c.harness.fusion.process_variance; });
    k["contact_measurement_variance"] =
        number_key([](Config& c) -> double& { return c.harness.fusion.measurement_variance; });
    k["contact_transition_boost"] =
        number_key([](Config& c) -> double& { return c.harness.fusion.transition_boost; });
    k["contact_transition_lag"] =
        number_key([](Config& c) -> double& { return c.harness.fusion.transition_lag; });
    k["contact_on_threshold"] = number_key([](Config& c) -> double& { return c.harness.fusion.on_threshold; });
    k["contact_off_threshold"] = number_key([](Config& c) -> double& { return c.harness.fusion.off_threshold; });
    k["contact_initial_variance"] =
        number_key([](Config& c) -> double& { return c.harness.fusion.initial_variance; });
    return k;
  }();
  return table;
}

sim::SlipEvent parse_slip(std::string_view v) {
  const auto x = to_list(v);
  if (x.size() != 6) {
    throw std::invalid_argument("slip needs leg, t_start, duration, vx, vy, vz");
  }
  if (x[0] != std::floor(x[0])) throw std::invalid_argument("slip leg must be an integer");
  return {static_cast<int>(x[0]), x[1], x[2], Vec3(x[3], x[4], x[5])};
}

}  // namespace

// -----------------------------------------------------------------------------
// Variants and config
// -----------------------------------------------------------------------------

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kIekf:
      return "IEKF";
    case Variant::kIekfSr:
      return "IEKF+SR";
    case Variant::kIekfFe:
      return "IEKF+FE";
    case Variant::kIekfSrFe:
      return "IEKF+SR+FE";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  std::string s = lower(trim(name));
  std::replace(s.begin(), s.end(), '-', '+');
  std::replace(s.begin(), s.end(), '_', '+');
  if (s == "iekf") return Variant::kIekf;
  if (s == "iekf+sr") return Variant::kIekfSr;
  if (s == "iekf+fe") return Variant::kIekfFe;
  if (s == "iekf+sr+fe" || s == "iekf+fe+sr") return Variant::kIekfSrFe;
  throw std::invalid_argument("unknown variant '" + std::string(name) +
                              "' (IEKF, IEKF+SR, IEKF+FE, IEKF+SR+FE)");
}

EstimatorOptions options_for(Variant v, EstimatorOptions base) {
  base.slip_rejection = v == Variant::kIekfSr || v == Variant::kIekfSrFe;
  base.foot_noise_estimation = v == Variant::kIekfFe || v == Variant::kIekfSrFe;
  return base;
}

void HarnessConfig::validate() const {
  noise.validate();
  fusion.validate();
  auto fail = [](const std::string& what) { throw std::invalid_argument("harness: " + what); };
  if (!(force_cutoff_hz > 0.0)) fail("force_cutoff_hz must be > 0");
  if (!(burn_in >= 0.0)) fail("burn_in must be >= 0");
  if (!(divergence_trace > 0.0)) fail("divergence_trace must be > 0");
  const double s[] = {init.rotation, init.velocity, init.position,
                      init.foot, init.gyro_bias, init.accel_bias};
  for (double x : s) {
    if (!(x > 0.0)) fail("initial sigmas must be > 0");
  }
  if (!init_rotation_error.allFinite() || !init_velocity_error.allFinite()) {
    fail("initial errors must be finite");
  }
}

ConfigError::ConfigError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(line > 0 ? source + ":" + std::to_string(line) + ": " + what
                                  : source + ": " + what),
      line_(line) {}

void apply_config_text(std::string_view text, Config& cfg, const std::string& source) {
  std::size_t lineno = 0;
  bool slips_reset = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(source, lineno, "expected key = value");
    const std::string key = lower(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    try {
      if (key == "slip") {
        // A file that lists slips replaces the inherited list.
        if (!slips_reset) {
          cfg.scenario.slips.clear();
          slips_reset = true;
        }
        cfg.scenario.slips.push_back(parse_slip(value));
        continue;
      }
      const auto it = keys().find(key);
      if (it == keys().end()) throw std::invalid_argument("unknown key '" + key + "'");
      it->second.set(cfg, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(source, lineno, e.what());
    }
  }
  try {
    cfg.scenario.validate();
    cfg.harness.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source, 0, e.what());
  }
}

void load_config_file(const std::filesystem::path& path, Config& cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(ss.str(), cfg, path.string());
}

std::string dump_config(const Config& cfg) {
  std::string out;
  for (const auto& [name, key] : keys()) {
    out += name + " = " + key.get(cfg) + "\n";
  }
  for (const auto& s : cfg.scenario.slips) {
    out += "slip = " + std::to_string(s.leg) + ", " + fmt(s.t_start) + ", " + fmt(s.duration) +
           ", " + vec_text(s.velocity) + "\n";
  }
  return out;
}

// -----------------------------------------------------------------------------
// Errors
// -----------------------------------------------------------------------------

std::array<double, 2> roll_pitch_error(const Mat3& R_hat, const Mat3& R) {
  const Vec3 e = euler_zyx(R.transpose() * R_hat);
  return {e(0), e(1)};
}

void ErrorAccumulator::add(const Mat3& R_hat, const Vec3& v_hat, const Mat3& R, const Vec3& v) {
  const Vec3 dv = R_hat.transpose() * v_hat - R.transpose() * v;
  const auto rp = roll_pitch_error(R_hat, R);
  sq_vel_ += dv.cwiseAbs2();
  sq_roll_ += rp[0] * rp[0];
  sq_pitch_ += rp[1] * rp[1];
  ++n_;
}

Rmse ErrorAccumulator::result() const {
  Rmse r;
  r.samples = n_;
  if (n_ == 0) return r;
  const double n = static_cast<double>(n_);
  r.velocity = (sq_vel_ / n).cwiseSqrt();
  r.roll = std::sqrt(sq_roll_ / n) * kRadToDeg;
  r.pitch = std::sqrt(sq_pitch_ / n) * kRadToDeg;
  return r;
}

// -----------------------------------------------------------------------------
// Runs
// -----------------------------------------------------------------------------

FilterState<kLegs> initial_state(const sim::Streams& streams, const HarnessConfig& cfg) {
  if (streams.truth.empty()) throw std::invalid_argument("streams carry no truth");
  FilterState<kLegs> s;
  s.chi = streams.truth.front().group_state();
  s.chi.R = exp_so3(cfg.init_rotation_error) * s.chi.R;
  s.chi.v() += cfg.init_velocity_error;
  s.bias.setZero();

  ErrorVec<kLegs> sigma;
  sigma.segment<3>(0).setConstant(cfg.init.rotation);
  sigma.segment<3>(3).setConstant(cfg.init.velocity);
  sigma.segment<3>(6).setConstant(cfg.init.position);
  sigma.segment<3 * kLegs>(9).setConstant(cfg.init.foot);
  sigma.segment<3>(kTangentDim<kLegs>).setConstant(cfg.init.gyro_bias);
  sigma.segment<3>(kTangentDim<kLegs> + 3).setConstant(cfg.init.accel_bias);
  s.P = sigma.cwiseAbs2().asDiagonal();
  return s;
}

RunResult run_variant(const sim::Streams& streams, Variant variant, const Config& cfg,
                      const TickObserver& observer) {
  if (streams.sensors.size() != streams.truth.size()) {
    throw std::invalid_argument("stream length mismatch: " + std::to_string(streams.sensors.size()) +
                                " sensor frames, " + std::to_string(streams.truth.size()) +
                                " truth frames");
  }
  if (streams.sensors.size() < 2) throw std::invalid_argument("streams need at least two frames");

  const HarnessConfig& hc = cfg.harness;
  Filter filter(hc.noise, options_for(variant, hc.estimator));
  filter.initialize(initial_state(streams, hc), streams.sensors.front().imu);

  const GaitSchedule schedule = GaitSchedule::make(cfg.scenario.gait);
  std::optional<ContactDetector> detector;
  if (hc.contact_source == ContactSource::kDetector) {
    detector.emplace(schedule, hc.fusion, hc.force_cutoff_hz);
    detector->update(streams.sensors.front().imu.t, streams.sensors.front().force, streams.dt);
  }

  RunResult result;
  result.variant = variant;
  ErrorAccumulator acc;
  const double t0 = streams.sensors.front().imu.t;
  ContactVector<kLegs> contact;

  for (std::size_t k = 1; k < streams.sensors.size(); ++k) {
    const sim::SensorFrame& s = streams.sensors[k];
    const sim::TruthFrame& truth = streams.truth[k];
    std::array<double, kLegs> prior{};
    for (int i = 0; i < kLegs; ++i) prior[static_cast<std::size_t>(i)] = schedule.prior(s.imu.t, i);

    if (detector) {
      detector->update(s.imu.t, s.force, s.imu.t - streams.sensors[k - 1].imu.t);
      for (std::size_t i = 0; i < kLegs; ++i) {
        contact.flag[i] = detector->beliefs()[i].flag;
        contact.probability[i] = detector->beliefs()[i].probability;
      }
    } else {
      for (std::size_t i = 0; i < kLegs; ++i) {
        contact.flag[i] = truth.contact[i];
        contact.probability[i] = truth.contact[i] ? 1.0 : 0.0;
      }
    }

    const FilterStatus status = filter.step(s.imu, s.kin, contact);
    result.ticks = k;
    const auto& st = filter.state();
    std::string fault;
    if (status == FilterStatus::kNonFinite) {
      fault = "non-finite state";
    } else if (status == FilterStatus::kSingularInnovation) {
      fault = "singular innovation covariance";
    } else if (!st.P.allFinite() || !st.chi.translations.allFinite() || !st.chi.R.allFinite() ||
               !st.bias.allFinite()) {
      fault = "non-finite state";
    } else if (st.P.trace() > hc.divergence_trace) {
      fault = "covariance trace " + fmt_short(st.P.trace()) + " above limit";
    }
    if (!fault.empty()) {
      result.diverged = true;
      result.diverged_at = s.imu.t;
      result.fault = fault;
      break;
    }

    if (s.imu.t - t0 > hc.burn_in) {
      acc.add(st.chi.R, st.chi.v(), truth.R, truth.v);
    }
    if (observer) observer(TickView{k, filter, truth, contact, prior});
  }
  result.rmse = acc.result();
  return result;
}

EvalReport run_eval(const sim::Streams& streams, std::vector<Variant> variants,
                    const Config& cfg, const std::string& scenario) {
  std::sort(variants.begin(), variants.end());
  variants.erase(std::unique(variants.begin(), variants.end()), variants.end());
  EvalReport report;
  report.scenario = scenario;
  report.burn_in = cfg.harness.burn_in;
  for (Variant v : variants) {
    report.runs.push_back(run_variant(streams, v, cfg));
  }
  return report;
}

bool any_diverged(const EvalReport& report) {
  return std::any_of(report.runs.begin(), report.runs.end(),
                     [](const RunResult& r) { return r.diverged; });
}

namespace {

std::string result_columns(const RunResult& r) {
  std::string s = r.diverged ? "diverged" : "ok";
  s += "," + std::to_string(r.rmse.samples);
  for (int j = 0; j < 3; ++j) s += "," + fmt_short(r.rmse.velocity(j));
  s += "," + fmt_short(r.rmse.roll) + "," + fmt_short(r.rmse.pitch);
  return s;
}

constexpr const char* kResultHeader = "status,samples,vx,vy,vz,roll,pitch";

}  // namespace

void write_report(const EvalReport& report, std::ostream& out) {
  out << "# aiekf eval report v1\n";
  if (!report.scenario.empty()) out << "# scenario: " << report.scenario << "\n";
  out << "# velocity: RMSE of R_hat^T v_hat - R^T v per body axis [m/s]\n";
  out << "# attitude: RMSE of ZYX-Euler roll/pitch of R^T R_hat [deg]\n";
  out << "# burn-in: " << fmt_short(report.burn_in) << " s excluded\n";
  out << "variant," << kResultHeader << "\n";
  for (const auto& r : report.runs) {
    out << to_string(r.variant) << "," << result_columns(r) << "\n";
  }
  for (const auto& r : report.runs) {
    if (r.diverged) {
      out << "# " << to_string(r.variant) << " diverged at t=" << fmt_short(r.diverged_at)
          << ": " << r.fault << "\n";
    }
  }
}

std::vector<SweepRow> noise_sweep(const sim::Streams& streams, const std::vector<double>& grid,
                                  Variant variant, const Config& cfg) {
  std::vector<SweepRow> rows;
  for (double w : grid) {
    Config c = cfg;
    c.harness.noise.foot_noise = Vec3::Constant(w);
    c.harness.noise.validate();
    rows.push_back({w, run_variant(streams, variant, c)});
  }
  return rows;
}

void write_sweep(const std::vector<SweepRow>& rows, Variant variant, std::ostream& out) {
  out << "# aiekf foot-noise sweep v1\n# variant: " << to_string(variant) << "\n";
  out << "foot_noise," << kResultHeader << "\n";
  for (const auto& r : rows) {
    out << fmt_short(r.foot_noise) << "," << result_columns(r.result) << "\n";
  }
}

std::vector<TableRow> table(const Config& cfg) {
  std::vector<TableRow> rows;
  for (GaitType gait : {GaitType::kTrot, GaitType::kFlyingTrot, GaitType::kPronk}) {
    for (sim::Terrain terrain : {sim::Terrain::kFlat, sim::Terrain::kRough}) {
      Config c = cfg;
      c.scenario.gait = gait;
      c.scenario.terrain = terrain;
      const sim::Streams streams = sim::generate(c.scenario);
      for (Variant v : kAllVariants) {
        rows.push_back({gait, terrain, run_variant(streams, v, c)});
      }
    }
  }
  return rows;
}

void write_table(const std::vector<TableRow>& rows, std::ostream& out) {
  out << "# aiekf table v1\n";
  out << "gait,terrain,variant," << kResultHeader << "\n";
  for (const auto& r : rows) {
    out << to_string(r.gait) << "," << sim::to_string(r.terrain) << ","
        << to_string(r.result.variant) << "," << result_columns(r.result) << "\n";
  }
}

TraceWriter::TraceWriter(const std::filesystem::path& dir, Variant variant, double alpha_max)
    : alpha_max_(alpha_max) {
  std::filesystem::create_directories(dir);
  std::string tag(to_string(variant));
  std::replace(tag.begin(), tag.end(), '+', '_');
  for (std::size_t i = 0; i < kLegs; ++i) {
    const auto path = dir / ("trace_" + tag + "_leg" + std::to_string(i) + ".csv");
    files_[i].open(path);
    if (!files_[i]) throw std::runtime_error("cannot open " + path.string());
    files_[i] << "t,contact,probability,d,rejected,alpha_xx,alpha_yy,alpha_zz,prior\n";
  }
}

void TraceWriter::operator()(const TickView& view) {
  const auto& d = view.filter.diagnostics();
  for (std::size_t i = 0; i < kLegs; ++i) {
    char buf[256];
    const Vec3 a = d.alpha[i] / alpha_max_;
    std::snprintf(buf, sizeof buf, "%.6f,%d,%.6g,%.6g,%d,%.6g,%.6g,%.6g,%.6g\n", d.t,
                  view.contact.flag[i] ? 1 : 0, view.contact.probability[i], d.mahalanobis[i],
                  d.rejected[i] ? 1 : 0, a.x(), a.y(), a.z(), view.prior[i]);
    files_[i] << buf;
  }
}

Vec3 calibrate_velocity_noise(const sim::Streams& streams, const Config& cfg) {
  Vec3 sum = Vec3::Zero();
  std::size_t n = 0;
  const double t0 = streams.sensors.front().imu.t;
  auto observe = [&](const TickView& view) {
    if (view.truth.t - t0 <= cfg.harness.burn_in) return;
    const auto& st = view.filter.state();
    const auto& d = view.filter.diagnostics();
    for (std::size_t i = 0; i < kLegs; ++i) {
      if (!d.contact[i]) continue;
      const Vec3& e = d.innovation[i];
      const Mat3 q = st.chi.R.transpose() * (e * e.transpose() - d.velocity_prior) * st.chi.R;
      sum += q.diagonal();
      ++n;
    }
  };
  const RunResult r = run_variant(streams, Variant::kIekf, cfg, observe);
  if (r.diverged || n == 0) {
    throw std::runtime_error("velocity-noise calibration needs a stance segment after burn-in");
  }
  return (sum / static_cast<double>(n)).cwiseMax(0.0).cwiseSqrt();
}

}  // namespace ainekf::harness
