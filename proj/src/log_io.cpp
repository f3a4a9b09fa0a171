#include "ainekf/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace ainekf::sim {

namespace {

constexpr std::size_t kSensorColumns = 1 + 3 + 3 + kLegs * 7;
constexpr std::size_t kTruthColumns = 1 + 9 + 3 + 3 + kLegs * 4;

void put(std::string& line, double x) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
  if (!line.empty()) line.push_back(',');
  line.append(buf, static_cast<std::size_t>(n));
}

void put3(std::string& line, const Vec3& v) {
  put(line, v.x());
  put(line, v.y());
  put(line, v.z());
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

struct Header {
  double dt = 0.0;
};

/// Checks "# <tag> v1 N=4 dt=<x>".
Header parse_header(const std::string& line, const std::string& tag, const std::string& path) {
  std::istringstream in(line);
  std::string hash, got_tag, version, legs, dt;
  in >> hash >> got_tag >> version >> legs >> dt;
  if (hash != "#" || got_tag != tag) {
    throw LogError(path, 1, "expected a '# " + tag + "' header");
  }
  if (version != "v1") throw LogError(path, 1, "unsupported log version '" + version + "'");
  if (legs != "N=" + std::to_string(kLegs)) {
    throw LogError(path, 1, "leg count mismatch: log has '" + legs + "', expected N=" +
                                std::to_string(kLegs));
  }
  Header h;
  if (dt.rfind("dt=", 0) != 0) throw LogError(path, 1, "missing dt= field");
  const char* b = dt.data() + 3;
  const char* e = dt.data() + dt.size();
  auto [ptr, ec] = std::from_chars(b, e, h.dt);
  if (ec != std::errc() || ptr != e || !(h.dt > 0.0)) {
    throw LogError(path, 1, "invalid dt '" + dt.substr(3) + "'");
  }
  return h;
}

std::vector<double> parse_row(const std::string& line, std::size_t expected,
                              const std::string& path, std::size_t lineno) {
  std::vector<double> values;
  values.reserve(expected);
  const char* p = line.data();
  const char* end = p + line.size();
  while (p <= end) {
    const char* comma = std::find(p, end, ',');
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(p, comma, x);
    if (ec != std::errc() || ptr != comma) {
      throw LogError(path, lineno, "bad number in column " + std::to_string(values.size() + 1));
    }
    values.push_back(x);
    p = comma + 1;
  }
  if (values.size() != expected) {
    throw LogError(path, lineno, "expected " + std::to_string(expected) + " columns, got " +
                                     std::to_string(values.size()));
  }
  return values;
}

template <typename RowFn>
double read_rows(const std::filesystem::path& path, const std::string& tag, std::size_t columns,
                 RowFn&& on_row) {
  std::ifstream in(path);
  if (!in) throw LogError(path.string(), 0, "cannot open file");
  std::string line;
  if (!std::getline(in, line)) throw LogError(path.string(), 1, "empty log");
  const Header h = parse_header(line, tag, path.string());
  std::size_t lineno = 1;
  double last_t = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto row = parse_row(line, columns, path.string(), lineno);
    if (!(row[0] > last_t)) throw LogError(path.string(), lineno, "timestamps must increase");
    last_t = row[0];
    on_row(row);
  }
  return h.dt;
}

Vec3 vec_at(const std::vector<double>& r, std::size_t k) {
  return {r[k], r[k + 1], r[k + 2]};
}

}  // namespace

LogError::LogError(const std::string& path, std::size_t line, const std::string& what)
    : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

void write_sensor_log(const Streams& streams, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  std::string line;
  line.reserve(kSensorColumns * 24);
  out << "# aiekf-log v1 N=" << kLegs << " dt=" << streams.dt << '\n';
  out << "# t,gyro[3],accel[3],{relpos[3],relvel[3],force} x " << kLegs << '\n';
  for (const auto& s : streams.sensors) {
    line.clear();
    put(line, s.imu.t);
    put3(line, s.imu.gyro);
    put3(line, s.imu.accel);
    for (int i = 0; i < kLegs; ++i) {
      put3(line, s.kin.rel_pos.col(i));
      put3(line, s.kin.rel_vel.col(i));
      put(line, s.force[static_cast<std::size_t>(i)]);
    }
    out << line << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_truth_log(const Streams& streams, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  std::string line;
  line.reserve(kTruthColumns * 24);
  out << "# aiekf-truth v1 N=" << kLegs << " dt=" << streams.dt << '\n';
  out << "# t,R[9 row-major],v[3],p[3],{foot[3],contact} x " << kLegs << '\n';
  for (const auto& f : streams.truth) {
    line.clear();
    put(line, f.t);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) put(line, f.R(r, c));
    }
    put3(line, f.v);
    put3(line, f.p);
    for (std::size_t i = 0; i < kLegs; ++i) {
      put3(line, f.foot_pos[i]);
      put(line, f.contact[i] ? 1.0 : 0.0);
    }
    out << line << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Streams read_sensor_log(const std::filesystem::path& path) {
  Streams s;
  s.dt = read_rows(path, "aiekf-log", kSensorColumns, [&](const std::vector<double>& r) {
    SensorFrame f;
    f.imu.t = r[0];
    f.imu.gyro = vec_at(r, 1);
    f.imu.accel = vec_at(r, 4);
    for (int i = 0; i < kLegs; ++i) {
      const std::size_t k = 7 + 7 * static_cast<std::size_t>(i);
      f.kin.rel_pos.col(i) = vec_at(r, k);
      f.kin.rel_vel.col(i) = vec_at(r, k + 3);
      f.force[static_cast<std::size_t>(i)] = r[k + 6];
    }
    s.sensors.push_back(f);
  });
  return s;
}

std::vector<TruthFrame> read_truth_log(const std::filesystem::path& path) {
  std::vector<TruthFrame> frames;
  (void)read_rows(path, "aiekf-truth", kTruthColumns, [&](const std::vector<double>& r) {
    TruthFrame f;
    f.t = r[0];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) f.R(a, b) = r[1 + 3 * static_cast<std::size_t>(a) + static_cast<std::size_t>(b)];
    }
    f.v = vec_at(r, 10);
    f.p = vec_at(r, 13);
    for (std::size_t i = 0; i < kLegs; ++i) {
      f.foot_pos[i] = vec_at(r, 16 + 4 * i);
      f.contact[i] = r[19 + 4 * i] > 0.5;
    }
    frames.push_back(f);
  });
  return frames;
}

Streams read_logs(const std::filesystem::path& sensor_path,
                  const std::filesystem::path& truth_path) {
  Streams s = read_sensor_log(sensor_path);
  s.truth = read_truth_log(truth_path);
  if (s.truth.size() != s.sensors.size()) {
    throw LogError(truth_path.string(), s.truth.size() + 1,
                   "truth has " + std::to_string(s.truth.size()) + " rows, sensors have " +
                       std::to_string(s.sensors.size()));
  }
  for (std::size_t k = 0; k < s.truth.size(); ++k) {
    if (std::abs(s.truth[k].t - s.sensors[k].imu.t) > 1e-9) {
      throw LogError(truth_path.string(), k + 3, "timestamp does not match the sensor log");
    }
  }
  return s;
}

}  // namespace ainekf::sim
