// Copyright 2026 The mrfuse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file response_simulator.hpp
 * @brief Ground-truth response generation and per-channel sampled signals.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mrfuse/error.hpp"
#include "mrfuse/structural_models.hpp"

namespace mrfuse {

enum class InputKind { kGroundAcceleration, kNodalForce };

/// Uniformly sampled excitation. Values are linearly interpolated between
/// samples and zero outside the record.
struct InputRecord {
  InputKind kind = InputKind::kNodalForce;
  int target_dof = -1;  // free DOF for nodal forces
  double sample_rate = 1.0;
  double start_time = 0.0;
  std::vector<double> samples;

  double end_time() const {
    return samples.empty() ? start_time
                           : start_time + static_cast<double>(samples.size() - 1) / sample_rate;
  }

  double value_at(double t) const {
    if (samples.empty()) return 0.0;
    const double s = (t - start_time) * sample_rate;
    const auto last = static_cast<double>(samples.size() - 1);
    if (s < -1e-9 || s > last + 1e-9) return 0.0;
    if (s <= 0.0) return samples.front();
    if (s >= last) return samples.back();
    const auto i = static_cast<std::size_t>(s);
    const double w = s - static_cast<double>(i);
    return (1.0 - w) * samples[i] + w * samples[i + 1];
  }

  void validate(const StructuralModel& model) const {
    if (!(sample_rate > 0.0)) throw InvalidArgument("input record: sample rate must be positive");
    for (double v : samples)
      if (!std::isfinite(v)) throw InvalidArgument("input record: non-finite sample");
    if (kind == InputKind::kNodalForce && (target_dof < 0 || target_dof >= model.dof_count()))
      throw InvalidArgument("input record: target DOF out of range");
    if (kind == InputKind::kGroundAcceleration && model.excitation != ExcitationKind::kGroundMotion)
      throw InvalidArgument("input record: ground acceleration on a force-excited model");
  }
};

/// Nodal load vector f(t) for the equation of motion in relative coordinates.
inline Eigen::VectorXd load_vector(const StructuralModel& model,
                                   const std::vector<InputRecord>& inputs, double t) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(model.dof_count());
  for (const auto& in : inputs) {
    const double v = in.value_at(t);
    if (in.kind == InputKind::kGroundAcceleration)
      f -= model.mass * model.ground_influence * v;
    else
      f(in.target_dof) += v;
  }
  return f;
}

inline double ground_acceleration(const std::vector<InputRecord>& inputs, double t) {
  double a = 0.0;
  for (const auto& in : inputs)
    if (in.kind == InputKind::kGroundAcceleration) a += in.value_at(t);
  return a;
}

// ---------------------------------------------------------------------------
// Newmark integration

/// Full response on a uniform grid t_i = i * dt (columns).
struct ResponseHistory {
  double dt = 0.0;
  Eigen::MatrixXd displacement;  // n x steps
  Eigen::MatrixXd velocity;
  Eigen::MatrixXd acceleration;  // relative
  std::vector<double> ground_acceleration;

  std::size_t steps() const { return static_cast<std::size_t>(displacement.cols()); }
  double time(std::size_t i) const { return static_cast<double>(i) * dt; }

  Eigen::VectorXd state(std::size_t i) const {
    Eigen::VectorXd s(2 * displacement.rows());
    s << displacement.col(i), velocity.col(i);
    return s;
  }

  /// State linearly interpolated at an arbitrary time inside the record.
  Eigen::VectorXd state_at(double t) const {
    const double s = std::clamp(t / dt, 0.0, static_cast<double>(steps() - 1));
    auto i = static_cast<std::size_t>(s);
    if (i + 1 >= steps()) return state(steps() - 1);
    const double w = s - static_cast<double>(i);
    return (1.0 - w) * state(i) + w * state(i + 1);
  }
};

/// One average-acceleration Newmark step operator (gamma = 1/2, beta = 1/4)
/// for fixed M, C, K and step h.
class NewmarkStepper {
 public:
  NewmarkStepper(const Eigen::MatrixXd& mass, const Eigen::MatrixXd& damping,
                 const Eigen::MatrixXd& stiffness, double h)
      : c_(damping), k_(stiffness), h_(h) {
    const Eigen::MatrixXd eff = mass + 0.5 * h * damping + 0.25 * h * h * stiffness;
    lu_.compute(eff);
    if (!(std::abs(lu_.determinant()) > 0.0) || !std::isfinite(lu_.determinant()))
      throw NumericalError("Newmark: singular effective stiffness");
  }

  /// Advances (u, v, a) in place given the load at the end of the step.
  void step(Eigen::Ref<Eigen::VectorXd> u, Eigen::Ref<Eigen::VectorXd> v,
            Eigen::Ref<Eigen::VectorXd> a, const Eigen::VectorXd& f_next) const {
    const Eigen::VectorXd u_pred = u + h_ * v + 0.25 * h_ * h_ * a;
    const Eigen::VectorXd v_pred = v + 0.5 * h_ * a;
    const Eigen::VectorXd a_next = lu_.solve(f_next - c_ * v_pred - k_ * u_pred);
    u = u_pred + 0.25 * h_ * h_ * a_next;
    v = v_pred + 0.5 * h_ * a_next;
    a = a_next;
  }

 private:
  Eigen::MatrixXd c_;
  Eigen::MatrixXd k_;
  double h_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

/// Integrates M u'' + C u' + K u = f(t) from rest (or from `initial_state`)
/// with average-acceleration Newmark.
inline ResponseHistory simulate_true_response(const StructuralModel& model,
                                              const std::vector<InputRecord>& inputs, double dt,
                                              double duration,
                                              const Eigen::VectorXd& parameters,
                                              const Eigen::VectorXd& initial_state = {}) {
  if (!(dt > 0.0)) throw InvalidArgument("simulate_true_response: dt must be positive");
  if (!(duration >= 0.0)) throw InvalidArgument("simulate_true_response: negative duration");
  for (const auto& in : inputs) in.validate(model);
  const int n = model.dof_count();
  const auto steps = static_cast<std::size_t>(std::llround(duration / dt)) + 1;

  const Eigen::MatrixXd k = model.stiffness(parameters);
  const Eigen::MatrixXd c = model.damping(parameters, k);
  const NewmarkStepper stepper(model.mass, c, k, dt);

  ResponseHistory h;
  h.dt = dt;
  h.displacement.resize(n, steps);
  h.velocity.resize(n, steps);
  h.acceleration.resize(n, steps);
  h.ground_acceleration.resize(steps);

  Eigen::VectorXd u = Eigen::VectorXd::Zero(n), v = Eigen::VectorXd::Zero(n);
  if (initial_state.size() == 2 * n) {
    u = initial_state.head(n);
    v = initial_state.tail(n);
  }
  const auto mass_llt = model.mass.llt();
  Eigen::VectorXd a = mass_llt.solve(load_vector(model, inputs, 0.0) - c * v - k * u);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    if (i > 0) stepper.step(u, v, a, load_vector(model, inputs, t));
    h.displacement.col(i) = u;
    h.velocity.col(i) = v;
    h.acceleration.col(i) = a;
    h.ground_acceleration[i] = ground_acceleration(inputs, t);
  }
  return h;
}

inline ResponseHistory simulate_true_response(const StructuralModel& model,
                                              const std::vector<InputRecord>& inputs, double dt,
                                              double duration) {
  return simulate_true_response(model, inputs, dt, duration, model.nominal_parameters());
}

// ---------------------------------------------------------------------------
// Channel signals

struct SensorChannel {
  std::string id;
  ResponseMap map;
  double sample_rate = 0.0;  // Hz
  double noise_ratio = 0.0;  // noise std / signal RMS
};

struct ChannelSignal {
  SensorChannel channel;
  double sample_rate = 0.0;  // current rate of `values`
  std::vector<double> times;
  std::vector<double> values;
  double noise_variance = 0.0;
};

/// Response of one map at every step of a simulated history.
inline ChannelSignal sample_response(const StructuralModel& model, const ResponseHistory& history,
                                     const SensorChannel& channel) {
  validate_response_map(model, channel.map);
  ChannelSignal s;
  s.channel = channel;
  s.sample_rate = 1.0 / history.dt;
  const std::size_t steps = history.steps();
  s.times.resize(steps);
  s.values.resize(steps);
  const auto& map = channel.map;
  Eigen::RowVectorXd row;
  if (map.quantity != Quantity::kAcceleration) row = kinematic_row(model, map);
  for (std::size_t i = 0; i < steps; ++i) {
    s.times[i] = static_cast<double>(i) / s.sample_rate;
    if (map.quantity == Quantity::kAcceleration) {
      double a = history.acceleration(map.target, i);
      if (map.frame == ResponseFrame::kAbsolute)
        a += model.ground_influence(map.target) * history.ground_acceleration[i];
      s.values[i] = a;
    } else {
      s.values[i] = row.dot(history.state(i));
    }
  }
  return s;
}

inline double rms(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc / static_cast<double>(v.size()));
}

/// Adds zero-mean Gaussian white noise with std = rms_ratio * RMS(signal).
/// The variance actually used is recorded in the result.
inline ChannelSignal add_noise(const ChannelSignal& signal, double rms_ratio, std::uint64_t seed) {
  if (!(rms_ratio >= 0.0)) throw InvalidArgument("add_noise: rms_ratio must be non-negative");
  ChannelSignal out = signal;
  const double sigma = rms_ratio * rms(signal.values);
  out.noise_variance = sigma * sigma;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (double& v : out.values) v += normal(rng);
  return out;
}

/// Integer source/target ratios keep every r-th sample starting at the first;
/// other ratios interpolate linearly at exact multiples of 1/target.
inline ChannelSignal downsample(const ChannelSignal& signal, double target_rate) {
  if (!(target_rate > 0.0)) throw InvalidArgument("downsample: target rate must be positive");
  const double source = signal.sample_rate;
  if (target_rate > source * (1.0 + 1e-12))
    throw InvalidArgument("downsample: target rate exceeds source rate");
  ChannelSignal out = signal;
  out.sample_rate = target_rate;
  out.times.clear();
  out.values.clear();
  if (signal.values.empty()) return out;

  const double ratio = source / target_rate;
  const double rounded = std::round(ratio);
  const double t0 = signal.times.front();
  if (std::abs(ratio - rounded) <= 1e-9 * ratio) {
    const auto r = static_cast<std::size_t>(rounded);
    for (std::size_t i = 0; i < signal.values.size(); i += r) {
      out.times.push_back(signal.times[i]);
      out.values.push_back(signal.values[i]);
    }
    return out;
  }
  const double t_last = signal.times.back();
  for (std::size_t k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) / target_rate;
    if (t > t_last + 1e-12) break;
    const double s = std::min((t - t0) * source, static_cast<double>(signal.values.size() - 1));
    const auto i = static_cast<std::size_t>(s);
    const double w = s - static_cast<double>(i);
    const double v = i + 1 < signal.values.size()
                         ? (1.0 - w) * signal.values[i] + w * signal.values[i + 1]
                         : signal.values[i];
    out.times.push_back(t);
    out.values.push_back(v);
  }
  return out;
}

/// Squared sample standard deviation over samples with t in [t_begin, t_end].
inline double estimate_noise_variance(const ChannelSignal& signal, double t_begin, double t_end) {
  if (signal.times.empty() || t_begin < signal.times.front() - 1e-12 ||
      t_end > signal.times.back() + 1e-12 || t_end < t_begin)
    throw InvalidArgument("estimate_noise_variance: window outside signal");
  double sum = 0.0, sum_sq = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < signal.times.size(); ++i) {
    if (signal.times[i] < t_begin - 1e-12 || signal.times[i] > t_end + 1e-12) continue;
    sum += signal.values[i];
    ++count;
  }
  if (count < 10) throw InvalidArgument("estimate_noise_variance: window shorter than 10 samples");
  const double mean = sum / static_cast<double>(count);
  for (std::size_t i = 0; i < signal.times.size(); ++i) {
    if (signal.times[i] < t_begin - 1e-12 || signal.times[i] > t_end + 1e-12) continue;
    const double d = signal.values[i] - mean;
    sum_sq += d * d;
  }
  return sum_sq / static_cast<double>(count - 1);
}

// ---------------------------------------------------------------------------
// Excitation generators

/// Band-limited stand-in for a recorded earthquake: Kanai-Tajimi filtered white
/// noise under a trapezoid-exponential envelope, scaled to `peak` (m/s^2).
inline InputRecord synthetic_ground_motion(double duration, double rate, double peak,
                                           std::uint64_t seed) {
  constexpr double kGroundFreq = 5.0 * std::numbers::pi;  // rad/s
  constexpr double kGroundDamping = 0.6;
  InputRecord rec;
  rec.kind = InputKind::kGroundAcceleration;
  rec.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(duration * rate)) + 1;
  rec.samples.resize(n);

  // Filter integrated at a finer step for accuracy, then sampled.
  constexpr int kSub = 10;
  const double h = 1.0 / (rate * kSub);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(h));
  double x = 0.0, v = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double filtered = -(2.0 * kGroundDamping * kGroundFreq * v + kGroundFreq * kGroundFreq * x);
    double env;
    if (t < 1.5) env = (t / 1.5) * (t / 1.5);
    else if (t < 8.0) env = 1.0;
    else env = std::exp(-0.18 * (t - 8.0));
    rec.samples[i] = env * filtered;
    for (int s = 0; s < kSub; ++s) {
      const double w = normal(rng);
      const double acc = -w - 2.0 * kGroundDamping * kGroundFreq * v - kGroundFreq * kGroundFreq * x;
      v += h * acc;
      x += h * v;
    }
  }
  double max_abs = 0.0;
  for (double a : rec.samples) max_abs = std::max(max_abs, std::abs(a));
  if (max_abs > 0.0)
    for (double& a : rec.samples) a *= peak / max_abs;
  return rec;
}

/// Gaussian white-noise nodal force of standard deviation `std_dev` (N).
inline InputRecord white_noise_force(int dof, double duration, double rate, double std_dev,
                                     std::uint64_t seed) {
  InputRecord rec;
  rec.kind = InputKind::kNodalForce;
  rec.target_dof = dof;
  rec.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(duration * rate)) + 1;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std_dev);
  rec.samples.resize(n);
  for (double& s : rec.samples) s = normal(rng);
  return rec;
}

/// Half-sine impact pulse of the given peak (N) and contact duration (s).
inline InputRecord half_sine_impact(int dof, double peak, double start, double pulse_duration,
                                    double duration, double rate) {
  InputRecord rec;
  rec.kind = InputKind::kNodalForce;
  rec.target_dof = dof;
  rec.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(duration * rate)) + 1;
  rec.samples.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate - start;
    if (t > 0.0 && t < pulse_duration)
      rec.samples[i] = peak * std::sin(std::numbers::pi * t / pulse_duration);
  }
  return rec;
}

// ---------------------------------------------------------------------------
// CSV

/// Reads a uniformly sampled record. Accepted layouts: two columns
/// `time_s,value` (rate inferred from the first interval), or a `# dt=<s>`
/// header followed by one value per line. Lines starting with '#' and a
/// non-numeric first line are skipped.
inline InputRecord read_input_csv(const std::string& path, InputKind kind, int target_dof = -1) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open input record '" + path + "'");
  InputRecord rec;
  rec.kind = kind;
  rec.target_dof = target_dof;
  double header_dt = 0.0;
  std::vector<double> times;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("dt=");
      if (pos != std::string::npos) header_dt = std::stod(line.substr(pos + 3));
      continue;
    }
    for (char& ch : line)
      if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
    std::istringstream ls(line);
    std::vector<double> cols;
    double x;
    while (ls >> x) cols.push_back(x);
    if (cols.empty()) {
      if (first) { first = false; continue; }
      throw InvalidArgument("input record '" + path + "': malformed line '" + line + "'");
    }
    first = false;
    if (cols.size() >= 2) {
      times.push_back(cols[0]);
      rec.samples.push_back(cols[1]);
    } else {
      rec.samples.push_back(cols[0]);
    }
  }
  if (rec.samples.size() < 2) throw InvalidArgument("input record '" + path + "': too few samples");
  if (!times.empty()) {
    if (times.size() != rec.samples.size())
      throw InvalidArgument("input record '" + path + "': mixed column counts");
    const double dt = times[1] - times[0];
    if (!(dt > 0.0)) throw InvalidArgument("input record '" + path + "': non-increasing time");
    rec.sample_rate = 1.0 / dt;
    rec.start_time = times[0];
  } else {
    if (!(header_dt > 0.0))
      throw InvalidArgument("input record '" + path + "': single-column file needs '# dt=' header");
    rec.sample_rate = 1.0 / header_dt;
  }
  return rec;
}

inline const char* quantity_name(Quantity q) {
  switch (q) {
    case Quantity::kAcceleration: return "acceleration";
    case Quantity::kDisplacement: return "displacement";
    case Quantity::kVelocity: return "velocity";
    case Quantity::kAxialStrain: return "axial_strain";
    case Quantity::kBendingStrain: return "bending_strain";
  }
  return "unknown";
}

inline void write_channel_csv(std::ostream& os, const ChannelSignal& s) {
  os << "# channel=" << s.channel.id << ",quantity=" << quantity_name(s.channel.map.quantity)
     << ",frequency=" << std::setprecision(12) << s.sample_rate
     << ",variance=" << std::setprecision(12) << s.noise_variance << "\n";
  os << "time,value\n";
  os << std::setprecision(12);
  for (std::size_t i = 0; i < s.values.size(); ++i) os << s.times[i] << "," << s.values[i] << "\n";
}

}  // namespace mrfuse
