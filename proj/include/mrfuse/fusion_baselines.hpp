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
 * @file fusion_baselines.hpp
 * @brief Model-free collocated displacement/acceleration fusion.
 *
 * Both baselines run a two-state (displacement, velocity) kinematic Kalman
 * filter with the measured acceleration as a control input, linearly
 * interpolated between samples:
 *
 *   d+ = d + h v + h^2 (a0/3 + a1/6)
 *   v+ = v + h (a0 + a1)/2
 *
 * The acceleration noise enters as process noise. Displacement samples are
 * assimilated when they arrive.
 *
 *  - DF1: forward filter followed by a fixed-interval Rauch-Tung-Striebel pass.
 *  - DF2: short-term-memory filter. At each displacement sample the estimate is
 *         recomputed from a diffuse prior placed at the start of a trailing
 *         window of `memory_intervals` displacement periods; in between the
 *         estimate is propagated causally.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "mrfuse/error.hpp"
#include "mrfuse/multirate_scheduler.hpp"
#include "mrfuse/response_simulator.hpp"

namespace mrfuse {

struct KinematicFusionProblem {
  ChannelSignal acceleration;  // high rate
  ChannelSignal displacement;  // low rate, same DOF and frame
  double acceleration_variance = 0.0;
  double displacement_variance = 0.0;
  double process_noise_scale = 1.0;  // multiplies acceleration_variance in Q
  Eigen::Vector2d initial_mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d initial_covariance = Eigen::Vector2d(1.0, 1.0).asDiagonal();
  double time_tolerance = 1e-9;
};

struct KinematicEstimate {
  std::string algorithm;
  std::vector<double> times;  // acceleration sample times
  std::vector<double> displacement;
  std::vector<double> velocity;
  std::vector<double> displacement_variance;
  std::vector<double> velocity_variance;
};

namespace detail {

struct KinematicStep {
  Eigen::Matrix2d f;
  Eigen::Vector2d g;
  Eigen::Matrix2d q;
};

class KinematicFusion {
 public:
  explicit KinematicFusion(const KinematicFusionProblem& p) : p_(p) {
    if (p.acceleration.values.empty() || p.displacement.values.empty())
      throw InvalidArgument("kinematic fusion: empty channel");
    if (!(p.displacement_variance > 0.0))
      throw InvalidArgument("kinematic fusion: displacement variance must be positive");
    if (!(p.acceleration_variance >= 0.0) || !(p.process_noise_scale >= 0.0))
      throw InvalidArgument("kinematic fusion: negative acceleration noise");
    const std::array<ChannelSignal, 2> both{p.acceleration, p.displacement};
    timeline_ = merge_timelines(both, p.time_tolerance);
    for (const auto& ev : timeline_.events) {
      int disp = -1;
      bool acc = false;
      for (std::size_t i = 0; i < ev.channels.size(); ++i) {
        if (ev.channels[i] == 0) acc = true;
        if (ev.channels[i] == 1) disp = static_cast<int>(i);
      }
      has_acc_.push_back(acc);
      disp_value_.push_back(disp >= 0 ? ev.values(disp) : std::numeric_limits<double>::quiet_NaN());
    }
  }

  std::size_t size() const { return timeline_.events.size(); }
  double time(std::size_t k) const { return timeline_.events[k].time; }
  bool has_acceleration(std::size_t k) const { return has_acc_[k]; }
  bool has_displacement(std::size_t k) const { return !std::isnan(disp_value_[k]); }

  double acceleration_at(double t) const {
    const auto& s = p_.acceleration;
    if (t <= s.times.front()) return s.values.front();
    if (t >= s.times.back()) return s.values.back();
    const auto it = std::upper_bound(s.times.begin(), s.times.end(), t);
    const auto j = static_cast<std::size_t>(it - s.times.begin());
    const double w = (t - s.times[j - 1]) / (s.times[j] - s.times[j - 1]);
    return (1.0 - w) * s.values[j - 1] + w * s.values[j];
  }

  /// Transition from event k-1 to event k.
  KinematicStep step(std::size_t k) const {
    const double t0 = time(k - 1), t1 = time(k);
    const double h = t1 - t0;
    const double a0 = acceleration_at(t0), a1 = acceleration_at(t1);
    KinematicStep s;
    s.f << 1.0, h, 0.0, 1.0;
    s.g << h * h * (a0 / 3.0 + a1 / 6.0), 0.5 * h * (a0 + a1);
    const Eigen::Vector2d g0(h * h / 3.0, 0.5 * h), g1(h * h / 6.0, 0.5 * h);
    s.q = p_.process_noise_scale * p_.acceleration_variance *
          (g0 * g0.transpose() + g1 * g1.transpose());
    return s;
  }

  void predict(std::size_t k, Eigen::Vector2d& x, Eigen::Matrix2d& p) const {
    const KinematicStep s = step(k);
    x = s.f * x + s.g;
    p = s.f * p * s.f.transpose() + s.q;
  }

  void update(std::size_t k, Eigen::Vector2d& x, Eigen::Matrix2d& p) const {
    if (!has_displacement(k)) return;
    const double r = p_.displacement_variance;
    const double s = p(0, 0) + r;
    const Eigen::Vector2d gain = p.col(0) / s;
    x += gain * (disp_value_[k] - x(0));
    // Joseph form: (I - K H) P (I - K H)' + K r K'.
    Eigen::Matrix2d ikh = Eigen::Matrix2d::Identity();
    ikh.col(0) -= gain;
    p = ikh * p * ikh.transpose() + r * gain * gain.transpose();
  }

  const KinematicFusionProblem& problem() const { return p_; }

 private:
  const KinematicFusionProblem& p_;
  MeasurementTimeline timeline_;
  std::vector<bool> has_acc_;
  std::vector<double> disp_value_;
};

inline void record(KinematicEstimate& out, double t, const Eigen::Vector2d& x,
                   const Eigen::Matrix2d& p) {
  out.times.push_back(t);
  out.displacement.push_back(x(0));
  out.velocity.push_back(x(1));
  out.displacement_variance.push_back(p(0, 0));
  out.velocity_variance.push_back(p(1, 1));
}

}  // namespace detail

/// Forward kinematic filter only; the causal reference for both baselines.
inline KinematicEstimate kinematic_filter(const KinematicFusionProblem& problem) {
  const detail::KinematicFusion kf(problem);
  KinematicEstimate out;
  out.algorithm = "KF";
  Eigen::Vector2d x = problem.initial_mean;
  Eigen::Matrix2d p = problem.initial_covariance;
  for (std::size_t k = 0; k < kf.size(); ++k) {
    if (k > 0) kf.predict(k, x, p);
    kf.update(k, x, p);
    if (kf.has_acceleration(k)) detail::record(out, kf.time(k), x, p);
  }
  return out;
}

/// DF1: forward kinematic filter plus Rauch-Tung-Striebel smoothing.
inline KinematicEstimate df1_rts_fusion(const KinematicFusionProblem& problem) {
  const detail::KinematicFusion kf(problem);
  const std::size_t n = kf.size();
  std::vector<Eigen::Vector2d> xf(n), xp(n);
  std::vector<Eigen::Matrix2d> pf(n), pp(n), f(n);
  Eigen::Vector2d x = problem.initial_mean;
  Eigen::Matrix2d p = problem.initial_covariance;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) {
      const auto s = kf.step(k);
      x = s.f * x + s.g;
      p = s.f * p * s.f.transpose() + s.q;
      f[k] = s.f;
    }
    xp[k] = x;
    pp[k] = p;
    kf.update(k, x, p);
    xf[k] = x;
    pf[k] = p;
  }
  std::vector<Eigen::Vector2d> xs = xf;
  std::vector<Eigen::Matrix2d> ps = pf;
  for (std::size_t k = n - 1; k-- > 0;) {
    const Eigen::Matrix2d c = pf[k] * f[k + 1].transpose() * pp[k + 1].inverse();
    xs[k] = xf[k] + c * (xs[k + 1] - xp[k + 1]);
    ps[k] = pf[k] + c * (ps[k + 1] - pp[k + 1]) * c.transpose();
    ps[k] = 0.5 * (ps[k] + ps[k].transpose()).eval();
  }
  KinematicEstimate out;
  out.algorithm = "DF1";
  for (std::size_t k = 0; k < n; ++k)
    if (kf.has_acceleration(k)) detail::record(out, kf.time(k), xs[k], ps[k]);
  return out;
}

/// DF2: short-term-memory kinematic filter (causal).
inline KinematicEstimate df2_stm_fusion(const KinematicFusionProblem& problem,
                                        int memory_intervals = 2,
                                        double diffuse_scale = 1e4) {
  if (memory_intervals < 1) throw InvalidArgument("df2: memory must span at least one interval");
  const detail::KinematicFusion kf(problem);
  const double window = memory_intervals / problem.displacement.sample_rate;
  const double tol = problem.time_tolerance;
  const double rd = problem.displacement_variance;
  const Eigen::Matrix2d diffuse =
      Eigen::Vector2d(diffuse_scale * rd,
                      diffuse_scale * rd * problem.displacement.sample_rate *
                          problem.displacement.sample_rate)
          .asDiagonal();

  KinematicEstimate out;
  out.algorithm = "DF2";
  Eigen::Vector2d x = problem.initial_mean;
  Eigen::Matrix2d p = problem.initial_covariance;
  for (std::size_t k = 0; k < kf.size(); ++k) {
    if (k > 0) kf.predict(k, x, p);
    if (kf.has_displacement(k)) {
      const double start = kf.time(k) - window;
      std::size_t j = 0;
      Eigen::Vector2d xw;
      Eigen::Matrix2d pw;
      if (start <= kf.time(0) + tol) {
        xw = problem.initial_mean;
        pw = problem.initial_covariance;
      } else {
        while (kf.time(j) < start - tol) ++j;
        xw = Eigen::Vector2d::Zero();
        pw = diffuse;
      }
      kf.update(j, xw, pw);
      for (std::size_t i = j + 1; i <= k; ++i) {
        kf.predict(i, xw, pw);
        kf.update(i, xw, pw);
      }
      x = xw;
      p = pw;
    }
    if (kf.has_acceleration(k)) detail::record(out, kf.time(k), x, p);
  }
  return out;
}

/// Converts an absolute-displacement estimate to relative by subtracting the
/// base displacement (linearly interpolated at the estimate times).
inline KinematicEstimate subtract_base_displacement(const KinematicEstimate& estimate,
                                                    const ChannelSignal& base) {
  if (base.times.empty()) throw InvalidArgument("subtract_base_displacement: empty base signal");
  KinematicEstimate out = estimate;
  for (std::size_t i = 0; i < out.times.size(); ++i) {
    const double t = out.times[i];
    double b;
    if (t <= base.times.front()) {
      b = base.values.front();
    } else if (t >= base.times.back()) {
      b = base.values.back();
    } else {
      const auto it = std::upper_bound(base.times.begin(), base.times.end(), t);
      const auto j = static_cast<std::size_t>(it - base.times.begin());
      const double w = (t - base.times[j - 1]) / (base.times[j] - base.times[j - 1]);
      b = (1.0 - w) * base.values[j - 1] + w * base.values[j];
    }
    out.displacement[i] -= b;
  }
  return out;
}

inline void write_kinematic_csv(std::ostream& os, const KinematicEstimate& e) {
  os << "# algorithm=" << e.algorithm << "\n";
  os << "time,displacement,velocity,displacement_var,velocity_var\n";
  os << std::setprecision(10);
  for (std::size_t i = 0; i < e.times.size(); ++i)
    os << e.times[i] << "," << e.displacement[i] << "," << e.velocity[i] << ","
       << e.displacement_variance[i] << "," << e.velocity_variance[i] << "\n";
}

}  // namespace mrfuse
