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
 * @file ukf.hpp
 * @brief Unscented and constrained-gain unscented Kalman filtering over an
 *        event stream whose measurement set changes from event to event.
 *
 * The engine is independent of structural dynamics. A process/measurement
 * model plugs in through the FilterModel concept:
 *
 *   propagate(points, t, dt)     advances every column of `points` over dt
 *   measure(points, t, channels) returns one row per active channel and one
 *                                column per sigma point
 *   noise_variances(channels)    diagonal of P_R for those channels
 *
 * Only the rows and the noise entries of the channels active at an event
 * take part in its measurement update; everything else in the filter loop is
 * the textbook UKF.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mrfuse/error.hpp"
#include "mrfuse/linalg.hpp"
#include "mrfuse/multirate_scheduler.hpp"

namespace mrfuse {

/// Index ranges of the augmented vector [u; u'; parameters; inputs].
struct StateLayout {
  int states = 0;  // displacements and velocities together
  int parameters = 0;
  int inputs = 0;
  std::vector<std::string> names;

  int size() const { return states + parameters + inputs; }
  int dofs() const { return states / 2; }
  int parameter_offset() const { return states; }
  int input_offset() const { return states + parameters; }
};

struct AugmentedState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  StateLayout layout;
};

struct SigmaWeights {
  double eta = 1.0;
  // Added to the zeroth covariance weight (the usual 1 - alpha^2 + beta term).
  double covariance_correction = 0.0;
};

struct SigmaPointSet {
  Eigen::MatrixXd points;  // one column per point, 2 S_N + 1 columns
  Eigen::VectorXd mean_weights;
  Eigen::VectorXd cov_weights;
  double eta = 1.0;

  Eigen::VectorXd weighted_mean() const { return points * mean_weights; }

  Eigen::MatrixXd weighted_covariance(const Eigen::VectorXd& center) const {
    const Eigen::MatrixXd d = points.colwise() - center;
    return d * cov_weights.asDiagonal() * d.transpose();
  }
};

/// chi_0 = mean, chi_i = mean +/- column i of sqrt((S_N + eta) P), where the
/// square root is the lower Cholesky factor of the conditioned covariance.
inline SigmaPointSet generate_sigma_points(const Eigen::VectorXd& mean, Eigen::MatrixXd covariance,
                                           const SigmaWeights& weights = {}) {
  const Eigen::Index n = mean.size();
  if (covariance.rows() != n || covariance.cols() != n)
    throw InvalidArgument("generate_sigma_points: covariance size mismatch");
  const double spread = static_cast<double>(n) + weights.eta;
  if (!(spread > 0.0)) throw InvalidArgument("generate_sigma_points: S_N + eta must be positive");

  const Eigen::MatrixXd root = std::sqrt(spread) * conditioned_cholesky(covariance);
  SigmaPointSet s;
  s.eta = weights.eta;
  s.points.resize(n, 2 * n + 1);
  s.points.col(0) = mean;
  for (Eigen::Index i = 0; i < n; ++i) {
    s.points.col(1 + i) = mean + root.col(i);
    s.points.col(1 + n + i) = mean - root.col(i);
  }
  s.mean_weights = Eigen::VectorXd::Constant(2 * n + 1, 1.0 / (2.0 * spread));
  s.mean_weights(0) = weights.eta / spread;
  s.cov_weights = s.mean_weights;
  s.cov_weights(0) += weights.covariance_correction;
  return s;
}

struct Bound {
  int index = 0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

struct FilterConfig {
  SigmaWeights sigma;
  Eigen::VectorXd process_noise;  // diagonal of P_Q, added once per time update
  std::vector<Bound> constraints;
  bool constrained_gain = false;  // CGUKF when true

  void validate(int state_size) const {
    if (process_noise.size() != state_size)
      throw InvalidArgument("filter config: process noise size differs from state size");
    if ((process_noise.array() < 0.0).any())
      throw InvalidArgument("filter config: negative process noise");
    for (const auto& b : constraints) {
      if (b.index < 0 || b.index >= state_size)
        throw InvalidArgument("filter config: constraint index out of range");
      if (!(b.lower <= b.upper)) throw InvalidArgument("filter config: lower bound above upper");
    }
  }
};

template <class M>
concept FilterModel = requires(const M& m, Eigen::MatrixXd& pts, const Eigen::MatrixXd& cpts,
                               double t, std::span<const int> channels) {
  m.propagate(pts, t, t);
  { m.measure(cpts, t, channels) } -> std::convertible_to<Eigen::MatrixXd>;
  { m.noise_variances(channels) } -> std::convertible_to<Eigen::VectorXd>;
};

/// Prediction from t to t + dt. dt == 0 returns the prior unchanged.
template <FilterModel Model>
AugmentedState time_update(const AugmentedState& prior, double t, double dt,
                           const FilterConfig& config, const Model& model) {
  if (dt < 0.0) throw InvalidArgument("time_update: negative time step");
  if (dt == 0.0) return prior;
  SigmaPointSet sp = generate_sigma_points(prior.mean, prior.covariance, config.sigma);
  model.propagate(sp.points, t, dt);
  AugmentedState out;
  out.layout = prior.layout;
  out.mean = sp.weighted_mean();
  out.covariance = sp.weighted_covariance(out.mean);
  out.covariance.diagonal() += config.process_noise;
  symmetrize(out.covariance);
  return out;
}

/// Minimum-trace gain subject to bounds on the updated mean.
///
/// The trace of P - K Cxy' - Cxy K' + K S K' separates by rows of K, and each
/// bound touches one row through the scalar constraint k_i' nu, so the
/// quadratic program splits into independent one-constraint problems with the
/// closed form k_i = S^-1 c_i + lambda S^-1 nu. Rows whose unconstrained
/// update already respects the bounds are returned unchanged.
inline Eigen::MatrixXd cgukf_gain(const Eigen::MatrixXd& cross_cov,
                                  const Eigen::MatrixXd& innovation_cov,
                                  const Eigen::VectorXd& predicted_mean,
                                  const Eigen::VectorXd& innovation,
                                  std::span<const Bound> constraints) {
  Eigen::MatrixXd s = innovation_cov;
  const Eigen::MatrixXd l = conditioned_cholesky(s);
  const auto tri = l.triangularView<Eigen::Lower>();
  // K = Cxy S^-1 with S = L L'.
  Eigen::MatrixXd gain = tri.transpose().solve(tri.solve(cross_cov.transpose())).transpose();
  if (constraints.empty()) return gain;

  const Eigen::VectorXd s_inv_nu = tri.transpose().solve(tri.solve(innovation));
  const double nu_s_nu = innovation.dot(s_inv_nu);
  for (const auto& b : constraints) {
    const double value = predicted_mean(b.index) + gain.row(b.index).dot(innovation);
    if (value >= b.lower && value <= b.upper) continue;
    const double target = value < b.lower ? b.lower : b.upper;
    if (!(nu_s_nu > 0.0) || !std::isfinite(nu_s_nu))
      throw NumericalError("cgukf_gain: bounds on entry " + std::to_string(b.index) +
                           " are unreachable with a zero innovation");
    gain.row(b.index) += ((target - value) / nu_s_nu) * s_inv_nu.transpose();
  }
  return gain;
}

struct InnovationRecord {
  Eigen::VectorXd innovation;
  Eigen::MatrixXd covariance;
};

struct MeasurementUpdateResult {
  AugmentedState posterior;
  InnovationRecord innovation;
};

template <FilterModel Model>
MeasurementUpdateResult measurement_update(const AugmentedState& predicted,
                                           const MeasurementEvent& event, const Model& model,
                                           const FilterConfig& config) {
  if (event.channels.empty()) throw InvalidArgument("measurement_update: event has no channels");
  const std::span<const int> channels(event.channels);
  const Eigen::VectorXd r = model.noise_variances(channels);

  const SigmaPointSet sp =
      generate_sigma_points(predicted.mean, predicted.covariance, config.sigma);
  const Eigen::MatrixXd y = model.measure(sp.points, event.time, channels);
  if (y.rows() != event.values.size() || r.size() != event.values.size())
    throw InvalidArgument("measurement_update: measurement size mismatch");

  const Eigen::VectorXd y_mean = y * sp.mean_weights;
  const Eigen::MatrixXd dy = y.colwise() - y_mean;
  const Eigen::MatrixXd dx = sp.points.colwise() - predicted.mean;
  Eigen::MatrixXd s = dy * sp.cov_weights.asDiagonal() * dy.transpose();
  s.diagonal() += r;
  symmetrize(s);
  const Eigen::MatrixXd cxy = dx * sp.cov_weights.asDiagonal() * dy.transpose();
  const Eigen::VectorXd nu = event.values - y_mean;

  const std::span<const Bound> bounds =
      config.constrained_gain ? std::span<const Bound>(config.constraints) : std::span<const Bound>();
  const Eigen::MatrixXd k = cgukf_gain(cxy, s, predicted.mean, nu, bounds);

  MeasurementUpdateResult out;
  out.posterior.layout = predicted.layout;
  out.posterior.mean = predicted.mean + k * nu;
  const Eigen::MatrixXd kc = k * cxy.transpose();
  out.posterior.covariance = predicted.covariance - kc - kc.transpose() + k * s * k.transpose();
  symmetrize(out.posterior.covariance);
  // Constrained rows hit their bound up to rounding; pin them exactly.
  for (const auto& b : bounds)
    out.posterior.mean(b.index) = std::clamp(out.posterior.mean(b.index), b.lower, b.upper);
  out.innovation = {nu, s};
  return out;
}

/// Posterior means and covariance diagonals, one row per event.
struct EstimateTrace {
  std::vector<std::string> names;
  std::vector<double> times;
  Eigen::MatrixXd means;
  Eigen::MatrixXd variances;
  std::vector<Eigen::VectorXd> innovations;
  std::vector<Eigen::VectorXd> innovation_variances;
  AugmentedState final_state;

  std::size_t size() const { return times.size(); }
};

using FilterObserver = std::function<void(std::size_t, const AugmentedState&)>;

/// Runs prediction + update over every event. The prior applies at
/// `start_time`; the first event is predicted from there. Numerical failures
/// are rethrown with the offending event index.
template <FilterModel Model>
EstimateTrace run_filter(const Model& model, const MeasurementTimeline& timeline,
                         const FilterConfig& config, const AugmentedState& initial,
                         double start_time = 0.0, const FilterObserver& observer = {}) {
  if (timeline.events.empty()) throw InvalidArgument("run_filter: empty timeline");
  const int n = static_cast<int>(initial.mean.size());
  config.validate(n);
  if (initial.covariance.rows() != n || initial.covariance.cols() != n)
    throw InvalidArgument("run_filter: initial covariance size mismatch");

  EstimateTrace trace;
  trace.names = initial.layout.names;
  const auto events = timeline.events.size();
  trace.times.reserve(events);
  trace.means.resize(static_cast<Eigen::Index>(events), n);
  trace.variances.resize(static_cast<Eigen::Index>(events), n);
  trace.innovations.reserve(events);
  trace.innovation_variances.reserve(events);

  AugmentedState state = initial;
  double t = start_time;
  for (std::size_t k = 0; k < events; ++k) {
    const auto& ev = timeline.events[k];
    try {
      const double dt = k == 0 ? ev.time - start_time : ev.dt_from_previous;
      if (dt < -1e-12) throw InvalidArgument("run_filter: event precedes filter start time");
      if (dt > 0.0) state = time_update(state, t, dt, config, model);
      auto upd = measurement_update(state, ev, model, config);
      state = std::move(upd.posterior);
      if (!state.mean.allFinite()) throw NumericalError("non-finite posterior mean");
      trace.innovations.push_back(std::move(upd.innovation.innovation));
      trace.innovation_variances.push_back(upd.innovation.covariance.diagonal());
    } catch (const NumericalError& e) {
      throw NumericalError("event " + std::to_string(k) + " (t=" + std::to_string(ev.time) +
                               "): " + e.what(),
                           static_cast<long>(k));
    }
    t = ev.time;
    trace.times.push_back(ev.time);
    trace.means.row(static_cast<Eigen::Index>(k)) = state.mean.transpose();
    trace.variances.row(static_cast<Eigen::Index>(k)) = state.covariance.diagonal().transpose();
    if (observer) observer(k, state);
  }
  trace.final_state = std::move(state);
  return trace;
}

}  // namespace mrfuse
