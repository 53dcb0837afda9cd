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
 * @file experiment.hpp
 * @brief End-to-end runs: build, simulate, sample, merge, filter, compare and
 *        report. One run per (config, seed); the seed drives measurement noise
 *        only, excitation records carry their own seeds.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mrfuse/config.hpp"
#include "mrfuse/error.hpp"
#include "mrfuse/fusion_baselines.hpp"
#include "mrfuse/multirate_scheduler.hpp"
#include "mrfuse/response_simulator.hpp"
#include "mrfuse/structural_filter.hpp"
#include "mrfuse/structural_models.hpp"
#include "mrfuse/ukf.hpp"

namespace mrfuse {

// ---------------------------------------------------------------------------
// Metrics

/// 100 * ||estimate - truth||_2 / ||truth||_2.
inline double rms_error_percent(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size())
    throw InvalidArgument("rms_error_percent: length mismatch");
  if (truth.empty()) throw InvalidArgument("rms_error_percent: empty signals");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = estimate[i] - truth[i];
    num += d * d;
    den += truth[i] * truth[i];
  }
  if (!(den > 0.0)) throw InvalidArgument("rms_error_percent: truth has zero norm");
  return 100.0 * std::sqrt(num / den);
}

inline std::vector<double> parameter_ratio_table(std::span<const double> estimates,
                                                 std::span<const double> truth) {
  if (estimates.size() != truth.size())
    throw InvalidArgument("parameter_ratio_table: length mismatch");
  std::vector<double> out(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 0.0) throw InvalidArgument("parameter_ratio_table: zero true parameter");
    out[i] = estimates[i] / truth[i];
  }
  return out;
}

/// Strain of every member (truss) or element midpoint (beam) for each
/// posterior mean in the trace; one row per event.
inline Eigen::MatrixXd estimate_strains_from_states(const EstimateTrace& trace,
                                                    const StructuralModel& model) {
  const auto maps = strain_maps(model);
  const int s = 2 * model.dof_count();
  if (trace.means.rows() > 0 && trace.means.cols() < s)
    throw InvalidArgument("estimate_strains_from_states: trace has fewer entries than states");
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(maps.size()), s);
  for (std::size_t m = 0; m < maps.size(); ++m)
    rows.row(static_cast<Eigen::Index>(m)) = kinematic_row(model, maps[m]);
  return trace.means.leftCols(s) * rows.transpose();
}

// ---------------------------------------------------------------------------
// Report

struct SignalError {
  std::string name;
  double rms_percent = 0.0;
  bool measured = false;  // strains only: a gauge sits on this member
};

struct ParameterEstimate {
  std::string name;
  double truth = 0.0;
  double initial = 0.0;
  double estimate = 0.0;
  double ratio = 0.0;
};

struct InputEstimate {
  std::string name;
  double true_peak = 0.0;
  double estimated_peak = 0.0;
  double ratio = 0.0;
};

struct BaselineComparison {
  std::string algorithm;  // DF1, DF2 or filter
  std::string dof;
  double displacement_rms = 0.0;
  double velocity_rms = 0.0;
};

struct ExperimentReport {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t events = 0;
  double min_dt = 0.0;
  double max_dt = 0.0;
  std::vector<SignalError> states;
  std::vector<ParameterEstimate> parameters;
  std::vector<SignalError> strains;
  std::vector<InputEstimate> inputs;
  std::vector<BaselineComparison> baselines;
  double wall_seconds = 0.0;

  double state_rms(const std::string& name) const {
    for (const auto& s : states)
      if (s.name == name) return s.rms_percent;
    throw InvalidArgument("report: no state named '" + name + "'");
  }

  const ParameterEstimate& parameter(const std::string& name) const {
    for (const auto& p : parameters)
      if (p.name == name) return p;
    throw InvalidArgument("report: no parameter named '" + name + "'");
  }

  const BaselineComparison& baseline(const std::string& algorithm) const {
    for (const auto& b : baselines)
      if (b.algorithm == algorithm) return b;
    throw InvalidArgument("report: no baseline named '" + algorithm + "'");
  }

  /// max |ratio - 1| over parameters whose name starts with `prefix`.
  double max_parameter_deviation(const std::string& prefix = "") const {
    double m = 0.0;
    for (const auto& p : parameters)
      if (p.name.rfind(prefix, 0) == 0) m = std::max(m, std::abs(p.ratio - 1.0));
    return m;
  }
};

struct ExperimentRun {
  ExperimentReport report;
  StructuralModel model;
  std::vector<InputRecord> inputs;
  std::vector<bool> input_known;
  ResponseHistory truth;
  std::vector<ChannelSignal> signals;
  MeasurementTimeline timeline;
  EstimateTrace trace;
  std::vector<std::string> strain_names;
  Eigen::MatrixXd estimated_strains;  // events x strain maps
  Eigen::MatrixXd true_strains;
  std::vector<KinematicEstimate> baselines;
};

struct RunOptions {
  FilterObserver observer;  // called after every measurement update
};

// ---------------------------------------------------------------------------
// Setup helpers

inline StructuralModel build_model(const ModelConfig& m) {
  if (m.type == "shear_frame") return build_shear_frame(m.masses, m.stiffnesses, m.dampings, m.excitation);
  if (m.type == "truss") return build_truss(m.truss);
  return build_beam(m.beam);
}

/// 0-based free DOF for a 1-based index or label.
inline int resolve_dof(const StructuralModel& model, const DofRef& ref, const std::string& where) {
  if (const int* i = std::get_if<int>(&ref)) {
    if (*i < 1 || *i > model.dof_count())
      throw ConfigError(where, "DOF " + std::to_string(*i) + " out of range 1.." +
                                   std::to_string(model.dof_count()));
    return *i - 1;
  }
  const auto& label = std::get<std::string>(ref);
  for (std::size_t k = 0; k < model.dof_labels.size(); ++k)
    if (model.dof_labels[k] == label) return static_cast<int>(k);
  throw ConfigError(where, "no DOF labelled '" + label + "'");
}

inline ResponseMap resolve_map(const StructuralModel& model, const ChannelConfig& c,
                               const std::string& where) {
  ResponseMap map;
  map.quantity = c.quantity;
  map.position = c.position;
  map.frame = c.frame;
  if (c.quantity == Quantity::kAxialStrain || c.quantity == Quantity::kBendingStrain) {
    const int* i = std::get_if<int>(&c.target);
    if (!i) throw ConfigError(where + ".target", "strain targets are 1-based member/element numbers");
    map.target = *i - 1;
  } else {
    map.target = resolve_dof(model, c.target, where + ".target");
  }
  try {
    validate_response_map(model, map);
  } catch (const InvalidArgument& e) {
    throw ConfigError(where, e.what());
  }
  if (c.frame == ResponseFrame::kAbsolute && model.excitation != ExcitationKind::kGroundMotion)
    throw ConfigError(where + ".frame", "absolute frame requires ground-motion excitation");
  return map;
}

inline InputRecord build_input(const ExperimentConfig& cfg, const StructuralModel& model,
                               std::size_t index) {
  const InputConfig& in = cfg.inputs[index];
  const std::string where = "inputs[" + std::to_string(index) + "]";
  const double duration = in.duration > 0.0 ? in.duration : cfg.duration;
  InputRecord rec;
  if (in.type == "synthetic_ground_motion") {
    if (model.excitation != ExcitationKind::kGroundMotion)
      throw ConfigError(where + ".type", "ground motion on a force-excited model");
    rec = synthetic_ground_motion(duration, in.rate, in.peak, in.seed);
  } else if (in.type == "white_noise_force") {
    rec = white_noise_force(resolve_dof(model, in.dof, where + ".dof"), duration, in.rate, in.std_dev,
                            in.seed);
  } else if (in.type == "half_sine_impact") {
    rec = half_sine_impact(resolve_dof(model, in.dof, where + ".dof"), in.peak, in.start,
                           in.pulse_duration, duration, in.rate);
  } else {
    std::filesystem::path p(in.path);
    if (p.is_relative()) p = cfg.base_dir / p;
    const bool ground = in.kind == "ground_acceleration";
    if (ground && model.excitation != ExcitationKind::kGroundMotion)
      throw ConfigError(where + ".kind", "ground motion on a force-excited model");
    rec = read_input_csv(p.string(), ground ? InputKind::kGroundAcceleration : InputKind::kNodalForce,
                         ground ? -1 : resolve_dof(model, in.dof, where + ".dof"));
  }
  return rec;
}

/// Checks every cross-reference that needs the assembled model.
inline void validate_experiment(const ExperimentConfig& cfg) {
  const StructuralModel model = build_model(cfg.model);
  for (std::size_t i = 0; i < cfg.channels.size(); ++i)
    resolve_map(model, cfg.channels[i], "channels[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < cfg.filter.estimate.size(); ++i)
    if (model.parameter_index(cfg.filter.estimate[i]) < 0)
      throw ConfigError("filter.estimate[" + std::to_string(i) + "]",
                        "model has no parameter '" + cfg.filter.estimate[i] + "'");
  std::vector<int> unknown;
  for (std::size_t i = 0; i < cfg.filter.unknown_inputs.size(); ++i) {
    const int d = resolve_dof(model, cfg.filter.unknown_inputs[i],
                              "filter.unknown_inputs[" + std::to_string(i) + "]");
    if (std::find(unknown.begin(), unknown.end(), d) != unknown.end())
      throw ConfigError("filter.unknown_inputs[" + std::to_string(i) + "]", "duplicate DOF");
    unknown.push_back(d);
  }
  for (std::size_t i = 0; i < cfg.inputs.size(); ++i) {
    const auto& in = cfg.inputs[i];
    const std::string where = "inputs[" + std::to_string(i) + "]";
    if (in.kind == "ground_acceleration" && model.excitation != ExcitationKind::kGroundMotion)
      throw ConfigError(where + ".kind", "ground motion on a force-excited model");
    if (in.kind == "nodal_force") {
      const int d = resolve_dof(model, in.dof, where + ".dof");
      if (!in.known && std::find(unknown.begin(), unknown.end(), d) == unknown.end())
        throw ConfigError(where + ".known", "unknown input at a DOF missing from filter.unknown_inputs");
    } else if (!in.known) {
      throw ConfigError(where + ".known", "only nodal forces can be estimated");
    }
  }
  if (cfg.baselines.enabled) {
    const ChannelConfig* acc = nullptr;
    const ChannelConfig* disp = nullptr;
    for (const auto& c : cfg.channels) {
      if (c.id == cfg.baselines.acceleration_channel) acc = &c;
      if (c.id == cfg.baselines.displacement_channel) disp = &c;
    }
    if (acc->quantity != Quantity::kAcceleration)
      throw ConfigError("baselines.acceleration_channel", "channel is not an acceleration");
    if (disp->quantity != Quantity::kDisplacement)
      throw ConfigError("baselines.displacement_channel", "channel is not a displacement");
    if (resolve_dof(model, acc->target, "baselines") != resolve_dof(model, disp->target, "baselines"))
      throw ConfigError("baselines", "acceleration and displacement channels are not collocated");
    if (acc->rate < disp->rate)
      throw ConfigError("baselines", "acceleration rate must not be below displacement rate");
  }
  if (cfg.filter.pre_event_noise && cfg.filter.noise_window_end > cfg.duration)
    throw ConfigError("filter.noise_variance.window", "window extends past the record");
}

namespace detail {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

inline double peak_abs(const Eigen::Ref<const Eigen::RowVectorXd>& r) {
  return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace detail

/// One complete run for one seed.
inline ExperimentRun run_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                                    const RunOptions& options = {}) {
  const auto wall_start = std::chrono::steady_clock::now();
  validate_experiment(cfg);
  ExperimentRun run;
  run.report.name = cfg.name;
  run.report.seed = seed;

  run.model = detail::stage("model", [&] { return build_model(cfg.model); });
  const StructuralModel& model = run.model;
  const int n = model.dof_count();

  detail::stage("inputs", [&] {
    for (std::size_t i = 0; i < cfg.inputs.size(); ++i) {
      run.inputs.push_back(build_input(cfg, model, i));
      run.input_known.push_back(cfg.inputs[i].known);
    }
    return 0;
  });

  run.truth = detail::stage("simulate", [&] {
    return simulate_true_response(model, run.inputs, cfg.simulation_dt, cfg.duration);
  });

  std::vector<RegisteredChannel> registry;
  detail::stage("channels", [&] {
    for (std::size_t c = 0; c < cfg.channels.size(); ++c) {
      const auto& cc = cfg.channels[c];
      const ResponseMap map = resolve_map(model, cc, "channels[" + std::to_string(c) + "]");
      ChannelSignal s = sample_response(model, run.truth, SensorChannel{cc.id, map, cc.rate, cc.noise_ratio});
      if (cc.acquisition_rate > 0.0) s = downsample(s, cc.acquisition_rate);
      s = downsample(s, cc.rate);
      s = add_noise(s, cc.noise_ratio, seed * 1000 + c + 1);
      double variance = s.noise_variance;
      if (cfg.filter.pre_event_noise)
        variance = estimate_noise_variance(s, cfg.filter.noise_window_begin, cfg.filter.noise_window_end);
      // Noise-free channels still need a usable innovation covariance.
      variance = std::max(variance, 1e-12 * std::pow(rms(s.values), 2));
      registry.push_back({cc.id, map, variance});
      run.signals.push_back(std::move(s));
    }
    return 0;
  });

  run.timeline = detail::stage("merge", [&] { return merge_timelines(run.signals); });
  run.report.events = run.timeline.events.size();
  run.report.min_dt = run.timeline.events.size() > 1 ? run.timeline.min_step() : 0.0;
  run.report.max_dt = run.timeline.max_step();

  // Filter setup.
  const FilterSection& fs = cfg.filter;
  std::vector<int> estimated;
  if (fs.estimate.empty()) {
    for (std::size_t p = 0; p < model.parameters.size(); ++p) estimated.push_back(static_cast<int>(p));
  } else {
    for (const auto& name : fs.estimate) estimated.push_back(model.parameter_index(name));
  }
  std::vector<int> unknown_dofs;
  for (std::size_t i = 0; i < fs.unknown_inputs.size(); ++i)
    unknown_dofs.push_back(resolve_dof(model, fs.unknown_inputs[i], "filter.unknown_inputs"));
  std::vector<InputRecord> known;
  for (std::size_t i = 0; i < run.inputs.size(); ++i)
    if (run.input_known[i]) known.push_back(run.inputs[i]);

  const StructuralFilterModel fm(
      model, estimated, known, unknown_dofs, registry,
      {fs.exact_propagation ? Propagation::kExact : Propagation::kNewmark, fs.max_substep});
  const StateLayout& layout = fm.layout();
  const int size = layout.size();
  const Eigen::VectorXd truth_params = model.nominal_parameters();

  AugmentedState init;
  init.layout = layout;
  init.mean = Eigen::VectorXd::Zero(size);
  init.covariance = Eigen::MatrixXd::Zero(size, size);
  FilterConfig fc;
  fc.sigma.eta = fs.eta;
  fc.sigma.covariance_correction = fs.covariance_correction;
  fc.process_noise = Eigen::VectorXd::Zero(size);
  fc.constrained_gain = fs.constrained;
  for (int i = 0; i < n; ++i) {
    const double su = std::max(detail::peak_abs(run.truth.displacement.row(i)), 1e-12);
    const double sv = std::max(detail::peak_abs(run.truth.velocity.row(i)), 1e-12);
    init.covariance(i, i) = std::pow(fs.initial_state_std * su, 2);
    init.covariance(n + i, n + i) = std::pow(fs.initial_state_std * sv, 2);
    fc.process_noise(i) = std::pow(fs.state_noise * su, 2);
    fc.process_noise(n + i) = std::pow(fs.state_noise * sv, 2);
  }
  std::vector<double> initial_guess;
  for (std::size_t j = 0; j < estimated.size(); ++j) {
    const int k = layout.parameter_offset() + static_cast<int>(j);
    const double guess = truth_params(estimated[j]) * (1.0 + fs.initial_offset);
    initial_guess.push_back(guess);
    init.mean(k) = guess;
    init.covariance(k, k) = std::pow(fs.initial_parameter_std * guess, 2);
    fc.process_noise(k) = std::pow(fs.parameter_noise * guess, 2);
    if (fs.nonnegative_parameters) fc.constraints.push_back({k, 0.0, std::numeric_limits<double>::infinity()});
  }
  for (std::size_t j = 0; j < unknown_dofs.size(); ++j) {
    const int k = layout.input_offset() + static_cast<int>(j);
    init.covariance(k, k) = std::pow(fs.input_noise * fs.expected_input_peak, 2);
    fc.process_noise(k) = std::pow(fs.input_noise * fs.expected_input_peak, 2);
  }

  run.trace = detail::stage("filter", [&] {
    return run_filter(fm, run.timeline, fc, init, 0.0, options.observer);
  });

  detail::stage("report", [&] {
    const std::size_t events = run.trace.size();
    std::vector<double> est(events), tru(events);
    std::vector<Eigen::VectorXd> truth_states(events);
    for (std::size_t e = 0; e < events; ++e) truth_states[e] = run.truth.state_at(run.trace.times[e]);
    for (int i = 0; i < 2 * n; ++i) {
      for (std::size_t e = 0; e < events; ++e) {
        est[e] = run.trace.means(static_cast<Eigen::Index>(e), i);
        tru[e] = truth_states[e](i);
      }
      run.report.states.push_back({layout.names[i], rms_error_percent(est, tru), false});
    }
    const Eigen::VectorXd& final_mean = run.trace.final_state.mean;
    for (std::size_t j = 0; j < estimated.size(); ++j) {
      const double t = truth_params(estimated[j]);
      const double e = final_mean(layout.parameter_offset() + static_cast<Eigen::Index>(j));
      run.report.parameters.push_back({model.parameters[estimated[j]].name, t, initial_guess[j], e, e / t});
    }
    for (std::size_t j = 0; j < unknown_dofs.size(); ++j) {
      const auto col = static_cast<Eigen::Index>(layout.input_offset() + static_cast<int>(j));
      double tp = 0.0, ep = 0.0;
      for (std::size_t e = 0; e < events; ++e) {
        double f = 0.0;
        for (std::size_t i = 0; i < run.inputs.size(); ++i)
          if (!run.input_known[i] && run.inputs[i].target_dof == unknown_dofs[j])
            f += run.inputs[i].value_at(run.trace.times[e]);
        tp = std::max(tp, std::abs(f));
        ep = std::max(ep, std::abs(run.trace.means(static_cast<Eigen::Index>(e), col)));
      }
      run.report.inputs.push_back({layout.names[col], tp, ep, tp > 0.0 ? ep / tp : 0.0});
    }
    if (model.kind != ModelKind::kShearFrame) {
      const auto maps = strain_maps(model);
      run.estimated_strains = estimate_strains_from_states(run.trace, model);
      run.true_strains.resize(static_cast<Eigen::Index>(events), static_cast<Eigen::Index>(maps.size()));
      for (std::size_t m = 0; m < maps.size(); ++m) {
        const Eigen::RowVectorXd row = kinematic_row(model, maps[m]);
        for (std::size_t e = 0; e < events; ++e)
          run.true_strains(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(m)) =
              row.dot(truth_states[e]);
        const std::string name =
            (model.kind == ModelKind::kTruss ? "eps" : "kappa") + std::to_string(m + 1);
        run.strain_names.push_back(name);
        bool measured = false;
        for (const auto& ch : registry)
          if (ch.map.quantity == maps[m].quantity && ch.map.target == maps[m].target) measured = true;
        const Eigen::VectorXd ec = run.estimated_strains.col(static_cast<Eigen::Index>(m));
        const Eigen::VectorXd tc = run.true_strains.col(static_cast<Eigen::Index>(m));
        run.report.strains.push_back(
            {name,
             rms_error_percent(std::span<const double>(ec.data(), events),
                               std::span<const double>(tc.data(), events)),
             measured});
      }
    }
    return 0;
  });

  if (cfg.baselines.enabled) {
    detail::stage("baselines", [&] {
      std::size_t ia = 0, id = 0;
      for (std::size_t c = 0; c < cfg.channels.size(); ++c) {
        if (cfg.channels[c].id == cfg.baselines.acceleration_channel) ia = c;
        if (cfg.channels[c].id == cfg.baselines.displacement_channel) id = c;
      }
      ChannelSignal acc = run.signals[ia];
      const int dof = registry[ia].map.target;
      // Fuse relative motion: remove the known base acceleration.
      if (registry[ia].map.frame == ResponseFrame::kAbsolute) {
        const double r = model.ground_influence(dof);
        for (std::size_t i = 0; i < acc.values.size(); ++i)
          acc.values[i] -= r * ground_acceleration(known, acc.times[i]);
      }
      const ChannelSignal& disp = run.signals[id];
      KinematicFusionProblem p;
      p.acceleration = acc;
      p.displacement = disp;
      p.acceleration_variance = registry[ia].variance;
      p.displacement_variance = registry[id].variance;
      p.initial_covariance =
          Eigen::Vector2d(p.displacement_variance,
                          p.displacement_variance * disp.sample_rate * disp.sample_rate)
              .asDiagonal();
      p.process_noise_scale = cfg.baselines.df1_process_noise_scale;
      run.baselines.push_back(df1_rts_fusion(p));
      p.process_noise_scale = cfg.baselines.df2_process_noise_scale;
      run.baselines.push_back(df2_stm_fusion(p, cfg.baselines.df2_memory_intervals));

      auto compare = [&](const std::string& algo, const std::vector<double>& times,
                         const std::vector<double>& d, const std::vector<double>& v) {
        std::vector<double> td(times.size()), tv(times.size());
        for (std::size_t i = 0; i < times.size(); ++i) {
          const Eigen::VectorXd s = run.truth.state_at(times[i]);
          td[i] = s(dof);
          tv[i] = s(n + dof);
        }
        run.report.baselines.push_back(
            {algo, model.dof_labels[dof], rms_error_percent(d, td), rms_error_percent(v, tv)});
      };
      for (const auto& b : run.baselines) compare(b.algorithm, b.times, b.displacement, b.velocity);
      // The filter on the same (acceleration) time grid.
      std::vector<double> ft, fd, fv;
      std::size_t e = 0;
      for (double t : acc.times) {
        while (e < run.trace.size() && run.trace.times[e] < t - 1e-9) ++e;
        if (e == run.trace.size()) break;
        ft.push_back(t);
        fd.push_back(run.trace.means(static_cast<Eigen::Index>(e), dof));
        fv.push_back(run.trace.means(static_cast<Eigen::Index>(e), n + dof));
      }
      compare("filter", ft, fd, fv);
      return 0;
    });
  }

  run.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return run;
}

// ---------------------------------------------------------------------------
// Output

inline void write_trace_csv(std::ostream& os, const EstimateTrace& trace) {
  os << "time";
  for (const auto& nm : trace.names) os << "," << nm;
  for (const auto& nm : trace.names) os << ",var_" << nm;
  os << "\n" << std::setprecision(10);
  for (std::size_t e = 0; e < trace.size(); ++e) {
    const auto r = static_cast<Eigen::Index>(e);
    os << trace.times[e];
    for (Eigen::Index i = 0; i < trace.means.cols(); ++i) os << "," << trace.means(r, i);
    for (Eigen::Index i = 0; i < trace.variances.cols(); ++i) os << "," << trace.variances(r, i);
    os << "\n";
  }
}

/// Long-format report: section,name,metric,value. Wall time is left out so
/// that identical runs give identical files.
inline void write_report_csv(std::ostream& os, const ExperimentReport& r) {
  os << "section,name,metric,value\n" << std::setprecision(10);
  os << "run,experiment,seed," << r.seed << "\n";
  os << "run,timeline,events," << r.events << "\n";
  os << "run,timeline,min_dt," << r.min_dt << "\n";
  os << "run,timeline,max_dt," << r.max_dt << "\n";
  for (const auto& s : r.states) os << "state," << s.name << ",rms_percent," << s.rms_percent << "\n";
  for (const auto& p : r.parameters) {
    os << "parameter," << p.name << ",truth," << p.truth << "\n";
    os << "parameter," << p.name << ",initial," << p.initial << "\n";
    os << "parameter," << p.name << ",estimate," << p.estimate << "\n";
    os << "parameter," << p.name << ",ratio," << p.ratio << "\n";
  }
  for (const auto& s : r.strains) {
    os << "strain," << s.name << ",rms_percent," << s.rms_percent << "\n";
    os << "strain," << s.name << ",measured," << (s.measured ? 1 : 0) << "\n";
  }
  for (const auto& i : r.inputs) {
    os << "input," << i.name << ",true_peak," << i.true_peak << "\n";
    os << "input," << i.name << ",estimated_peak," << i.estimated_peak << "\n";
    os << "input," << i.name << ",ratio," << i.ratio << "\n";
  }
  for (const auto& b : r.baselines) {
    os << "baseline," << b.algorithm << ",displacement_rms_percent_" << b.dof << "," << b.displacement_rms << "\n";
    os << "baseline," << b.algorithm << ",velocity_rms_percent_" << b.dof << "," << b.velocity_rms << "\n";
  }
}

inline void write_summary(std::ostream& os, const ExperimentReport& r) {
  os << std::fixed;
  os << "experiment " << r.name << "  seed " << r.seed << "\n";
  os << "events " << r.events << "  dt " << std::setprecision(6) << r.min_dt << " .. " << r.max_dt
     << " s\n";
  os << std::setprecision(3);
  os << "\nstate RMS error (%)\n";
  for (const auto& s : r.states) os << "  " << std::left << std::setw(8) << s.name << std::right << std::setw(10) << s.rms_percent << "\n";
  if (!r.parameters.empty()) {
    os << "\nparameters            truth         estimate     ratio\n";
    for (const auto& p : r.parameters)
      os << "  " << std::left << std::setw(8) << p.name << std::right << std::setw(16)
         << std::setprecision(6) << std::scientific << p.truth << std::setw(16) << p.estimate
         << std::fixed << std::setprecision(4) << std::setw(10) << p.ratio << "\n";
  }
  if (!r.strains.empty()) {
    os << std::setprecision(3) << "\nstrain RMS error (%)\n";
    for (const auto& s : r.strains)
      os << "  " << std::left << std::setw(8) << s.name << std::right << std::setw(10) << s.rms_percent
         << (s.measured ? "  (measured)" : "") << "\n";
  }
  if (!r.inputs.empty()) {
    os << std::setprecision(4) << "\ninput        true peak   est. peak   ratio\n";
    for (const auto& i : r.inputs)
      os << "  " << std::left << std::setw(8) << i.name << std::right << std::setw(12) << i.true_peak
         << std::setw(12) << i.estimated_peak << std::setw(8) << i.ratio << "\n";
  }
  if (!r.baselines.empty()) {
    os << std::setprecision(3) << "\ncollocated comparison   disp RMS %   vel RMS %\n";
    for (const auto& b : r.baselines)
      os << "  " << std::left << std::setw(8) << b.algorithm << std::setw(6) << b.dof << std::right
         << std::setw(14) << b.displacement_rms << std::setw(12) << b.velocity_rms << "\n";
  }
  os << std::setprecision(2) << "\nwall time " << r.wall_seconds << " s\n";
}

/// Writes every artifact of one run into `dir` (created if needed).
inline void write_run_outputs(const ExperimentRun& run, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "channels");
  auto open = [](const fs::path& p) {
    std::ofstream f(p);
    if (!f) throw InvalidArgument("cannot write '" + p.string() + "'");
    return f;
  };
  {
    auto f = open(dir / "trace.csv");
    write_trace_csv(f, run.trace);
  }
  {
    auto f = open(dir / "report.csv");
    write_report_csv(f, run.report);
  }
  {
    auto f = open(dir / "summary.txt");
    write_summary(f, run.report);
  }
  {
    auto f = open(dir / "timeline.csv");
    write_timeline_csv(f, run.timeline);
  }
  for (const auto& s : run.signals) {
    auto f = open(dir / "channels" / (s.channel.id + ".csv"));
    write_channel_csv(f, s);
  }
  for (const auto& b : run.baselines) {
    auto f = open(dir / ("baseline_" + b.algorithm + ".csv"));
    write_kinematic_csv(f, b);
  }
  if (!run.strain_names.empty()) {
    auto f = open(dir / "strains.csv");
    f << "time";
    for (const auto& nm : run.strain_names) f << ",est_" << nm;
    for (const auto& nm : run.strain_names) f << ",true_" << nm;
    f << "\n" << std::setprecision(10);
    for (std::size_t e = 0; e < run.trace.size(); ++e) {
      const auto r = static_cast<Eigen::Index>(e);
      f << run.trace.times[e];
      for (Eigen::Index m = 0; m < run.estimated_strains.cols(); ++m) f << "," << run.estimated_strains(r, m);
      for (Eigen::Index m = 0; m < run.true_strains.cols(); ++m) f << "," << run.true_strains(r, m);
      f << "\n";
    }
  }
}

// ---------------------------------------------------------------------------
// Multi-seed

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::optional<ExperimentRun> run;
  std::string error;  // empty on success
};

/// Runs all seeds on a pool of `threads` workers. Outcomes keep seed order.
/// `on_done` (optional) is called serially as each seed finishes.
inline std::vector<SeedOutcome> run_seeds(
    const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds, int threads,
    const std::function<void(const SeedOutcome&)>& on_done = {}) {
  std::vector<SeedOutcome> out(seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex done_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      out[i].seed = seeds[i];
      try {
        out[i].run = run_experiment(cfg, seeds[i]);
      } catch (const std::exception& e) {
        out[i].error = e.what();
      }
      if (on_done) {
        const std::lock_guard<std::mutex> lock(done_mutex);
        on_done(out[i]);
      }
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(seeds.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw InvalidArgument("median: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// One row per seed with the headline numbers, then a median row.
inline void write_seed_table(std::ostream& os, const std::vector<ExperimentReport>& reports) {
  if (reports.empty()) return;
  const auto& first = reports.front();
  os << "seed";
  for (const auto& s : first.states) os << ",rms_" << s.name;
  for (const auto& p : first.parameters) os << ",ratio_" << p.name;
  for (const auto& i : first.inputs) os << ",peak_ratio_" << i.name;
  for (const auto& b : first.baselines) os << ",disp_rms_" << b.algorithm << ",vel_rms_" << b.algorithm;
  os << "\n" << std::setprecision(8);
  std::vector<std::vector<double>> cols;
  for (const auto& r : reports) {
    std::vector<double> row;
    for (const auto& s : r.states) row.push_back(s.rms_percent);
    for (const auto& p : r.parameters) row.push_back(p.ratio);
    for (const auto& i : r.inputs) row.push_back(i.ratio);
    for (const auto& b : r.baselines) {
      row.push_back(b.displacement_rms);
      row.push_back(b.velocity_rms);
    }
    os << r.seed;
    for (double v : row) os << "," << v;
    os << "\n";
    cols.resize(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) cols[i].push_back(row[i]);
  }
  os << "median";
  for (const auto& c : cols) os << "," << median(c);
  os << "\n";
}

}  // namespace mrfuse
