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
 * @file config.hpp
 * @brief JSON experiment configuration, schema validation and built-in presets.
 *
 * Indices in configuration files are 1-based (DOF, member, element), matching
 * the numbering printed by `mrfuse show-preset`. DOFs may also be given by
 * label, e.g. "u4". Every schema violation raises ConfigError naming the field.
 */

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "mrfuse/error.hpp"
#include "mrfuse/structural_models.hpp"

namespace mrfuse {

using json = nlohmann::json;

/// DOF reference: 1-based index or label.
using DofRef = std::variant<int, std::string>;

struct ModelConfig {
  std::string type;  // shear_frame | truss | beam
  // shear_frame
  std::vector<double> masses, stiffnesses, dampings;
  ExcitationKind excitation = ExcitationKind::kGroundMotion;
  // truss
  TrussSpec truss;
  // beam
  BeamSpec beam;
};

struct InputConfig {
  std::string type;  // synthetic_ground_motion | white_noise_force | half_sine_impact | csv
  std::string kind;  // ground_acceleration | nodal_force
  DofRef dof = 0;
  double rate = 0.0;
  double duration = 0.0;  // 0: experiment duration
  double peak = 0.0;
  double std_dev = 0.0;
  double start = 0.0;
  double pulse_duration = 0.0;
  std::uint64_t seed = 0;
  std::string path;
  bool known = true;
};

struct ChannelConfig {
  std::string id;
  Quantity quantity = Quantity::kAcceleration;
  DofRef target = 0;  // DOF for kinematic quantities, 1-based member/element for strains
  double position = 0.5;
  ResponseFrame frame = ResponseFrame::kRelative;
  double rate = 0.0;
  double noise_ratio = 0.0;
  double acquisition_rate = 0.0;  // clean signal is first sampled here when set
};

struct FilterSection {
  bool constrained = true;  // cgukf when true, ukf otherwise
  std::vector<std::string> estimate;  // parameter names; empty means all
  double eta = 1.0;
  double covariance_correction = 0.0;
  double initial_offset = 0.3;
  double initial_parameter_std = 0.5;
  double initial_state_std = 1e-3;
  double parameter_noise = 1e-8;
  double state_noise = 1e-6;
  bool exact_propagation = true;
  double max_substep = 1e-3;
  bool nonnegative_parameters = true;
  std::vector<DofRef> unknown_inputs;
  double input_noise = 0.05;
  double expected_input_peak = 0.0;
  bool pre_event_noise = false;  // estimate noise variances from a quiet window
  double noise_window_begin = 0.0;
  double noise_window_end = 0.0;
};

struct BaselineSection {
  bool enabled = false;
  std::string acceleration_channel;
  std::string displacement_channel;
  double df1_process_noise_scale = 1.0;
  double df2_process_noise_scale = 1.0;
  int df2_memory_intervals = 2;
};

struct ExperimentConfig {
  std::string name;
  std::string description;
  double duration = 0.0;
  double simulation_dt = 0.0;
  std::vector<std::uint64_t> seeds;
  ModelConfig model;
  std::vector<InputConfig> inputs;
  std::vector<ChannelConfig> channels;
  FilterSection filter;
  BaselineSection baselines;
  std::filesystem::path base_dir;  // relative input paths resolve here
};

namespace detail {

/// Walks a JSON object while tracking the dotted path for error messages.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return j_; }
  bool has(const char* key) const { return j_.contains(key); }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void require_object() const {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  void allow_only(std::initializer_list<const char*> keys) const {
    require_object();
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) throw ConfigError(field(it.key()), "unknown field");
  }

  Node child(const char* key) const {
    if (!j_.contains(key)) throw ConfigError(field(key), "missing required field");
    return Node(j_.at(key), field(key));
  }

  template <class T>
  T get(const char* key) const {
    if (!j_.contains(key)) throw ConfigError(field(key), "missing required field");
    return convert<T>(j_.at(key), field(key));
  }

  template <class T>
  T get(const char* key, T fallback) const {
    if (!j_.contains(key)) return fallback;
    return convert<T>(j_.at(key), field(key));
  }

  template <class T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(where, "expected a number");
    } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer()) throw ConfigError(where, "expected an integer");
      if constexpr (std::is_same_v<T, std::uint64_t>)
        if (v.get<std::int64_t>() < 0) throw ConfigError(where, "expected a non-negative integer");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where, "expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where, "expected a string");
    } else if constexpr (std::is_same_v<T, DofRef>) {
      if (v.is_number_integer()) return DofRef(v.get<int>());
      if (v.is_string()) return DofRef(v.get<std::string>());
      throw ConfigError(where, "expected a 1-based index or a DOF label");
    } else {
      if (!v.is_array()) throw ConfigError(where, "expected an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(convert<typename T::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
      return out;
    }
    return v.get<T>();
  }

 private:
  const json& j_;
  std::string path_;
};

inline void positive(double v, const std::string& where) {
  if (!(v > 0.0)) throw ConfigError(where, "must be positive");
}

inline void non_negative(double v, const std::string& where) {
  if (!(v >= 0.0)) throw ConfigError(where, "must be non-negative");
}

template <class T>
T pick(const std::string& value, const std::string& where,
       std::initializer_list<std::pair<const char*, T>> options) {
  std::string names;
  for (const auto& [name, v] : options) {
    if (value == name) return v;
    names += names.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError(where, "unknown value '" + value + "' (expected one of: " + names + ")");
}

inline ModelConfig parse_model(const Node& n) {
  ModelConfig m;
  m.type = n.get<std::string>("type");
  if (m.type == "shear_frame") {
    n.allow_only({"type", "masses", "stiffnesses", "dampings", "excitation"});
    m.masses = n.get<std::vector<double>>("masses");
    m.stiffnesses = n.get<std::vector<double>>("stiffnesses");
    m.dampings = n.get<std::vector<double>>("dampings");
    if (m.masses.empty()) throw ConfigError(n.field("masses"), "at least one story required");
    if (m.stiffnesses.size() != m.masses.size())
      throw ConfigError(n.field("stiffnesses"), "length differs from masses");
    if (m.dampings.size() != m.masses.size())
      throw ConfigError(n.field("dampings"), "length differs from masses");
    for (std::size_t i = 0; i < m.masses.size(); ++i)
      positive(m.masses[i], n.field("masses") + "[" + std::to_string(i) + "]");
    m.excitation = pick<ExcitationKind>(
        n.get<std::string>("excitation", "ground_motion"), n.field("excitation"),
        {{"ground_motion", ExcitationKind::kGroundMotion}, {"nodal_force", ExcitationKind::kNodalForce}});
  } else if (m.type == "truss") {
    n.allow_only({"type", "layout", "bay", "height", "nodes", "members", "restraints",
                  "elastic_modulus", "density", "added_masses", "damping_ratio", "damping_modes"});
    const std::string layout = n.get<std::string>("layout", "pratt");
    if (layout == "pratt") {
      for (const char* k : {"nodes", "members", "restraints"})
        if (n.has(k)) throw ConfigError(n.field(k), "not allowed with layout 'pratt'");
      const double bay = n.get<double>("bay", 2.0), height = n.get<double>("height", 2.0);
      positive(bay, n.field("bay"));
      positive(height, n.field("height"));
      m.truss = pratt_truss_spec(bay, height);
    } else if (layout == "explicit") {
      m.truss = TrussSpec{};
      m.truss.added_masses.clear();
      const Node nodes = n.child("nodes");
      if (!nodes.raw().is_array() || nodes.raw().empty())
        throw ConfigError(nodes.path(), "expected a non-empty array of [x, y]");
      for (std::size_t i = 0; i < nodes.raw().size(); ++i) {
        const auto xy = Node::convert<std::vector<double>>(nodes.raw()[i],
                                                           nodes.path() + "[" + std::to_string(i) + "]");
        if (xy.size() != 2)
          throw ConfigError(nodes.path() + "[" + std::to_string(i) + "]", "expected [x, y]");
        m.truss.nodes.push_back({xy[0], xy[1]});
      }
      const Node members = n.child("members");
      if (!members.raw().is_array() || members.raw().empty())
        throw ConfigError(members.path(), "expected a non-empty array");
      for (std::size_t i = 0; i < members.raw().size(); ++i) {
        const Node mem(members.raw()[i], members.path() + "[" + std::to_string(i) + "]");
        mem.allow_only({"nodes", "area", "group"});
        const auto ends = mem.get<std::vector<int>>("nodes");
        if (ends.size() != 2) throw ConfigError(mem.field("nodes"), "expected two node numbers");
        for (int e : ends)
          if (e < 1 || e > static_cast<int>(m.truss.nodes.size()))
            throw ConfigError(mem.field("nodes"), "node number out of range");
        const double area = mem.get<double>("area");
        positive(area, mem.field("area"));
        m.truss.members.push_back({ends[0] - 1, ends[1] - 1, area, mem.get<std::string>("group", "")});
      }
      const Node res = n.child("restraints");
      if (!res.raw().is_array()) throw ConfigError(res.path(), "expected an array");
      for (std::size_t i = 0; i < res.raw().size(); ++i) {
        const Node r(res.raw()[i], res.path() + "[" + std::to_string(i) + "]");
        r.allow_only({"node", "direction"});
        const int node = r.get<int>("node");
        if (node < 1 || node > static_cast<int>(m.truss.nodes.size()))
          throw ConfigError(r.field("node"), "node number out of range");
        const int dir = pick<int>(r.get<std::string>("direction"), r.field("direction"),
                                  {{"x", 0}, {"y", 1}});
        m.truss.restraints.push_back({node - 1, dir});
      }
    } else {
      throw ConfigError(n.field("layout"), "unknown value '" + layout + "' (expected pratt or explicit)");
    }
    m.truss.elastic_modulus = n.get<double>("elastic_modulus", m.truss.elastic_modulus);
    m.truss.density = n.get<double>("density", m.truss.density);
    positive(m.truss.elastic_modulus, n.field("elastic_modulus"));
    non_negative(m.truss.density, n.field("density"));
    if (n.has("added_masses")) m.truss.added_masses = n.get<std::vector<double>>("added_masses");
    m.truss.damping_ratio = n.get<double>("damping_ratio", m.truss.damping_ratio);
    m.truss.damping_modes = n.get<int>("damping_modes", m.truss.damping_modes);
    non_negative(m.truss.damping_ratio, n.field("damping_ratio"));
    if (m.truss.damping_modes < 2) throw ConfigError(n.field("damping_modes"), "must be at least 2");
  } else if (m.type == "beam") {
    n.allow_only({"type", "n_elements", "length", "flexural_rigidity", "mass_per_length", "support",
                  "damping_ratio", "damping_modes", "gauge_offset"});
    m.beam.n_elements = n.get<int>("n_elements", m.beam.n_elements);
    if (m.beam.n_elements < 1) throw ConfigError(n.field("n_elements"), "must be at least 1");
    m.beam.length = n.get<double>("length", m.beam.length);
    m.beam.flexural_rigidity = n.get<double>("flexural_rigidity", m.beam.flexural_rigidity);
    m.beam.mass_per_length = n.get<double>("mass_per_length", m.beam.mass_per_length);
    positive(m.beam.length, n.field("length"));
    positive(m.beam.flexural_rigidity, n.field("flexural_rigidity"));
    positive(m.beam.mass_per_length, n.field("mass_per_length"));
    m.beam.support = pick<BeamSupport>(n.get<std::string>("support", "cantilever"), n.field("support"),
                                       {{"cantilever", BeamSupport::kCantilever},
                                        {"simply_supported", BeamSupport::kSimplySupported}});
    m.beam.damping_ratio = n.get<double>("damping_ratio", m.beam.damping_ratio);
    m.beam.damping_modes = n.get<int>("damping_modes", m.beam.damping_modes);
    m.beam.gauge_offset = n.get<double>("gauge_offset", m.beam.gauge_offset);
    non_negative(m.beam.damping_ratio, n.field("damping_ratio"));
    if (m.beam.damping_modes < 2) throw ConfigError(n.field("damping_modes"), "must be at least 2");
  } else {
    throw ConfigError(n.field("type"),
                      "unknown value '" + m.type + "' (expected one of: shear_frame, truss, beam)");
  }
  return m;
}

inline InputConfig parse_input(const Node& n) {
  InputConfig in;
  in.type = n.get<std::string>("type");
  in.known = n.get<bool>("known", true);
  in.duration = n.get<double>("duration", 0.0);
  non_negative(in.duration, n.field("duration"));
  if (in.type == "synthetic_ground_motion") {
    n.allow_only({"type", "known", "duration", "rate", "peak", "seed"});
    in.kind = "ground_acceleration";
    in.rate = n.get<double>("rate");
    in.peak = n.get<double>("peak");
    in.seed = n.get<std::uint64_t>("seed", 0);
    positive(in.rate, n.field("rate"));
    non_negative(in.peak, n.field("peak"));
  } else if (in.type == "white_noise_force") {
    n.allow_only({"type", "known", "duration", "dof", "rate", "std", "seed"});
    in.kind = "nodal_force";
    in.dof = n.get<DofRef>("dof");
    in.rate = n.get<double>("rate");
    in.std_dev = n.get<double>("std");
    in.seed = n.get<std::uint64_t>("seed", 0);
    positive(in.rate, n.field("rate"));
    non_negative(in.std_dev, n.field("std"));
  } else if (in.type == "half_sine_impact") {
    n.allow_only({"type", "known", "duration", "dof", "rate", "peak", "start", "pulse_duration"});
    in.kind = "nodal_force";
    in.dof = n.get<DofRef>("dof");
    in.rate = n.get<double>("rate");
    in.peak = n.get<double>("peak");
    in.start = n.get<double>("start");
    in.pulse_duration = n.get<double>("pulse_duration");
    positive(in.rate, n.field("rate"));
    non_negative(in.start, n.field("start"));
    positive(in.pulse_duration, n.field("pulse_duration"));
  } else if (in.type == "csv") {
    n.allow_only({"type", "known", "duration", "path", "kind", "dof"});
    in.path = n.get<std::string>("path");
    in.kind = n.get<std::string>("kind");
    pick<int>(in.kind, n.field("kind"), {{"ground_acceleration", 0}, {"nodal_force", 1}});
    if (in.kind == "nodal_force") in.dof = n.get<DofRef>("dof");
  } else {
    throw ConfigError(n.field("type"),
                      "unknown value '" + in.type +
                          "' (expected one of: synthetic_ground_motion, white_noise_force, "
                          "half_sine_impact, csv)");
  }
  return in;
}

inline ChannelConfig parse_channel(const Node& n) {
  n.allow_only({"id", "quantity", "target", "position", "frame", "rate", "noise_ratio",
                "acquisition_rate"});
  ChannelConfig c;
  c.id = n.get<std::string>("id");
  if (c.id.empty()) throw ConfigError(n.field("id"), "must not be empty");
  c.quantity = pick<Quantity>(n.get<std::string>("quantity"), n.field("quantity"),
                              {{"acceleration", Quantity::kAcceleration},
                               {"displacement", Quantity::kDisplacement},
                               {"velocity", Quantity::kVelocity},
                               {"axial_strain", Quantity::kAxialStrain},
                               {"bending_strain", Quantity::kBendingStrain}});
  c.target = n.get<DofRef>("target");
  c.position = n.get<double>("position", 0.5);
  c.frame = pick<ResponseFrame>(n.get<std::string>("frame", "relative"), n.field("frame"),
                                {{"relative", ResponseFrame::kRelative},
                                 {"absolute", ResponseFrame::kAbsolute}});
  c.rate = n.get<double>("rate");
  c.noise_ratio = n.get<double>("noise_ratio", 0.0);
  c.acquisition_rate = n.get<double>("acquisition_rate", 0.0);
  positive(c.rate, n.field("rate"));
  non_negative(c.noise_ratio, n.field("noise_ratio"));
  non_negative(c.acquisition_rate, n.field("acquisition_rate"));
  if (c.acquisition_rate > 0.0 && c.acquisition_rate < c.rate)
    throw ConfigError(n.field("acquisition_rate"), "must not be below rate");
  if (c.position < 0.0 || c.position > 1.0)
    throw ConfigError(n.field("position"), "must lie in [0, 1]");
  return c;
}

inline FilterSection parse_filter(const Node& n) {
  n.allow_only({"algorithm", "estimate", "eta", "covariance_correction", "initial_offset",
                "initial_parameter_std", "initial_state_std", "parameter_noise", "state_noise",
                "propagation", "max_substep", "nonnegative_parameters", "unknown_inputs",
                "input_noise", "expected_input_peak", "noise_variance"});
  FilterSection f;
  f.constrained = pick<bool>(n.get<std::string>("algorithm", "cgukf"), n.field("algorithm"),
                             {{"cgukf", true}, {"ukf", false}});
  if (n.has("estimate")) {
    const json& e = n.raw().at("estimate");
    if (e.is_string()) {
      if (e.get<std::string>() != "all")
        throw ConfigError(n.field("estimate"), "expected \"all\" or a list of parameter names");
    } else {
      f.estimate = n.get<std::vector<std::string>>("estimate");
    }
  }
  f.eta = n.get<double>("eta", f.eta);
  f.covariance_correction = n.get<double>("covariance_correction", f.covariance_correction);
  f.initial_offset = n.get<double>("initial_offset", f.initial_offset);
  f.initial_parameter_std = n.get<double>("initial_parameter_std", f.initial_parameter_std);
  f.initial_state_std = n.get<double>("initial_state_std", f.initial_state_std);
  f.parameter_noise = n.get<double>("parameter_noise", f.parameter_noise);
  f.state_noise = n.get<double>("state_noise", f.state_noise);
  f.exact_propagation = pick<bool>(n.get<std::string>("propagation", "exact"), n.field("propagation"),
                                   {{"exact", true}, {"newmark", false}});
  f.max_substep = n.get<double>("max_substep", f.max_substep);
  f.nonnegative_parameters = n.get<bool>("nonnegative_parameters", f.nonnegative_parameters);
  f.unknown_inputs = n.get<std::vector<DofRef>>("unknown_inputs", {});
  f.input_noise = n.get<double>("input_noise", f.input_noise);
  f.expected_input_peak = n.get<double>("expected_input_peak", f.expected_input_peak);
  if (!(f.initial_offset > -1.0)) throw ConfigError(n.field("initial_offset"), "must exceed -1");
  for (const auto& [v, k] : {std::pair{f.initial_parameter_std, "initial_parameter_std"},
                             {f.initial_state_std, "initial_state_std"},
                             {f.parameter_noise, "parameter_noise"},
                             {f.state_noise, "state_noise"},
                             {f.input_noise, "input_noise"}})
    non_negative(v, n.field(k));
  positive(f.max_substep, n.field("max_substep"));
  if (!f.unknown_inputs.empty()) positive(f.expected_input_peak, n.field("expected_input_peak"));
  if (n.has("noise_variance")) {
    const Node nv = n.child("noise_variance");
    nv.allow_only({"source", "window"});
    f.pre_event_noise = pick<bool>(nv.get<std::string>("source"), nv.field("source"),
                                   {{"injected", false}, {"pre_event", true}});
    if (f.pre_event_noise) {
      const auto w = nv.get<std::vector<double>>("window");
      if (w.size() != 2 || !(w[0] >= 0.0) || !(w[1] > w[0]))
        throw ConfigError(nv.field("window"), "expected [begin, end] with 0 <= begin < end");
      f.noise_window_begin = w[0];
      f.noise_window_end = w[1];
    }
  }
  return f;
}

inline BaselineSection parse_baselines(const Node& n) {
  n.allow_only({"enabled", "acceleration_channel", "displacement_channel",
                "df1_process_noise_scale", "df2_process_noise_scale", "df2_memory_intervals"});
  BaselineSection b;
  b.enabled = n.get<bool>("enabled", true);
  if (!b.enabled) return b;
  b.acceleration_channel = n.get<std::string>("acceleration_channel");
  b.displacement_channel = n.get<std::string>("displacement_channel");
  b.df1_process_noise_scale = n.get<double>("df1_process_noise_scale", 1.0);
  b.df2_process_noise_scale = n.get<double>("df2_process_noise_scale", 1.0);
  b.df2_memory_intervals = n.get<int>("df2_memory_intervals", 2);
  non_negative(b.df1_process_noise_scale, n.field("df1_process_noise_scale"));
  non_negative(b.df2_process_noise_scale, n.field("df2_process_noise_scale"));
  if (b.df2_memory_intervals < 1)
    throw ConfigError(n.field("df2_memory_intervals"), "must be at least 1");
  return b;
}

}  // namespace detail

/// Parses and validates a configuration. Relative CSV paths resolve against
/// `base_dir`.
inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir = {}) {
  const detail::Node root(j, "");
  root.allow_only({"name", "description", "duration", "simulation_dt", "seeds", "model", "inputs",
                   "channels", "filter", "baselines"});
  ExperimentConfig c;
  c.base_dir = base_dir;
  c.name = root.get<std::string>("name");
  c.description = root.get<std::string>("description", "");
  c.duration = root.get<double>("duration");
  c.simulation_dt = root.get<double>("simulation_dt");
  detail::positive(c.duration, "duration");
  detail::positive(c.simulation_dt, "simulation_dt");
  if (c.simulation_dt > c.duration) throw ConfigError("simulation_dt", "exceeds duration");
  c.seeds = root.get<std::vector<std::uint64_t>>("seeds");
  if (c.seeds.empty()) throw ConfigError("seeds", "at least one seed required");
  c.model = detail::parse_model(root.child("model"));

  const detail::Node inputs = root.child("inputs");
  if (!inputs.raw().is_array()) throw ConfigError("inputs", "expected an array");
  for (std::size_t i = 0; i < inputs.raw().size(); ++i)
    c.inputs.push_back(
        detail::parse_input(detail::Node(inputs.raw()[i], "inputs[" + std::to_string(i) + "]")));

  const detail::Node channels = root.child("channels");
  if (!channels.raw().is_array()) throw ConfigError("channels", "expected an array");
  if (channels.raw().empty()) throw ConfigError("channels", "at least one channel required");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < channels.raw().size(); ++i) {
    const std::string where = "channels[" + std::to_string(i) + "]";
    c.channels.push_back(detail::parse_channel(detail::Node(channels.raw()[i], where)));
    if (!ids.insert(c.channels.back().id).second)
      throw ConfigError(where + ".id", "duplicate channel id '" + c.channels.back().id + "'");
  }

  c.filter = root.has("filter") ? detail::parse_filter(root.child("filter")) : FilterSection{};
  if (root.has("baselines")) {
    c.baselines = detail::parse_baselines(root.child("baselines"));
    if (c.baselines.enabled) {
      for (const auto& [id, key] : {std::pair{c.baselines.acceleration_channel, "acceleration_channel"},
                                    {c.baselines.displacement_channel, "displacement_channel"}})
        if (!ids.count(id))
          throw ConfigError(std::string("baselines.") + key, "no channel with id '" + id + "'");
    }
  }
  for (std::size_t i = 0; i < c.inputs.size(); ++i) {
    const auto& in = c.inputs[i];
    if (in.type != "csv") continue;
    std::filesystem::path p(in.path);
    if (p.is_relative()) p = base_dir / p;
    if (!std::filesystem::exists(p))
      throw ConfigError("inputs[" + std::to_string(i) + "].path", "file not found: " + p.string());
  }
  return c;
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Presets

inline json preset_json(const std::string& name) {
  const json seeds = {1, 2, 3, 4, 5};
  if (name == "frame_500_50" || name == "frame_500_30") {
    const bool odd = name == "frame_500_30";
    json disp = {{"id", "disp1"},  {"quantity", "displacement"}, {"target", 1},
                 {"frame", "relative"}, {"rate", odd ? 30.0 : 50.0}, {"noise_ratio", 0.10}};
    if (odd) disp["acquisition_rate"] = 500.0;
    return {
        {"name", name},
        {"description", odd ? "Two-story shear frame, 500 Hz absolute acceleration fused with 30 Hz "
                              "relative displacement at floor 1"
                            : "Two-story shear frame, 500 Hz absolute acceleration fused with 50 Hz "
                              "relative displacement at floor 1"},
        {"duration", 30.0},
        {"simulation_dt", 1e-4},
        {"seeds", seeds},
        {"model",
         {{"type", "shear_frame"},
          {"masses", {10.0, 10.0}},
          {"stiffnesses", {1e4, 1e4}},
          {"dampings", {32.0, 32.0}},
          {"excitation", "ground_motion"}}},
        {"inputs",
         {{{"type", "synthetic_ground_motion"}, {"rate", 100.0}, {"peak", 3.417}, {"seed", 7}}}},
        {"channels",
         {{{"id", "acc1"},
           {"quantity", "acceleration"},
           {"target", 1},
           {"frame", "absolute"},
           {"rate", 500.0},
           {"noise_ratio", 0.10}},
          disp}},
        {"filter",
         {{"algorithm", "cgukf"},
          {"estimate", {"k1", "k2", "c1", "c2"}},
          {"eta", 1.0},
          {"initial_offset", 0.3},
          {"initial_parameter_std", 0.5},
          {"parameter_noise", 1e-8},
          {"state_noise", 1e-6},
          {"propagation", "exact"}}},
        {"baselines",
         {{"enabled", true},
          {"acceleration_channel", "acc1"},
          {"displacement_channel", "disp1"},
          {"df1_process_noise_scale", 150.0},
          {"df2_process_noise_scale", 3.0},
          {"df2_memory_intervals", 20}}},
    };
  }
  if (name == "truss_fused" || name == "truss_acc_only") {
    const bool fused = name == "truss_fused";
    json channels = json::array();
    for (int d : {2, 7, 8, 9, 11, 12})
      channels.push_back({{"id", "acc" + std::to_string(d)},
                          {"quantity", "acceleration"},
                          {"target", d},
                          {"rate", 1000.0},
                          {"noise_ratio", 0.05}});
    if (fused)
      for (int e : {3, 7, 8, 9, 10, 12, 13})
        channels.push_back({{"id", "eps" + std::to_string(e)},
                            {"quantity", "axial_strain"},
                            {"target", e},
                            {"rate", 250.0},
                            {"noise_ratio", 0.10}});
    return {
        {"name", name},
        {"description", fused ? "Planar 13-member truss, 1000 Hz accelerations fused with 250 Hz "
                                "axial strains"
                              : "Planar 13-member truss, 1000 Hz accelerations only"},
        {"duration", 10.0},
        {"simulation_dt", 2.5e-4},
        {"seeds", seeds},
        {"model",
         {{"type", "truss"},
          {"layout", "pratt"},
          {"bay", 2.0},
          {"height", 2.0},
          {"elastic_modulus", 200e9},
          {"density", 7850.0},
          {"damping_ratio", 0.02},
          {"damping_modes", 9}}},
        {"inputs",
         {{{"type", "white_noise_force"}, {"dof", 2}, {"rate", 1000.0}, {"std", 1000.0}, {"seed", 11}}}},
        {"channels", channels},
        {"filter",
         {{"algorithm", "cgukf"},
          {"estimate", "all"},
          {"eta", 1.0},
          {"initial_offset", 0.3},
          {"initial_parameter_std", 0.5},
          {"parameter_noise", 1e-8},
          {"state_noise", 1e-6},
          {"propagation", "newmark"},
          {"max_substep", 2.5e-4}}},
    };
  }
  if (name == "beam_input_estimation") {
    json channels = json::array();
    int k = 1;
    for (const char* dof : {"u2", "u4", "u6"})
      channels.push_back({{"id", "acc" + std::to_string(k++)},
                          {"quantity", "acceleration"},
                          {"target", dof},
                          {"rate", 2000.0},
                          {"noise_ratio", 0.05}});
    for (int e : {1, 4, 6})
      channels.push_back({{"id", "sg" + std::to_string(e)},
                          {"quantity", "bending_strain"},
                          {"target", e},
                          {"position", 0.5},
                          {"rate", 200.0},
                          {"acquisition_rate", 2000.0},
                          {"noise_ratio", 0.05}});
    return {
        {"name", name},
        {"description", "Cantilever beam under an unmeasured impact at accelerometer 2; 2000 Hz "
                        "accelerations fused with 200 Hz bending strains"},
        {"duration", 1.5},
        {"simulation_dt", 1e-4},
        {"seeds", seeds},
        {"model",
         {{"type", "beam"},
          {"n_elements", 6},
          {"length", 1.2},
          {"flexural_rigidity", 117.0},
          {"mass_per_length", 2.04},
          {"support", "cantilever"},
          {"damping_ratio", 0.01},
          {"damping_modes", 2},
          {"gauge_offset", 0.0026}}},
        {"inputs",
         {{{"type", "half_sine_impact"},
           {"known", false},
           {"dof", "u4"},
           {"rate", 10000.0},
           {"peak", 20.0},
           {"start", 0.5},
           {"pulse_duration", 0.01}}}},
        {"channels", channels},
        {"filter",
         {{"algorithm", "cgukf"},
          {"estimate", "all"},
          {"eta", 1.0},
          {"initial_offset", 0.3},
          {"initial_parameter_std", 0.15},
          {"parameter_noise", 1e-8},
          {"state_noise", 1e-6},
          {"propagation", "newmark"},
          {"max_substep", 1e-4},
          {"unknown_inputs", {"u4"}},
          {"input_noise", 0.5},
          {"expected_input_peak", 20.0},
          {"noise_variance", {{"source", "pre_event"}, {"window", {0.0, 0.499}}}}}},
    };
  }
  throw InvalidArgument("unknown preset '" + name + "'");
}

inline std::vector<std::string> preset_names() {
  return {"frame_500_50", "frame_500_30", "truss_fused", "truss_acc_only", "beam_input_estimation"};
}

inline ExperimentConfig preset_config(const std::string& name) {
  return parse_config(preset_json(name));
}

}  // namespace mrfuse
