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

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <iomanip>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mrfuse/error.hpp"
#include "mrfuse/response_simulator.hpp"
#include "mrfuse/structural_models.hpp"

namespace mrfuse {

/// Measurements that arrive together. `channels` holds registration indices
/// in ascending order and `values` is stacked in the same order.
struct MeasurementEvent {
  double time = 0.0;
  std::vector<int> channels;
  Eigen::VectorXd values;
  double dt_from_previous = 0.0;  // 0 for the first event
};

struct MeasurementTimeline {
  std::vector<std::string> channel_ids;  // registration order
  std::vector<MeasurementEvent> events;

  double min_step() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < events.size(); ++i) m = std::min(m, events[i].dt_from_previous);
    return m;
  }
  double max_step() const {
    double m = 0.0;
    for (std::size_t i = 1; i < events.size(); ++i) m = std::max(m, events[i].dt_from_previous);
    return m;
  }
};

/// Merges channel signals into one chronological event stream. Samples within
/// `time_tolerance` of the first sample of an event join that event.
inline MeasurementTimeline merge_timelines(std::span<const ChannelSignal> channels,
                                           double time_tolerance = 1e-9) {
  if (channels.empty()) throw InvalidArgument("merge_timelines: no channels");
  if (!(time_tolerance >= 0.0)) throw InvalidArgument("merge_timelines: negative tolerance");

  struct Sample {
    double t;
    int channel;
    double value;
  };
  std::vector<Sample> all;
  MeasurementTimeline timeline;
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const auto& s = channels[c];
    timeline.channel_ids.push_back(s.channel.id);
    if (s.times.size() != s.values.size())
      throw InvalidArgument("merge_timelines: channel '" + s.channel.id + "' size mismatch");
    for (std::size_t i = 0; i < s.times.size(); ++i) {
      if (i > 0 && !(s.times[i] > s.times[i - 1]))
        throw InvalidArgument("merge_timelines: channel '" + s.channel.id +
                              "' timestamps not strictly increasing");
      all.push_back({s.times[i], static_cast<int>(c), s.values[i]});
    }
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Sample& a, const Sample& b) { return a.t < b.t; });

  std::size_t i = 0;
  while (i < all.size()) {
    const double anchor = all[i].t;
    std::size_t j = i;
    while (j < all.size() && all[j].t - anchor <= time_tolerance) ++j;
    std::vector<Sample> group(all.begin() + static_cast<std::ptrdiff_t>(i),
                              all.begin() + static_cast<std::ptrdiff_t>(j));
    std::stable_sort(group.begin(), group.end(),
                     [](const Sample& a, const Sample& b) { return a.channel < b.channel; });
    MeasurementEvent ev;
    ev.time = anchor;
    ev.values.resize(static_cast<Eigen::Index>(group.size()));
    for (std::size_t g = 0; g < group.size(); ++g) {
      if (g > 0 && group[g].channel == group[g - 1].channel)
        throw InvalidArgument("merge_timelines: tolerance merges two samples of one channel");
      ev.channels.push_back(group[g].channel);
      ev.values(static_cast<Eigen::Index>(g)) = group[g].value;
    }
    ev.dt_from_previous = timeline.events.empty() ? 0.0 : anchor - timeline.events.back().time;
    timeline.events.push_back(std::move(ev));
    i = j;
  }
  return timeline;
}

/// A channel known to the filter: its response map and noise variance.
struct RegisteredChannel {
  std::string id;
  ResponseMap map;
  double variance = 0.0;
};

/// Event-specific measurement model: stacked maps and diagonal noise.
struct ActiveMeasurementModel {
  std::vector<int> channels;
  std::vector<ResponseMap> maps;
  Eigen::VectorXd variances;

  Eigen::MatrixXd noise_covariance() const { return variances.asDiagonal(); }
};

inline ActiveMeasurementModel active_measurement_model(
    const MeasurementEvent& event, std::span<const RegisteredChannel> registry) {
  ActiveMeasurementModel m;
  m.variances.resize(static_cast<Eigen::Index>(event.channels.size()));
  for (std::size_t i = 0; i < event.channels.size(); ++i) {
    const int c = event.channels[i];
    if (c < 0 || c >= static_cast<int>(registry.size()))
      throw InvalidArgument("active_measurement_model: unregistered channel index " +
                            std::to_string(c));
    m.channels.push_back(c);
    m.maps.push_back(registry[c].map);
    m.variances(static_cast<Eigen::Index>(i)) = registry[c].variance;
  }
  return m;
}

/// Debug dump: one line per event with time, active channel ids and step.
inline void write_timeline_csv(std::ostream& os, const MeasurementTimeline& timeline) {
  os << "time,channels,dt\n";
  os << std::setprecision(12);
  for (const auto& ev : timeline.events) {
    os << ev.time << ",";
    for (std::size_t i = 0; i < ev.channels.size(); ++i)
      os << (i ? ";" : "") << timeline.channel_ids[ev.channels[i]];
    os << "," << ev.dt_from_previous << "\n";
  }
}

}  // namespace mrfuse
