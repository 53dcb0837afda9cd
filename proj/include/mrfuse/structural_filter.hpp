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
 * @file structural_filter.hpp
 * @brief FilterModel for joint state-parameter(-input) estimation of a linear
 *        structure.
 *
 * Each sigma point carries its own parameter block, so stiffness and damping
 * are re-assembled per point before propagation and before evaluating
 * acceleration rows. Parameters and unknown inputs follow a random walk: the
 * propagation leaves them untouched and the process noise moves them.
 *
 * Loads are written as f(t) = L w(t), one column of L per excitation source:
 * known records (interpolated linearly in time) first, then unknown inputs
 * (held constant over a step).
 */

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mrfuse/error.hpp"
#include "mrfuse/multirate_scheduler.hpp"
#include "mrfuse/response_simulator.hpp"
#include "mrfuse/structural_models.hpp"
#include "mrfuse/ukf.hpp"

namespace mrfuse {

enum class Propagation {
  kExact,    // matrix exponential of the first-order system, first-order hold on loads
  kNewmark,  // average-acceleration Newmark, substepped
};

struct PropagationOptions {
  Propagation method = Propagation::kExact;
  double max_substep = 1e-3;  // s, Newmark only
};

class StructuralFilterModel {
 public:
  /// `estimated` lists model parameter indices carried in the augmented
  /// vector; `unknown_input_dofs` lists DOFs whose nodal force is estimated.
  StructuralFilterModel(StructuralModel model, std::vector<int> estimated,
                        std::vector<InputRecord> known_inputs, std::vector<int> unknown_input_dofs,
                        std::vector<RegisteredChannel> registry, PropagationOptions options = {})
      : model_(std::move(model)),
        estimated_(std::move(estimated)),
        known_(std::move(known_inputs)),
        unknown_dofs_(std::move(unknown_input_dofs)),
        registry_(std::move(registry)),
        options_(options) {
    const int n = model_.dof_count();
    nominal_ = model_.nominal_parameters();
    for (int p : estimated_)
      if (p < 0 || p >= static_cast<int>(model_.parameters.size()))
        throw InvalidArgument("structural filter: estimated parameter index out of range");
    for (const auto& in : known_) in.validate(model_);
    for (int d : unknown_dofs_)
      if (d < 0 || d >= n) throw InvalidArgument("structural filter: unknown input DOF out of range");
    if (options_.method == Propagation::kNewmark && !(options_.max_substep > 0.0))
      throw InvalidArgument("structural filter: max_substep must be positive");

    const int m = static_cast<int>(known_.size() + unknown_dofs_.size());
    load_ = Eigen::MatrixXd::Zero(n, m);
    for (std::size_t j = 0; j < known_.size(); ++j) {
      if (known_[j].kind == InputKind::kGroundAcceleration)
        load_.col(static_cast<Eigen::Index>(j)) = -model_.mass * model_.ground_influence;
      else
        load_(known_[j].target_dof, static_cast<Eigen::Index>(j)) = 1.0;
    }
    for (std::size_t j = 0; j < unknown_dofs_.size(); ++j)
      load_(unknown_dofs_[j], static_cast<Eigen::Index>(known_.size() + j)) = 1.0;

    mass_inv_ = model_.mass.inverse();
    rows_.resize(registry_.size());
    for (std::size_t c = 0; c < registry_.size(); ++c) {
      validate_response_map(model_, registry_[c].map);
      if (registry_[c].map.quantity != Quantity::kAcceleration)
        rows_[c] = kinematic_row(model_, registry_[c].map);
    }

    layout_.states = 2 * n;
    layout_.parameters = static_cast<int>(estimated_.size());
    layout_.inputs = static_cast<int>(unknown_dofs_.size());
    for (const auto& l : model_.dof_labels) layout_.names.push_back(l);
    for (const auto& l : model_.dof_labels) layout_.names.push_back("d" + l);
    for (int p : estimated_) layout_.names.push_back(model_.parameters[p].name);
    for (int d : unknown_dofs_) layout_.names.push_back("f_" + model_.dof_labels[d]);
  }

  const StructuralModel& model() const { return model_; }
  const StateLayout& layout() const { return layout_; }
  const std::vector<RegisteredChannel>& registry() const { return registry_; }
  const std::vector<int>& estimated_parameters() const { return estimated_; }
  const std::vector<int>& unknown_input_dofs() const { return unknown_dofs_; }

  /// Full model parameter vector with the estimated entries taken from `x`.
  Eigen::VectorXd parameters_of(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    Eigen::VectorXd p = nominal_;
    for (std::size_t j = 0; j < estimated_.size(); ++j)
      p(estimated_[j]) = x(layout_.parameter_offset() + static_cast<Eigen::Index>(j));
    return p;
  }

  /// Excitation amplitudes w(t): known records at t, then unknown inputs from x.
  Eigen::VectorXd excitation(const Eigen::Ref<const Eigen::VectorXd>& x, double t) const {
    Eigen::VectorXd w(load_.cols());
    for (std::size_t j = 0; j < known_.size(); ++j)
      w(static_cast<Eigen::Index>(j)) = known_[j].value_at(t);
    for (std::size_t j = 0; j < unknown_dofs_.size(); ++j)
      w(static_cast<Eigen::Index>(known_.size() + j)) =
          x(layout_.input_offset() + static_cast<Eigen::Index>(j));
    return w;
  }

  void propagate(Eigen::MatrixXd& points, double t, double dt) const {
    if (!(dt > 0.0)) return;
    if (layout_.parameters == 0) {
      // Shared dynamics: discretize once for all points.
      const Eigen::VectorXd p = nominal_;
      const Eigen::MatrixXd k = model_.stiffness(p);
      const Eigen::MatrixXd c = model_.damping(p, k);
      if (options_.method == Propagation::kExact) {
        const Discretization d = discretize(k, c, dt);
        for (Eigen::Index i = 0; i < points.cols(); ++i) apply_exact(d, points.col(i), t, dt);
      } else {
        const Newmark nm = newmark(k, c, dt);
        for (Eigen::Index i = 0; i < points.cols(); ++i)
          apply_newmark(nm, k, c, points.col(i), t, dt);
      }
      return;
    }
    for (Eigen::Index i = 0; i < points.cols(); ++i) {
      const Eigen::VectorXd p = parameters_of(points.col(i));
      const Eigen::MatrixXd k = model_.stiffness(p);
      const Eigen::MatrixXd c = model_.damping(p, k);
      if (options_.method == Propagation::kExact)
        apply_exact(discretize(k, c, dt), points.col(i), t, dt);
      else
        apply_newmark(newmark(k, c, dt), k, c, points.col(i), t, dt);
    }
  }

  Eigen::MatrixXd measure(const Eigen::MatrixXd& points, double t,
                          std::span<const int> channels) const {
    const int n = model_.dof_count();
    Eigen::MatrixXd y(static_cast<Eigen::Index>(channels.size()), points.cols());
    bool needs_acc = false;
    for (int c : channels) {
      check_channel(c);
      needs_acc = needs_acc || registry_[c].map.quantity == Quantity::kAcceleration;
    }
    const double ag = ground_acceleration(known_, t);
    Eigen::VectorXd acc;
    for (Eigen::Index i = 0; i < points.cols(); ++i) {
      const auto x = points.col(i);
      if (needs_acc) {
        const Eigen::VectorXd p = parameters_of(x);
        const Eigen::MatrixXd k = model_.stiffness(p);
        const Eigen::MatrixXd c = model_.damping(p, k);
        acc = mass_inv_ * (load_ * excitation(x, t) - c * x.segment(n, n) - k * x.head(n));
      }
      for (std::size_t r = 0; r < channels.size(); ++r) {
        const auto& map = registry_[channels[r]].map;
        double v;
        if (map.quantity == Quantity::kAcceleration) {
          v = acc(map.target);
          if (map.frame == ResponseFrame::kAbsolute) v += model_.ground_influence(map.target) * ag;
        } else {
          v = rows_[channels[r]].dot(x.head(2 * n));
        }
        y(static_cast<Eigen::Index>(r), i) = v;
      }
    }
    return y;
  }

  Eigen::VectorXd noise_variances(std::span<const int> channels) const {
    Eigen::VectorXd r(static_cast<Eigen::Index>(channels.size()));
    for (std::size_t i = 0; i < channels.size(); ++i) {
      check_channel(channels[i]);
      r(static_cast<Eigen::Index>(i)) = registry_[channels[i]].variance;
    }
    return r;
  }

 private:
  struct Discretization {
    Eigen::MatrixXd phi;     // 2n x 2n
    Eigen::MatrixXd gamma0;  // response to w(t)
    Eigen::MatrixXd gamma1;  // response to w(t + dt) - w(t)
  };

  struct Newmark {
    int substeps;
    double h;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  };

  void check_channel(int c) const {
    if (c < 0 || c >= static_cast<int>(registry_.size()))
      throw InvalidArgument("structural filter: unregistered channel index " + std::to_string(c));
  }

  Discretization discretize(const Eigen::MatrixXd& k, const Eigen::MatrixXd& c, double dt) const {
    const int n = model_.dof_count();
    const auto m = static_cast<int>(load_.cols());
    const int sz = 2 * n + 2 * m;
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(sz, sz);
    e.block(0, n, n, n).setIdentity();
    e.block(n, 0, n, n) = -mass_inv_ * k;
    e.block(n, n, n, n) = -mass_inv_ * c;
    e.block(n, 2 * n, n, m) = mass_inv_ * load_;
    e.topLeftCorner(2 * n, 2 * n + m) *= dt;
    e.block(2 * n, 2 * n + m, m, m).setIdentity();
    const Eigen::MatrixXd ex = e.exp();
    if (!ex.allFinite()) throw NumericalError("matrix exponential overflow in time update");
    return {ex.topLeftCorner(2 * n, 2 * n), ex.block(0, 2 * n, 2 * n, m),
            ex.block(0, 2 * n + m, 2 * n, m)};
  }

  void apply_exact(const Discretization& d, Eigen::Ref<Eigen::VectorXd> x, double t,
                   double dt) const {
    const int s = layout_.states;
    const Eigen::VectorXd w0 = excitation(x, t);
    const Eigen::VectorXd w1 = excitation(x, t + dt);
    const Eigen::VectorXd z = d.phi * x.head(s) + d.gamma0 * w0 + d.gamma1 * (w1 - w0);
    x.head(s) = z;
  }

  Newmark newmark(const Eigen::MatrixXd& k, const Eigen::MatrixXd& c, double dt) const {
    const int sub = std::max(1, static_cast<int>(std::ceil(dt / options_.max_substep - 1e-9)));
    const double h = dt / sub;
    Newmark nm{sub, h, {}};
    nm.lu.compute(model_.mass + 0.5 * h * c + 0.25 * h * h * k);
    return nm;
  }

  void apply_newmark(const Newmark& nm, const Eigen::MatrixXd& k, const Eigen::MatrixXd& c,
                     Eigen::Ref<Eigen::VectorXd> x, double t, double dt) const {
    (void)dt;
    const int n = model_.dof_count();
    Eigen::VectorXd u = x.head(n), v = x.segment(n, n);
    Eigen::VectorXd a = mass_inv_ * (load_ * excitation(x, t) - c * v - k * u);
    const double h = nm.h;
    for (int s = 1; s <= nm.substeps; ++s) {
      const Eigen::VectorXd f = load_ * excitation(x, t + s * h);
      const Eigen::VectorXd u_pred = u + h * v + 0.25 * h * h * a;
      const Eigen::VectorXd v_pred = v + 0.5 * h * a;
      a = nm.lu.solve(f - c * v_pred - k * u_pred);
      u = u_pred + 0.25 * h * h * a;
      v = v_pred + 0.5 * h * a;
    }
    if (!u.allFinite() || !v.allFinite())
      throw NumericalError("Newmark propagation produced non-finite state");
    x.head(n) = u;
    x.segment(n, n) = v;
  }

  StructuralModel model_;
  std::vector<int> estimated_;
  std::vector<InputRecord> known_;
  std::vector<int> unknown_dofs_;
  std::vector<RegisteredChannel> registry_;
  PropagationOptions options_;
  Eigen::VectorXd nominal_;
  Eigen::MatrixXd load_;
  Eigen::MatrixXd mass_inv_;
  std::vector<Eigen::RowVectorXd> rows_;
  StateLayout layout_;
};

static_assert(FilterModel<StructuralFilterModel>);

}  // namespace mrfuse
