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
 * @file structural_models.hpp
 * @brief Parameterized linear structural models and response extraction.
 *
 * Every model is reduced to its free (unrestrained) DOFs and written as
 *
 *   M u'' + C(p) u' + K(p) u = f(t),
 *
 * where K(p) is a sum of parameter-scaled element terms and C(p) is a sum of
 * parameter-scaled damper terms plus Rayleigh damping alpha*M + beta*K(p).
 * The mass matrix is never parameterized. Keeping stiffness linear in its
 * parameters makes re-assembly per sigma point a handful of scatter-adds.
 */

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mrfuse/error.hpp"

namespace mrfuse {

enum class ModelKind { kShearFrame, kTruss, kBeam };
enum class ExcitationKind { kGroundMotion, kNodalForce };
enum class ParameterKind { kStiffness, kDamping, kRayleighMass, kRayleighStiffness };

/// Element matrix for a unit parameter value, with the free-DOF index of each
/// local DOF (-1 when restrained).
struct ElementTerm {
  std::vector<int> dofs;
  Eigen::MatrixXd unit;
};

inline void scatter_add(Eigen::MatrixXd& global, const ElementTerm& term, double scale) {
  const auto n = static_cast<Eigen::Index>(term.dofs.size());
  for (Eigen::Index a = 0; a < n; ++a) {
    const int ga = term.dofs[a];
    if (ga < 0) continue;
    for (Eigen::Index b = 0; b < n; ++b) {
      const int gb = term.dofs[b];
      if (gb < 0) continue;
      global(ga, gb) += scale * term.unit(a, b);
    }
  }
}

struct ModelParameter {
  std::string name;
  ParameterKind kind;
  double value;
  std::vector<ElementTerm> terms;  // empty for Rayleigh coefficients
};

struct TrussMember {
  int node_i = 0;
  int node_j = 0;
  double area = 0.0;
  double length = 0.0;
  double cos = 1.0;
  double sin = 0.0;
  std::array<int, 4> dofs{};  // free DOF of (xi, yi, xj, yj), -1 restrained
  std::string group;
};

struct BeamElement {
  double x_start = 0.0;
  double length = 0.0;
  std::array<int, 4> dofs{};  // (w_i, theta_i, w_j, theta_j), -1 restrained
};

struct RayleighCoefficients {
  double alpha = 0.0;  // 1/s
  double beta = 0.0;   // s
};

struct StructuralModel {
  ModelKind kind = ModelKind::kShearFrame;
  ExcitationKind excitation = ExcitationKind::kNodalForce;
  std::vector<std::string> dof_labels;
  Eigen::MatrixXd mass;
  std::vector<ModelParameter> parameters;
  // r in f = -M r a_g for base excitation; zero vector otherwise.
  Eigen::VectorXd ground_influence;
  std::vector<TrussMember> members;
  std::vector<BeamElement> elements;
  double gauge_offset = 0.0;

  int dof_count() const { return static_cast<int>(mass.rows()); }

  Eigen::VectorXd nominal_parameters() const {
    Eigen::VectorXd p(parameters.size());
    for (std::size_t i = 0; i < parameters.size(); ++i) p(i) = parameters[i].value;
    return p;
  }

  int parameter_index(std::string_view name) const {
    for (std::size_t i = 0; i < parameters.size(); ++i)
      if (parameters[i].name == name) return static_cast<int>(i);
    return -1;
  }

  Eigen::MatrixXd stiffness(const Eigen::VectorXd& p) const {
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(dof_count(), dof_count());
    for (std::size_t i = 0; i < parameters.size(); ++i) {
      if (parameters[i].kind != ParameterKind::kStiffness) continue;
      for (const auto& term : parameters[i].terms) scatter_add(k, term, p(i));
    }
    return k;
  }

  Eigen::MatrixXd damping(const Eigen::VectorXd& p, const Eigen::MatrixXd& k) const {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(dof_count(), dof_count());
    for (std::size_t i = 0; i < parameters.size(); ++i) {
      switch (parameters[i].kind) {
        case ParameterKind::kDamping:
          for (const auto& term : parameters[i].terms) scatter_add(c, term, p(i));
          break;
        case ParameterKind::kRayleighMass:
          c += p(i) * mass;
          break;
        case ParameterKind::kRayleighStiffness:
          c += p(i) * k;
          break;
        case ParameterKind::kStiffness:
          break;
      }
    }
    return c;
  }

  Eigen::MatrixXd stiffness() const { return stiffness(nominal_parameters()); }
  Eigen::MatrixXd damping() const {
    const Eigen::VectorXd p = nominal_parameters();
    return damping(p, stiffness(p));
  }
};

// ---------------------------------------------------------------------------
// Modal helpers

/// Undamped natural circular frequencies (rad/s), ascending.
inline Eigen::VectorXd natural_frequencies(const Eigen::MatrixXd& stiffness,
                                           const Eigen::MatrixXd& mass) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(stiffness, mass,
                                                               Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("generalized eigenproblem failed");
  const Eigen::VectorXd lambda = es.eigenvalues();
  const double scale = std::max(lambda.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd omega(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) <= 1e-10 * scale)
      throw NumericalError("stiffness matrix is singular (mechanism or insufficient restraint)");
    omega(i) = std::sqrt(lambda(i));
  }
  return omega;
}

inline Eigen::VectorXd natural_frequencies(const StructuralModel& model) {
  return natural_frequencies(model.stiffness(), model.mass);
}

inline double rayleigh_damping_ratio(const RayleighCoefficients& c, double omega) {
  return c.alpha / (2.0 * omega) + c.beta * omega / 2.0;
}

/// Least-squares fit of xi(w) = alpha/(2w) + beta*w/2 to a constant target ratio.
inline RayleighCoefficients fit_rayleigh(std::span<const double> omegas, double target_ratio) {
  if (omegas.empty()) throw InvalidArgument("fit_rayleigh: no frequencies");
  if (omegas.size() == 1) return {target_ratio * omegas[0], 0.0};
  Eigen::MatrixXd a(omegas.size(), 2);
  Eigen::VectorXd b = Eigen::VectorXd::Constant(omegas.size(), target_ratio);
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    a(i, 0) = 1.0 / (2.0 * omegas[i]);
    a(i, 1) = omegas[i] / 2.0;
  }
  const Eigen::Vector2d x = a.colPivHouseholderQr().solve(b);
  return {x(0), x(1)};
}

// ---------------------------------------------------------------------------
// Shear frame

namespace detail {

inline Eigen::MatrixXd spring_unit() {
  Eigen::MatrixXd u(2, 2);
  u << 1.0, -1.0, -1.0, 1.0;
  return u;
}

inline void require_positive(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!(x > 0.0)) throw InvalidArgument(std::string(what) + " must be strictly positive");
}

}  // namespace detail

/// N-story shear building. Floor i (1-based) is DOF i-1; story i joins floor
/// i-1 (the ground for i = 1) to floor i. Parameters are named k1..kn, c1..cn.
inline StructuralModel build_shear_frame(std::span<const double> masses,
                                         std::span<const double> stiffnesses,
                                         std::span<const double> dampings,
                                         ExcitationKind excitation) {
  const std::size_t n = masses.size();
  if (n == 0) throw InvalidArgument("build_shear_frame: at least one story required");
  if (stiffnesses.size() != n || dampings.size() != n)
    throw InvalidArgument("build_shear_frame: masses, stiffnesses and dampings differ in length");
  detail::require_positive(masses, "floor mass");

  StructuralModel model;
  model.kind = ModelKind::kShearFrame;
  model.excitation = excitation;
  model.mass = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    model.mass(i, i) = masses[i];
    model.dof_labels.push_back("u" + std::to_string(i + 1));
  }
  for (int pass = 0; pass < 2; ++pass) {
    const auto& values = pass == 0 ? stiffnesses : dampings;
    for (std::size_t i = 0; i < n; ++i) {
      ModelParameter p;
      p.name = (pass == 0 ? "k" : "c") + std::to_string(i + 1);
      p.kind = pass == 0 ? ParameterKind::kStiffness : ParameterKind::kDamping;
      p.value = values[i];
      p.terms.push_back({{static_cast<int>(i) - 1, static_cast<int>(i)}, detail::spring_unit()});
      model.parameters.push_back(std::move(p));
    }
  }
  model.ground_influence = excitation == ExcitationKind::kGroundMotion
                               ? Eigen::VectorXd::Ones(n)
                               : Eigen::VectorXd::Zero(n);
  return model;
}

// ---------------------------------------------------------------------------
// Planar truss

struct TrussMemberSpec {
  int node_i = 0;
  int node_j = 0;
  double area = 0.0;  // m^2
  std::string group;
};

struct TrussSpec {
  std::vector<std::array<double, 2>> nodes;
  std::vector<TrussMemberSpec> members;
  std::vector<std::pair<int, int>> restraints;  // (node, 0 = x | 1 = y)
  double elastic_modulus = 200e9;
  double density = 7850.0;
  std::vector<double> added_masses;  // per free DOF; empty means none
  double damping_ratio = 0.02;
  int damping_modes = 9;
  std::optional<RayleighCoefficients> rayleigh;  // overrides the fit when set
};

/// Four-bay Pratt truss, 2 m bays and 2 m height. Nodes: bottom chord B0..B4
/// (0..4), top chord T1..T3 (5..7); pin at B0, roller at B4. Free DOFs are
/// numbered in node order, x before y, giving
///   1,2: B1   3,4: B2   5,6: B3   7: B4x   8,9: T1   10,11: T2   12,13: T3
/// Members (1-based): 1-4 bottom chord, 5-6 top chord, 7-8 end diagonals,
/// 9-10 inner diagonals, 11-13 verticals.
inline TrussSpec pratt_truss_spec(double bay = 2.0, double height = 2.0) {
  TrussSpec s;
  for (int i = 0; i < 5; ++i) s.nodes.push_back({i * bay, 0.0});
  for (int i = 1; i < 4; ++i) s.nodes.push_back({i * bay, height});
  const double top = 80e-6, bottom = 100e-6, diagonal = 90e-6, vertical = 60e-6;
  s.members = {
      {0, 1, bottom, "bottom"},   {1, 2, bottom, "bottom"},     {2, 3, bottom, "bottom"},
      {3, 4, bottom, "bottom"},   {5, 6, top, "top"},           {6, 7, top, "top"},
      {0, 5, diagonal, "diagonal"}, {7, 4, diagonal, "diagonal"}, {5, 2, diagonal, "diagonal"},
      {7, 2, diagonal, "diagonal"}, {1, 5, vertical, "vertical"}, {2, 6, vertical, "vertical"},
      {3, 7, vertical, "vertical"},
  };
  s.restraints = {{0, 0}, {0, 1}, {4, 1}};
  s.added_masses.assign(13, 10.0);
  s.added_masses[6] = 5.0;  // DOF 7
  return s;
}

/// Stiffness of the unrestrained truss (2 DOFs per node, node order, x then y).
inline Eigen::MatrixXd truss_unrestrained_stiffness(const TrussSpec& spec) {
  const int n = static_cast<int>(spec.nodes.size()) * 2;
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (const auto& m : spec.members) {
    const double dx = spec.nodes[m.node_j][0] - spec.nodes[m.node_i][0];
    const double dy = spec.nodes[m.node_j][1] - spec.nodes[m.node_i][1];
    const double len = std::hypot(dx, dy);
    const Eigen::Vector4d d(-dx / len, -dy / len, dx / len, dy / len);
    ElementTerm t{{2 * m.node_i, 2 * m.node_i + 1, 2 * m.node_j, 2 * m.node_j + 1},
                  d * d.transpose() / len};
    scatter_add(k, t, spec.elastic_modulus * m.area);
  }
  return k;
}

/// Lumped-mass planar truss. Parameters EA1..EAn (one per member), alpha, beta.
inline StructuralModel build_truss(const TrussSpec& spec) {
  const int n_nodes = static_cast<int>(spec.nodes.size());
  if (n_nodes < 2 || spec.members.empty()) throw InvalidArgument("build_truss: empty geometry");

  std::vector<int> free_index(2 * n_nodes, 0);
  for (const auto& [node, dir] : spec.restraints) {
    if (node < 0 || node >= n_nodes || dir < 0 || dir > 1)
      throw InvalidArgument("build_truss: restraint refers to an invalid node or direction");
    free_index[2 * node + dir] = -1;
  }
  int n_free = 0;
  StructuralModel model;
  model.kind = ModelKind::kTruss;
  model.excitation = ExcitationKind::kNodalForce;
  for (int g = 0; g < 2 * n_nodes; ++g) {
    if (free_index[g] < 0) continue;
    free_index[g] = n_free++;
    model.dof_labels.push_back("u" + std::to_string(n_free));
  }
  if (n_free == 0) throw InvalidArgument("build_truss: no free DOFs");
  if (!spec.added_masses.empty() && static_cast<int>(spec.added_masses.size()) != n_free)
    throw InvalidArgument("build_truss: added_masses must have one entry per free DOF");

  model.mass = Eigen::MatrixXd::Zero(n_free, n_free);
  for (int i = 0; i < n_free && !spec.added_masses.empty(); ++i)
    model.mass(i, i) = spec.added_masses[i];

  for (std::size_t e = 0; e < spec.members.size(); ++e) {
    const auto& ms = spec.members[e];
    if (ms.node_i < 0 || ms.node_i >= n_nodes || ms.node_j < 0 || ms.node_j >= n_nodes ||
        ms.node_i == ms.node_j)
      throw InvalidArgument("build_truss: member " + std::to_string(e + 1) +
                            " references an invalid node");
    if (!(ms.area > 0.0)) throw InvalidArgument("build_truss: member area must be positive");
    const double dx = spec.nodes[ms.node_j][0] - spec.nodes[ms.node_i][0];
    const double dy = spec.nodes[ms.node_j][1] - spec.nodes[ms.node_i][1];
    TrussMember m;
    m.node_i = ms.node_i;
    m.node_j = ms.node_j;
    m.area = ms.area;
    m.group = ms.group;
    m.length = std::hypot(dx, dy);
    if (!(m.length > 0.0)) throw InvalidArgument("build_truss: zero-length member");
    m.cos = dx / m.length;
    m.sin = dy / m.length;
    m.dofs = {free_index[2 * ms.node_i], free_index[2 * ms.node_i + 1],
              free_index[2 * ms.node_j], free_index[2 * ms.node_j + 1]};

    const Eigen::Vector4d d(-m.cos, -m.sin, m.cos, m.sin);
    ModelParameter p;
    p.name = "EA" + std::to_string(e + 1);
    p.kind = ParameterKind::kStiffness;
    p.value = spec.elastic_modulus * m.area;
    p.terms.push_back({{m.dofs.begin(), m.dofs.end()}, d * d.transpose() / m.length});
    model.parameters.push_back(std::move(p));

    // Half the member mass to each end node, both directions.
    const double half = 0.5 * spec.density * m.area * m.length;
    for (int g : m.dofs)
      if (g >= 0) model.mass(g, g) += half;
    model.members.push_back(std::move(m));
  }
  for (int i = 0; i < n_free; ++i)
    if (!(model.mass(i, i) > 0.0)) throw InvalidArgument("build_truss: free DOF without mass");

  RayleighCoefficients rc;
  if (spec.rayleigh) {
    rc = *spec.rayleigh;
  } else {
    const Eigen::VectorXd omega = natural_frequencies(model.stiffness(), model.mass);
    if (omega.size() < spec.damping_modes)
      throw NumericalError("build_truss: fewer positive eigenvalues than damping_modes");
    rc = fit_rayleigh(std::span<const double>(omega.data(), spec.damping_modes),
                      spec.damping_ratio);
  }
  model.parameters.push_back({"alpha", ParameterKind::kRayleighMass, rc.alpha, {}});
  model.parameters.push_back({"beta", ParameterKind::kRayleighStiffness, rc.beta, {}});
  model.ground_influence = Eigen::VectorXd::Zero(n_free);
  return model;
}

// ---------------------------------------------------------------------------
// Euler-Bernoulli beam

enum class BeamSupport { kCantilever, kSimplySupported };

struct BeamSpec {
  int n_elements = 6;
  double length = 1.2;                 // m, total
  double flexural_rigidity = 117.0;    // N m^2
  double mass_per_length = 2.04;       // kg/m
  BeamSupport support = BeamSupport::kCantilever;
  std::optional<RayleighCoefficients> rayleigh;
  double damping_ratio = 0.01;
  int damping_modes = 2;
  double gauge_offset = 0.0026;  // m, neutral axis to gauge
};

inline Eigen::Matrix4d hermite_beam_stiffness(double length) {
  const double l = length, l2 = l * l;
  Eigen::Matrix4d k;
  k << 12, 6 * l, -12, 6 * l,
       6 * l, 4 * l2, -6 * l, 2 * l2,
       -12, -6 * l, 12, -6 * l,
       6 * l, 2 * l2, -6 * l, 4 * l2;
  return k / (l2 * l);
}

inline Eigen::Matrix4d hermite_beam_mass(double length) {
  const double l = length, l2 = l * l;
  Eigen::Matrix4d m;
  m << 156, 22 * l, 54, -13 * l,
       22 * l, 4 * l2, 13 * l, -3 * l2,
       54, 13 * l, 156, -22 * l,
       -13 * l, -3 * l2, -22 * l, 4 * l2;
  return m * (l / 420.0);
}

/// Uniform Hermitian-cubic beam. Node i carries (w_i, theta_i); DOF labels are
/// u<i> and ut<i> with i counted over nodes that keep at least one DOF.
/// Parameters: EI, alpha, beta.
inline StructuralModel build_beam(const BeamSpec& spec) {
  if (spec.n_elements < 1) throw InvalidArgument("build_beam: n_elements must be >= 1");
  if (!(spec.flexural_rigidity > 0.0)) throw InvalidArgument("build_beam: EI must be positive");
  if (!(spec.length > 0.0)) throw InvalidArgument("build_beam: length must be positive");
  if (!(spec.mass_per_length > 0.0))
    throw InvalidArgument("build_beam: mass_per_length must be positive");

  const int n_nodes = spec.n_elements + 1;
  std::vector<int> free_index(2 * n_nodes, 0);
  if (spec.support == BeamSupport::kCantilever) {
    free_index[0] = free_index[1] = -1;
  } else {
    free_index[0] = -1;
    free_index[2 * (n_nodes - 1)] = -1;
  }

  StructuralModel model;
  model.kind = ModelKind::kBeam;
  model.excitation = ExcitationKind::kNodalForce;
  model.gauge_offset = spec.gauge_offset;
  int n_free = 0;
  for (int g = 0; g < 2 * n_nodes; ++g) {
    if (free_index[g] < 0) continue;
    free_index[g] = n_free++;
    const int node = spec.support == BeamSupport::kCantilever ? g / 2 : g / 2 + 1;
    model.dof_labels.push_back((g % 2 == 0 ? "u" : "ut") + std::to_string(node));
  }

  const double le = spec.length / spec.n_elements;
  model.mass = Eigen::MatrixXd::Zero(n_free, n_free);
  ModelParameter ei{"EI", ParameterKind::kStiffness, spec.flexural_rigidity, {}};
  const Eigen::Matrix4d ke = hermite_beam_stiffness(le);
  const Eigen::Matrix4d me = hermite_beam_mass(le) * spec.mass_per_length;
  for (int e = 0; e < spec.n_elements; ++e) {
    BeamElement el;
    el.x_start = e * le;
    el.length = le;
    el.dofs = {free_index[2 * e], free_index[2 * e + 1], free_index[2 * e + 2],
               free_index[2 * e + 3]};
    ElementTerm term{{el.dofs.begin(), el.dofs.end()}, ke};
    scatter_add(model.mass, ElementTerm{term.dofs, me}, 1.0);
    ei.terms.push_back(std::move(term));
    model.elements.push_back(el);
  }
  model.parameters.push_back(std::move(ei));

  RayleighCoefficients rc;
  if (spec.rayleigh) {
    rc = *spec.rayleigh;
  } else {
    const Eigen::VectorXd omega = natural_frequencies(model.stiffness(), model.mass);
    const int modes = std::min<int>(spec.damping_modes, static_cast<int>(omega.size()));
    rc = fit_rayleigh(std::span<const double>(omega.data(), modes), spec.damping_ratio);
  }
  model.parameters.push_back({"alpha", ParameterKind::kRayleighMass, rc.alpha, {}});
  model.parameters.push_back({"beta", ParameterKind::kRayleighStiffness, rc.beta, {}});
  model.ground_influence = Eigen::VectorXd::Zero(n_free);
  return model;
}

// ---------------------------------------------------------------------------
// Response maps

enum class Quantity { kAcceleration, kDisplacement, kVelocity, kAxialStrain, kBendingStrain };
enum class ResponseFrame { kRelative, kAbsolute };

/// One measured quantity. `target` is a 0-based free DOF for kinematic
/// quantities, a member index for axial strain and an element index for
/// bending strain; `position` is the intra-element coordinate in [0, 1].
struct ResponseMap {
  Quantity quantity = Quantity::kDisplacement;
  int target = 0;
  double position = 0.5;
  ResponseFrame frame = ResponseFrame::kRelative;
};

inline void validate_response_map(const StructuralModel& model, const ResponseMap& map) {
  switch (map.quantity) {
    case Quantity::kAcceleration:
    case Quantity::kDisplacement:
    case Quantity::kVelocity:
      if (map.target < 0 || map.target >= model.dof_count())
        throw InvalidArgument("response map: DOF index out of range");
      break;
    case Quantity::kAxialStrain:
      if (model.kind != ModelKind::kTruss)
        throw InvalidArgument("response map: axial strain requires a truss model");
      if (map.target < 0 || map.target >= static_cast<int>(model.members.size()))
        throw InvalidArgument("response map: member index out of range");
      break;
    case Quantity::kBendingStrain:
      if (model.kind != ModelKind::kBeam)
        throw InvalidArgument("response map: bending strain requires a beam model");
      if (map.target < 0 || map.target >= static_cast<int>(model.elements.size()))
        throw InvalidArgument("response map: element index out of range");
      if (map.position < 0.0 || map.position > 1.0)
        throw InvalidArgument("response map: position must lie in [0, 1]");
      break;
  }
}

/// Row r such that the response equals r * [u; u'] for every quantity except
/// acceleration, which depends on the parameters and the load.
inline Eigen::RowVectorXd kinematic_row(const StructuralModel& model, const ResponseMap& map) {
  validate_response_map(model, map);
  const int n = model.dof_count();
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(2 * n);
  switch (map.quantity) {
    case Quantity::kDisplacement:
      row(map.target) = 1.0;
      break;
    case Quantity::kVelocity:
      row(n + map.target) = 1.0;
      break;
    case Quantity::kAxialStrain: {
      const auto& m = model.members[map.target];
      const std::array<double, 4> d{-m.cos, -m.sin, m.cos, m.sin};
      for (int a = 0; a < 4; ++a)
        if (m.dofs[a] >= 0) row(m.dofs[a]) += d[a] / m.length;
      break;
    }
    case Quantity::kBendingStrain: {
      const auto& el = model.elements[map.target];
      const double l = el.length, xi = map.position;
      // Second derivatives of the Hermitian shape functions w.r.t. x.
      const std::array<double, 4> b{(-6.0 + 12.0 * xi) / (l * l), (-4.0 + 6.0 * xi) / l,
                                    (6.0 - 12.0 * xi) / (l * l), (-2.0 + 6.0 * xi) / l};
      for (int a = 0; a < 4; ++a)
        if (el.dofs[a] >= 0) row(el.dofs[a]) += -model.gauge_offset * b[a];
      break;
    }
    case Quantity::kAcceleration:
      throw InvalidArgument("kinematic_row: acceleration is not a kinematic quantity");
  }
  return row;
}

/// Relative accelerations M^-1 (f - C u' - K u).
inline Eigen::VectorXd relative_acceleration(const StructuralModel& model,
                                             const Eigen::VectorXd& state,
                                             const Eigen::VectorXd& parameters,
                                             const Eigen::VectorXd& force) {
  const int n = model.dof_count();
  const Eigen::MatrixXd k = model.stiffness(parameters);
  const Eigen::MatrixXd c = model.damping(parameters, k);
  const Eigen::VectorXd rhs = force - c * state.tail(n) - k * state.head(n);
  return model.mass.llt().solve(rhs);
}

/// Evaluates one response map. `state` is [u; u'] over the free DOFs, `force`
/// the nodal load vector at the evaluation time and `ground_acceleration` the
/// base acceleration (added to absolute-frame accelerations).
inline double evaluate_response_map(const StructuralModel& model, const ResponseMap& map,
                                    const Eigen::VectorXd& state,
                                    const Eigen::VectorXd& parameters,
                                    const Eigen::VectorXd& force,
                                    double ground_acceleration = 0.0) {
  const int n = model.dof_count();
  if (state.size() != 2 * n)
    throw InvalidArgument("evaluate_response_map: state must hold displacements and velocities");
  if (map.quantity != Quantity::kAcceleration) return kinematic_row(model, map).dot(state);
  validate_response_map(model, map);
  if (force.size() != n) throw InvalidArgument("evaluate_response_map: force size mismatch");
  double a = relative_acceleration(model, state, parameters, force)(map.target);
  if (map.frame == ResponseFrame::kAbsolute)
    a += model.ground_influence(map.target) * ground_acceleration;
  return a;
}

/// Strain maps for every member (truss) or every element midpoint (beam).
inline std::vector<ResponseMap> strain_maps(const StructuralModel& model) {
  std::vector<ResponseMap> maps;
  if (model.kind == ModelKind::kTruss) {
    for (std::size_t e = 0; e < model.members.size(); ++e)
      maps.push_back({Quantity::kAxialStrain, static_cast<int>(e), 0.5, ResponseFrame::kRelative});
  } else if (model.kind == ModelKind::kBeam) {
    for (std::size_t e = 0; e < model.elements.size(); ++e)
      maps.push_back(
          {Quantity::kBendingStrain, static_cast<int>(e), 0.5, ResponseFrame::kRelative});
  } else {
    throw InvalidArgument("strain_maps: model has no strain-capable elements");
  }
  return maps;
}

}  // namespace mrfuse
