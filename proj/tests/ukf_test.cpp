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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "mrfuse/structural_filter.hpp"
#include "mrfuse/ukf.hpp"
#include "test_support.hpp"

namespace mrfuse {
namespace {

using testing::relative_difference;

// ---------------------------------------------------------------------------
// Sigma points

TEST(SigmaPoints, IdentityCovariance) {
  const SigmaPointSet s = generate_sigma_points(Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity());
  ASSERT_EQ(s.points.cols(), 5);
  const double r3 = std::sqrt(3.0);
  EXPECT_TRUE(s.points.col(0).isZero(0.0));
  EXPECT_TRUE(s.points.col(1).isApprox(Eigen::Vector2d(r3, 0)));
  EXPECT_TRUE(s.points.col(2).isApprox(Eigen::Vector2d(0, r3)));
  EXPECT_TRUE(s.points.col(3).isApprox(Eigen::Vector2d(-r3, 0)));
  EXPECT_TRUE(s.points.col(4).isApprox(Eigen::Vector2d(0, -r3)));
  EXPECT_DOUBLE_EQ(s.mean_weights(0), 1.0 / 3.0);
  for (int i = 1; i < 5; ++i) EXPECT_DOUBLE_EQ(s.mean_weights(i), 1.0 / 6.0);
}

TEST(SigmaPoints, DiagonalCovarianceOffsets) {
  const Eigen::Vector2d mean(1.0, -2.0);
  const SigmaPointSet s =
      generate_sigma_points(mean, Eigen::Vector2d(4.0, 9.0).asDiagonal().toDenseMatrix());
  EXPECT_NEAR(s.points(0, 1) - mean(0), std::sqrt(12.0), 1e-14);
  EXPECT_NEAR(s.points(1, 2) - mean(1), std::sqrt(27.0), 1e-14);
  EXPECT_NEAR(s.points(1, 1), mean(1), 0.0);
}

TEST(SigmaPoints, ReconstructMeanAndCovariance) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int n : {1, 2, 5, 12, 28}) {
    for (double eta : {0.5, 1.0, 3.0}) {
      Eigen::VectorXd mean(n);
      for (int i = 0; i < n; ++i) mean(i) = 10.0 * g(rng);
      const Eigen::MatrixXd p = testing::random_spd(n, rng);
      const SigmaPointSet s = generate_sigma_points(mean, p, {eta, 0.0});
      EXPECT_EQ(s.points.cols(), 2 * n + 1);
      EXPECT_NEAR(s.mean_weights.sum(), 1.0, 1e-14);
      EXPECT_LT((s.weighted_mean() - mean).norm(), 1e-12 * std::max(1.0, mean.norm()));
      EXPECT_LT(relative_difference(s.weighted_covariance(mean), p), 1e-10);
    }
  }
}

TEST(SigmaPoints, CorrectionTermOnlyTouchesCentralCovarianceWeight) {
  const SigmaPointSet s = generate_sigma_points(Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity(),
                                                {1.0, 2.0});
  EXPECT_DOUBLE_EQ(s.cov_weights(0), s.mean_weights(0) + 2.0);
  for (int i = 1; i < 7; ++i) EXPECT_DOUBLE_EQ(s.cov_weights(i), s.mean_weights(i));
}

TEST(SigmaPoints, Errors) {
  Eigen::Matrix2d indefinite;
  indefinite << 1.0, 0.0, 0.0, -1.0;
  EXPECT_THROW(generate_sigma_points(Eigen::Vector2d::Zero(), indefinite), NumericalError);
  EXPECT_THROW(generate_sigma_points(Eigen::Vector3d::Zero(), Eigen::Matrix2d::Identity()),
               InvalidArgument);
  EXPECT_THROW(generate_sigma_points(Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity(), {-3.0, 0.0}),
               InvalidArgument);
}

// ---------------------------------------------------------------------------
// Linear oracle

struct LinearProblem {
  testing::LinearModel model;
  MeasurementTimeline timeline;
  AugmentedState initial;
  FilterConfig config;
};

LinearProblem random_linear_problem(std::uint64_t seed, double eta = 1.0, double correction = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const int n = 4;
  LinearProblem lp;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = 0.5 * g(rng);
  lp.model.a = a - 1.0 * Eigen::MatrixXd::Identity(n, n);
  lp.model.h.resize(3, n);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < n; ++j) lp.model.h(i, j) = g(rng);
  lp.model.r = Eigen::Vector3d(0.1, 0.5, 0.02);

  std::vector<ChannelSignal> ch{
      testing::sampled("fast", 100.0, 2.0, [&](double) { return g(rng); }),
      testing::sampled("mid", 30.0, 2.0, [&](double) { return g(rng); }),
      testing::sampled("slow", 7.0, 2.0, [&](double) { return g(rng); })};
  lp.timeline = merge_timelines(ch);

  lp.initial.mean = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) lp.initial.mean(i) = g(rng);
  lp.initial.covariance = testing::random_spd(n, rng);
  lp.initial.layout.states = n;
  lp.config.sigma = {eta, correction};
  lp.config.process_noise = Eigen::VectorXd::Constant(n, 1e-3);
  return lp;
}

TEST(LinearOracle, UkfMatchesKalmanEveryStep) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (auto [eta, corr] : {std::pair{1.0, 0.0}, std::pair{2.0, 0.0}, std::pair{1.0, 2.0}}) {
      const LinearProblem lp = random_linear_problem(seed, eta, corr);
      std::vector<Eigen::MatrixXd> covs;
      const EstimateTrace tr = run_filter(lp.model, lp.timeline, lp.config, lp.initial, 0.0,
                                          [&](std::size_t, const AugmentedState& s) { covs.push_back(s.covariance); });
      const auto ref = testing::kalman_reference(
          lp.timeline, [&](double dt) { return lp.model.transition(dt); }, lp.model.h, lp.model.r,
          lp.config.process_noise, lp.initial.mean, lp.initial.covariance);
      ASSERT_EQ(ref.size(), tr.size());
      for (std::size_t k = 0; k < ref.size(); ++k) {
        const Eigen::VectorXd mean = tr.means.row(static_cast<Eigen::Index>(k)).transpose();
        ASSERT_LT(relative_difference(mean, ref[k].mean), 1e-8) << "event " << k;
        ASSERT_LT(relative_difference(covs[k], ref[k].covariance), 1e-8) << "event " << k;
      }
    }
  }
}

TEST(LinearOracle, MeasurementSizesFollowActiveChannels) {
  const LinearProblem lp = random_linear_problem(4);
  const EstimateTrace tr = run_filter(lp.model, lp.timeline, lp.config, lp.initial);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    EXPECT_EQ(tr.innovations[k].size(), static_cast<Eigen::Index>(lp.timeline.events[k].channels.size()));
    EXPECT_EQ(tr.innovation_variances[k].size(), tr.innovations[k].size());
  }
}

TEST(LinearOracle, UninformativeMeasurementKeepsPrior) {
  LinearProblem lp = random_linear_problem(5);
  lp.model.r = Eigen::Vector3d::Constant(1e30);
  const MeasurementEvent& ev = lp.timeline.events[0];
  const auto upd = measurement_update(lp.initial, ev, lp.model, lp.config);
  EXPECT_LT(relative_difference(upd.posterior.mean, lp.initial.mean), 1e-6);
  EXPECT_LT(relative_difference(upd.posterior.covariance, lp.initial.covariance), 1e-6);
}

TEST(TimeUpdate, ZeroStepIsIdentityAndNegativeRejected) {
  const LinearProblem lp = random_linear_problem(6);
  const AugmentedState same = time_update(lp.initial, 0.0, 0.0, lp.config, lp.model);
  EXPECT_EQ(same.mean, lp.initial.mean);
  EXPECT_EQ(same.covariance, lp.initial.covariance);
  EXPECT_THROW(time_update(lp.initial, 0.0, -1.0, lp.config, lp.model), InvalidArgument);
}

// ---------------------------------------------------------------------------
// Structural filter model

StructuralModel two_story() {
  const std::vector<double> m{10, 10}, k{1e4, 1e4}, c{32, 32};
  return build_shear_frame(m, k, c, ExcitationKind::kGroundMotion);
}

TEST(StructuralFilter, KnownParametersMatchKalmanOracle) {
  const StructuralModel model = two_story();
  const std::vector<RegisteredChannel> reg{{"acc1", {Quantity::kAcceleration, 0}, 0.04},
                                           {"disp2", {Quantity::kDisplacement, 1}, 1e-6}};
  const StructuralFilterModel fm(model, {}, {}, {}, reg);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::vector<ChannelSignal> ch{
      testing::sampled("acc1", 500.0, 1.0, [&](double) { return 0.2 * g(rng); }),
      testing::sampled("disp2", 30.0, 1.0, [&](double) { return 1e-3 * g(rng); })};
  const MeasurementTimeline tl = merge_timelines(ch);

  AugmentedState init;
  init.layout = fm.layout();
  init.mean = Eigen::Vector4d(0.01, -0.02, 0.1, 0.3);
  init.covariance = Eigen::Vector4d(1e-4, 1e-4, 1e-2, 1e-2).asDiagonal();
  FilterConfig cfg;
  cfg.process_noise = Eigen::Vector4d(1e-10, 1e-10, 1e-8, 1e-8);
  std::vector<Eigen::MatrixXd> covs;
  const EstimateTrace tr = run_filter(fm, tl, cfg, init, 0.0,
                                      [&](std::size_t, const AugmentedState& s) { covs.push_back(s.covariance); });

  // Oracle matrices assembled by hand.
  Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
  Eigen::Matrix2d k, c;
  k << 2e4, -1e4, -1e4, 1e4;
  c << 64, -32, -32, 32;
  a.topRightCorner(2, 2).setIdentity();
  a.bottomLeftCorner(2, 2) = -k / 10.0;
  a.bottomRightCorner(2, 2) = -c / 10.0;
  Eigen::MatrixXd h(2, 4);
  h.row(0) = a.row(2);
  h.row(1) << 0, 1, 0, 0;
  const auto ref = testing::kalman_reference(
      tl, [&](double dt) { return testing::taylor_expm(a * dt); }, h, Eigen::Vector2d(0.04, 1e-6),
      cfg.process_noise, init.mean, init.covariance);
  for (std::size_t e = 0; e < ref.size(); ++e) {
    const Eigen::VectorXd mean = tr.means.row(static_cast<Eigen::Index>(e)).transpose();
    ASSERT_LT(relative_difference(mean, ref[e].mean), 1e-8) << "event " << e;
    ASSERT_LT(relative_difference(covs[e], ref[e].covariance), 1e-8) << "event " << e;
  }
}

TEST(StructuralFilter, ExactPropagationMatchesFineSimulation) {
  const StructuralModel model = two_story();
  const InputRecord eq = synthetic_ground_motion(2.0, 100.0, 3.0, 3);
  const ResponseHistory h = simulate_true_response(model, {eq}, 1e-5, 2.0);
  const StructuralFilterModel fm(model, {}, {eq}, {}, {});
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 1);
  double t = 0.0;
  for (int k = 0; k < 400; ++k) {  // steps end on every input breakpoint
    fm.propagate(x, t, 0.005);
    t += 0.005;
  }
  const Eigen::VectorXd truth = h.state_at(t);
  EXPECT_LT(relative_difference(x.col(0), truth), 1e-4);
}

TEST(StructuralFilter, ContinuityForSmallSteps) {
  const StructuralModel model = two_story();
  const StructuralFilterModel fm(model, {}, {}, {}, {});
  auto moved = [&](double dt) {
    Eigen::MatrixXd x(4, 1);
    x << 0.01, 0.0, 0.0, 0.0;
    fm.propagate(x, 0.0, dt);
    return std::abs(x(0, 0) - 0.01);
  };
  const double d3 = moved(1e-3), d4 = moved(1e-4);
  // Starting at rest the displacement changes as a * dt^2 / 2.
  EXPECT_NEAR(d4, 0.5 * 2e3 * 0.01 * 1e-8, 1e-3 * d4);
  EXPECT_NEAR(d3 / d4, 100.0, 1.0);
}

TEST(StructuralFilter, SemigroupOfSteps) {
  const StructuralModel model = two_story();
  for (auto method : {Propagation::kExact, Propagation::kNewmark}) {
    const StructuralFilterModel fm(model, {0, 1, 2, 3}, {}, {}, {}, {method, 1e-4});
    Eigen::MatrixXd one(8, 1), two(8, 1);
    one << 0.01, -0.005, 0.2, 0.1, 1.1e4, 0.9e4, 30, 35;
    two = one;
    fm.propagate(one, 0.0, 0.0137);
    fm.propagate(two, 0.0, 0.006);
    fm.propagate(two, 0.006, 0.0077);
    const double tol = method == Propagation::kExact ? 1e-10 : 1e-3;
    EXPECT_LT(relative_difference(one.topRows(4), two.topRows(4)), tol);
    EXPECT_EQ(one.bottomRows(4), two.bottomRows(4));  // parameters do not drift
  }
}

TEST(StructuralFilter, ParametersPerSigmaPoint) {
  const StructuralModel model = two_story();
  const std::vector<RegisteredChannel> reg{{"acc1", {Quantity::kAcceleration, 0}, 1.0}};
  const StructuralFilterModel fm(model, {0}, {}, {}, reg);
  Eigen::MatrixXd pts(5, 2);
  pts.col(0) << 0.01, 0.0, 0.0, 0.0, 1e4;
  pts.col(1) << 0.01, 0.0, 0.0, 0.0, 2e4;
  const int ch = 0;
  const Eigen::MatrixXd y = fm.measure(pts, 0.0, std::span<const int>(&ch, 1));
  // Only story 1 stiffness changes: a1 = -(k1 + k2) u1 / m.
  EXPECT_NEAR(y(0, 0), -(1e4 + 1e4) * 0.01 / 10.0, 1e-12);
  EXPECT_NEAR(y(0, 1), -(2e4 + 1e4) * 0.01 / 10.0, 1e-12);
}

TEST(StructuralFilter, PerfectInformationTracksTruth) {
  const StructuralModel model = two_story();
  const InputRecord eq = synthetic_ground_motion(5.0, 100.0, 3.417, 7);
  const ResponseHistory h = simulate_true_response(model, {eq}, 1e-4, 5.0);
  std::vector<RegisteredChannel> reg;
  std::vector<ChannelSignal> signals;
  const std::vector<std::pair<Quantity, int>> maps{{Quantity::kDisplacement, 0}, {Quantity::kDisplacement, 1},
                                                   {Quantity::kVelocity, 0}, {Quantity::kVelocity, 1}};
  for (const auto& [q, d] : maps) {
    const SensorChannel sc{"c" + std::to_string(reg.size()), {q, d}, 500.0, 0.0};
    ChannelSignal s = downsample(sample_response(model, h, sc), 500.0);
    reg.push_back({sc.id, sc.map, 1e-12 * std::pow(rms(s.values), 2)});
    signals.push_back(std::move(s));
  }
  const StructuralFilterModel fm(model, {}, {eq}, {}, reg);
  AugmentedState init;
  init.layout = fm.layout();
  init.mean = Eigen::VectorXd::Zero(4);
  init.covariance = 1e-16 * Eigen::MatrixXd::Identity(4, 4);
  FilterConfig cfg;
  cfg.process_noise = Eigen::VectorXd::Zero(4);
  const EstimateTrace tr = run_filter(fm, merge_timelines(signals), cfg, init);
  for (int i = 0; i < 4; ++i) {
    double num = 0.0, den = 0.0;
    for (std::size_t e = 0; e < tr.size(); ++e) {
      const double truth = h.state_at(tr.times[e])(i);
      num += std::pow(tr.means(static_cast<Eigen::Index>(e), i) - truth, 2);
      den += truth * truth;
    }
    EXPECT_LT(100.0 * std::sqrt(num / den), 0.1) << "state " << i;
  }
}

// A short joint state-parameter problem on the frame.
struct FrameProblem {
  StructuralModel model;
  std::vector<ChannelSignal> signals;
  std::vector<RegisteredChannel> registry;
  InputRecord eq;
  AugmentedState initial;
  FilterConfig config;
};

FrameProblem frame_problem(double duration) {
  FrameProblem fp;
  fp.model = two_story();
  fp.eq = synthetic_ground_motion(duration, 100.0, 3.417, 7);
  const ResponseHistory h = simulate_true_response(fp.model, {fp.eq}, 1e-4, duration);
  const SensorChannel acc{"acc1", {Quantity::kAcceleration, 0, 0.5, ResponseFrame::kAbsolute}, 500.0, 0.1};
  const SensorChannel disp{"disp2", {Quantity::kDisplacement, 1}, 50.0, 0.1};
  const SensorChannel vel{"vel1", {Quantity::kVelocity, 0}, 100.0, 0.1};
  std::uint64_t seed = 1;
  for (const auto& sc : {acc, disp, vel}) {
    ChannelSignal s = add_noise(downsample(sample_response(fp.model, h, sc), sc.sample_rate), 0.1, seed++);
    fp.registry.push_back({sc.id, sc.map, s.noise_variance});
    fp.signals.push_back(std::move(s));
  }
  fp.initial.mean = Eigen::VectorXd::Zero(8);
  fp.initial.covariance = Eigen::MatrixXd::Zero(8, 8);
  fp.config.process_noise = Eigen::VectorXd::Zero(8);
  const Eigen::VectorXd p = fp.model.nominal_parameters();
  for (int i = 0; i < 4; ++i) {
    fp.initial.covariance(i, i) = 1e-10;
    fp.config.process_noise(i) = 1e-16;
    fp.initial.mean(4 + i) = 1.3 * p(i);
    fp.initial.covariance(4 + i, 4 + i) = std::pow(0.5 * 1.3 * p(i), 2);
    fp.config.process_noise(4 + i) = std::pow(1e-8 * 1.3 * p(i), 2);
    fp.config.constraints.push_back({4 + i, 0.0, std::numeric_limits<double>::infinity()});
  }
  fp.config.constrained_gain = true;
  return fp;
}

TEST(Properties, CovarianceSymmetricAndPsdEveryStep) {
  FrameProblem fp = frame_problem(3.0);
  const StructuralFilterModel fm(fp.model, {0, 1, 2, 3}, {fp.eq}, {}, fp.registry);
  fp.initial.layout = fm.layout();
  std::size_t checked = 0;
  run_filter(fm, merge_timelines(fp.signals), fp.config, fp.initial, 0.0,
             [&](std::size_t k, const AugmentedState& s) {
               const Eigen::MatrixXd& p = s.covariance;
               ASSERT_LE((p - p.transpose()).cwiseAbs().maxCoeff(), 1e-12 * p.cwiseAbs().maxCoeff())
                   << "event " << k;
               const Eigen::VectorXd d = p.diagonal().cwiseSqrt().cwiseInverse();
               const Eigen::MatrixXd corr = d.asDiagonal() * p * d.asDiagonal();
               ASSERT_GE(smallest_eigenvalue(corr), -1e-9) << "event " << k;
               ++checked;
             });
  EXPECT_EQ(checked, merge_timelines(fp.signals).events.size());
}

TEST(Properties, ChannelPermutationInvariance) {
  FrameProblem fp = frame_problem(1.0);
  const std::vector<int> perm{2, 0, 1};
  std::vector<RegisteredChannel> reg_p;
  std::vector<ChannelSignal> sig_p;
  for (int i : perm) {
    reg_p.push_back(fp.registry[i]);
    sig_p.push_back(fp.signals[i]);
  }
  const StructuralFilterModel fm(fp.model, {0, 1, 2, 3}, {fp.eq}, {}, fp.registry);
  const StructuralFilterModel fm_p(fp.model, {0, 1, 2, 3}, {fp.eq}, {}, reg_p);
  fp.initial.layout = fm.layout();
  const MeasurementTimeline tl = merge_timelines(fp.signals);
  const MeasurementTimeline tl_p = merge_timelines(sig_p);
  ASSERT_EQ(tl.events.size(), tl_p.events.size());

  // Single updates from identical priors: rows permute, posterior must not.
  std::size_t full = 0;
  while (tl.events[full].channels.size() < 3) ++full;
  ASSERT_EQ(tl_p.events[full].channels.size(), 3u);
  const auto a = measurement_update(fp.initial, tl.events[full], fm, fp.config);
  const auto b = measurement_update(fp.initial, tl_p.events[full], fm_p, fp.config);
  EXPECT_LT(relative_difference(a.posterior.mean, b.posterior.mean), 1e-12);
  EXPECT_LT(relative_difference(a.posterior.covariance, b.posterior.covariance), 1e-12);

  const EstimateTrace ta = run_filter(fm, tl, fp.config, fp.initial);
  const EstimateTrace tb = run_filter(fm_p, tl_p, fp.config, fp.initial);
  EXPECT_LT(relative_difference(ta.means, tb.means), 1e-10);
}

TEST(RunFilter, ReportsFailingEvent) {
  struct Exploding : testing::LinearModel {
    Eigen::MatrixXd measure(const Eigen::MatrixXd& pts, double t, std::span<const int> ch) const {
      Eigen::MatrixXd y = testing::LinearModel::measure(pts, t, ch);
      if (t > 0.1) y.setConstant(std::numeric_limits<double>::quiet_NaN());
      return y;
    }
  };
  LinearProblem lp = random_linear_problem(9);
  Exploding m;
  m.a = lp.model.a;
  m.h = lp.model.h;
  m.r = lp.model.r;
  try {
    run_filter(m, lp.timeline, lp.config, lp.initial);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_GT(e.event(), 0);
    EXPECT_GT(lp.timeline.events[static_cast<std::size_t>(e.event())].time, 0.1);
  }
  EXPECT_THROW(run_filter(lp.model, MeasurementTimeline{}, lp.config, lp.initial), InvalidArgument);
  EXPECT_THROW(run_filter(lp.model, lp.timeline, lp.config, lp.initial, 1.0), InvalidArgument);
}

// ---------------------------------------------------------------------------
// Constrained gain

double posterior_trace(const Eigen::MatrixXd& p, const Eigen::MatrixXd& c, const Eigen::MatrixXd& s,
                       const Eigen::MatrixXd& k) {
  return (p - k * c.transpose() - c * k.transpose() + k * s * k.transpose()).trace();
}

TEST(Cgukf, UnconstrainedEqualsKalmanGain) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd s = testing::random_spd(3, rng);
  Eigen::MatrixXd c = testing::random_spd(5, rng).leftCols(3);
  const Eigen::MatrixXd k = cgukf_gain(c, s, Eigen::VectorXd::Zero(5), Eigen::Vector3d(1, 2, 3), {});
  EXPECT_LT(relative_difference(k, c * s.inverse()), 1e-12);
}

TEST(Cgukf, FeasibleUpdateUnchanged) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd s = testing::random_spd(2, rng);
  const Eigen::MatrixXd c = testing::random_spd(2, rng);
  const Eigen::Vector2d mean(100.0, 100.0), nu(0.1, -0.2);
  const std::vector<Bound> b{{0, 0.0, INFINITY}, {1, 0.0, INFINITY}};
  const Eigen::MatrixXd free = cgukf_gain(c, s, mean, nu, {});
  EXPECT_EQ(cgukf_gain(c, s, mean, nu, b), free);
}

// Exhaustive active-set solution of the gain QP on a 2-entry state with two
// measurements. The four gain entries are solved jointly through the KKT
// system of every subset of bounds held as equalities; the cheapest feasible
// candidate with correctly signed multipliers wins.
Eigen::Matrix2d enumerate_gain(const Eigen::Matrix2d& p, const Eigen::Matrix2d& c, const Eigen::Matrix2d& s,
                               const Eigen::Vector2d& mean, const Eigen::Vector2d& nu,
                               const std::vector<Bound>& bounds) {
  // Unknown z = [K(0,0), K(0,1), K(1,0), K(1,1)]; objective z' H z - 2 g' z.
  Eigen::Matrix4d h = Eigen::Matrix4d::Zero();
  h.topLeftCorner(2, 2) = s;
  h.bottomRightCorner(2, 2) = s;
  Eigen::Vector4d g;
  g << c(0, 0), c(0, 1), c(1, 0), c(1, 1);
  // Each finite bound becomes sign * (mean_i + row_i . nu) >= sign * limit.
  struct Row {
    Eigen::Vector4d a;
    double b;
  };
  std::vector<Row> rows;
  for (const auto& bd : bounds) {
    Eigen::Vector4d a = Eigen::Vector4d::Zero();
    a.segment<2>(2 * bd.index) = nu;
    if (std::isfinite(bd.lower)) rows.push_back({a, bd.lower - mean(bd.index)});
    if (std::isfinite(bd.upper)) rows.push_back({-a, mean(bd.index) - bd.upper});
  }
  double best = INFINITY;
  Eigen::Matrix2d best_k = Eigen::Matrix2d::Constant(NAN);
  for (unsigned mask = 0; mask < (1u << rows.size()); ++mask) {
    std::vector<int> act;
    for (std::size_t r = 0; r < rows.size(); ++r)
      if (mask & (1u << r)) act.push_back(static_cast<int>(r));
    const int m = static_cast<int>(act.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(4 + m, 4 + m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(4 + m);
    kkt.topLeftCorner(4, 4) = 2.0 * h;
    rhs.head(4) = 2.0 * g;
    for (int i = 0; i < m; ++i) {
      kkt.block(0, 4 + i, 4, 1) = -rows[act[i]].a;
      kkt.block(4 + i, 0, 1, 4) = rows[act[i]].a.transpose();
      rhs(4 + i) = rows[act[i]].b;
    }
    const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
    const Eigen::Vector4d z = sol.head(4);
    bool ok = (sol.tail(m).array() >= -1e-12).all();
    for (const auto& r : rows) ok = ok && r.a.dot(z) >= r.b - 1e-12;
    if (!ok) continue;
    Eigen::Matrix2d k;
    k << z(0), z(1), z(2), z(3);
    const double tr = posterior_trace(p, c, s, k);
    if (tr < best) best = tr, best_k = k;
  }
  return best_k;
}

TEST(Cgukf, MatchesEnumeratedQuadraticProgram) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  int lower_active = 0, upper_active = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Matrix2d p = testing::random_spd(2, rng, 0.5);
    const Eigen::Matrix2d s = testing::random_spd(2, rng, 0.5);
    Eigen::Matrix2d c;
    c << g(rng), g(rng), g(rng), g(rng);
    const Eigen::Vector2d nu(g(rng), g(rng));
    const Eigen::Matrix2d k_free = c * s.inverse();
    const Eigen::Vector2d step = k_free * nu;
    // Entry 0 sits above a lower bound of 0 and entry 1 below an upper bound
    // of 1; the random offsets make each bound bind in roughly half the trials.
    const Eigen::Vector2d mean(std::abs(step(0)) * (0.5 + 0.5 * g(rng)), 1.0 - std::abs(step(1)) * (0.5 + 0.5 * g(rng)));
    const std::vector<Bound> bounds{{0, 0.0, INFINITY}, {1, -INFINITY, 1.0}};
    const Eigen::MatrixXd k = cgukf_gain(c, s, mean, nu, bounds);
    const Eigen::Vector2d x = mean + k * nu;
    const Eigen::Vector2d x_free = mean + step;
    if (x_free(0) < 0.0 && mean(0) >= 0.0) {
      ++lower_active;
      EXPECT_NEAR(x(0), 0.0, 1e-12);
    }
    if (x_free(1) > 1.0 && mean(1) <= 1.0) {
      ++upper_active;
      EXPECT_NEAR(x(1), 1.0, 1e-12);
    }
    EXPECT_GE(posterior_trace(p, c, s, k), posterior_trace(p, c, s, k_free) - 1e-12);
    if (mean(0) < 0.0 || mean(1) > 1.0) continue;  // oracle needs a feasible prior
    const Eigen::Matrix2d oracle = enumerate_gain(p, c, s, mean, nu, bounds);
    EXPECT_LT((k - oracle).cwiseAbs().maxCoeff(), 1e-9 * (1.0 + oracle.cwiseAbs().maxCoeff()))
        << "trial " << trial;
  }
  EXPECT_GE(lower_active, 5);
  EXPECT_GE(upper_active, 5);
}

TEST(Cgukf, UnreachableBoundsRaise) {
  const Eigen::Matrix2d s = Eigen::Matrix2d::Identity(), c = Eigen::Matrix2d::Identity();
  const std::vector<Bound> b{{0, 0.0, INFINITY}};
  EXPECT_THROW(cgukf_gain(c, s, Eigen::Vector2d(-1.0, 0.0), Eigen::Vector2d::Zero(), b), NumericalError);
}

TEST(Cgukf, UpdateClampsAndRaisesTrace) {
  // One scalar measurement of x0 + x1 that drags x0 negative.
  testing::LinearModel m;
  m.a = Eigen::Matrix2d::Zero();
  m.h = Eigen::RowVector2d(1.0, 1.0);
  m.r = Eigen::VectorXd::Constant(1, 0.1);
  AugmentedState prior;
  prior.mean = Eigen::Vector2d(0.2, 1.0);
  prior.covariance = Eigen::Vector2d(1.0, 0.5).asDiagonal();
  prior.layout.states = 2;
  MeasurementEvent ev;
  ev.channels = {0};
  ev.values = Eigen::VectorXd::Constant(1, -3.0);
  FilterConfig ukf;
  ukf.process_noise = Eigen::Vector2d::Zero();
  FilterConfig cg = ukf;
  cg.constraints = {{0, 0.0, INFINITY}};
  cg.constrained_gain = true;
  const auto free = measurement_update(prior, ev, m, ukf);
  const auto con = measurement_update(prior, ev, m, cg);
  ASSERT_LT(free.posterior.mean(0), 0.0);
  EXPECT_EQ(con.posterior.mean(0), 0.0);
  EXPECT_GE(con.posterior.covariance.trace(), free.posterior.covariance.trace());
  // Without bounds the constrained path is the plain update.
  FilterConfig cg_none = ukf;
  cg_none.constrained_gain = true;
  const auto same = measurement_update(prior, ev, m, cg_none);
  EXPECT_EQ(same.posterior.mean, free.posterior.mean);
  EXPECT_EQ(same.posterior.covariance, free.posterior.covariance);
}

TEST(FilterConfig, Validation) {
  FilterConfig c;
  c.process_noise = Eigen::Vector2d(1.0, -1.0);
  EXPECT_THROW(c.validate(2), InvalidArgument);
  c.process_noise = Eigen::Vector2d(1.0, 1.0);
  EXPECT_THROW(c.validate(3), InvalidArgument);
  c.constraints = {{0, 1.0, 0.0}};
  EXPECT_THROW(c.validate(2), InvalidArgument);
  c.constraints = {{5, 0.0, 1.0}};
  EXPECT_THROW(c.validate(2), InvalidArgument);
}

}  // namespace
}  // namespace mrfuse
