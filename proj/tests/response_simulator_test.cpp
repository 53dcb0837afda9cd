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
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "mrfuse/response_simulator.hpp"
#include "test_support.hpp"

namespace mrfuse {
namespace {

StructuralModel two_story() {
  const std::vector<double> m{10, 10}, k{1e4, 1e4}, c{32, 32};
  return build_shear_frame(m, k, c, ExcitationKind::kGroundMotion);
}

TEST(Simulate, UndampedOscillatorPeriod) {
  const double pi = std::numbers::pi;
  const StructuralModel model =
      build_shear_frame(std::vector<double>{1.0}, std::vector<double>{4 * pi * pi},
                        std::vector<double>{0.0}, ExcitationKind::kNodalForce);
  const ResponseHistory h = simulate_true_response(model, {}, 1e-3, 5.0, model.nominal_parameters(),
                                                   Eigen::Vector2d(1.0, 0.0));
  // Downward zero crossings, located by linear interpolation.
  std::vector<double> crossings;
  for (std::size_t i = 1; i < h.steps(); ++i) {
    const double a = h.displacement(0, static_cast<Eigen::Index>(i - 1));
    const double b = h.displacement(0, static_cast<Eigen::Index>(i));
    if (a > 0.0 && b <= 0.0) crossings.push_back(h.time(i - 1) + h.dt * a / (a - b));
  }
  ASSERT_GE(crossings.size(), 4u);
  const double period = (crossings.back() - crossings.front()) / (crossings.size() - 1);
  EXPECT_NEAR(period, 1.0, 1e-3);
}

TEST(Simulate, ZeroInputZeroResponse) {
  const StructuralModel model = two_story();
  const ResponseHistory h = simulate_true_response(model, {}, 1e-3, 1.0);
  EXPECT_EQ(h.steps(), 1001u);
  EXPECT_TRUE(h.displacement.isZero(0.0));
  EXPECT_TRUE(h.velocity.isZero(0.0));
  EXPECT_TRUE(h.acceleration.isZero(0.0));
}

TEST(Simulate, EnergyBalanceUnderGroundMotion) {
  const StructuralModel model = two_story();
  const InputRecord eq = synthetic_ground_motion(30.0, 100.0, 3.417, 7);
  const double dt = 1e-4;
  const ResponseHistory h = simulate_true_response(model, {eq}, dt, 30.0);
  const Eigen::MatrixXd k = model.stiffness(), c = model.damping();
  double input = 0.0, dissipated = 0.0, peak = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < h.steps(); ++i) {
    const Eigen::VectorXd u = h.displacement.col(static_cast<Eigen::Index>(i));
    const Eigen::VectorXd v = h.velocity.col(static_cast<Eigen::Index>(i));
    if (i > 0) {
      const Eigen::VectorXd v0 = h.velocity.col(static_cast<Eigen::Index>(i - 1));
      const Eigen::VectorXd f0 = load_vector(model, {eq}, h.time(i - 1));
      const Eigen::VectorXd f1 = load_vector(model, {eq}, h.time(i));
      input += 0.5 * dt * (f0.dot(v0) + f1.dot(v));
      dissipated += 0.5 * dt * (v0.dot(c * v0) + v.dot(c * v));
    }
    const double stored = 0.5 * v.dot(model.mass * v) + 0.5 * u.dot(k * u);
    peak = std::max(peak, input);
    residual = std::max(residual, std::abs(input - stored - dissipated));
  }
  EXPECT_LT(residual, 0.01 * peak);
}

TEST(Simulate, Deterministic) {
  const StructuralModel model = build_truss(pratt_truss_spec());
  const InputRecord f = white_noise_force(1, 1.0, 1000.0, 1000.0, 11);
  const ResponseHistory a = simulate_true_response(model, {f}, 5e-4, 1.0);
  const ResponseHistory b = simulate_true_response(model, {f}, 5e-4, 1.0);
  EXPECT_TRUE((a.displacement.array() == b.displacement.array()).all());
  EXPECT_TRUE((a.acceleration.array() == b.acceleration.array()).all());
}

TEST(Simulate, RejectsBadStep) {
  const StructuralModel model = two_story();
  EXPECT_THROW(simulate_true_response(model, {}, 0.0, 1.0), InvalidArgument);
  InputRecord bad = white_noise_force(5, 1.0, 100.0, 1.0, 1);
  EXPECT_THROW(simulate_true_response(model, {bad}, 1e-3, 1.0), InvalidArgument);
}

ChannelSignal unit_rms_sine(std::size_t n) {
  return testing::sampled("s", 1000.0, static_cast<double>(n - 1) / 1000.0,
                          [](double t) { return std::sqrt(2.0) * std::sin(2 * std::numbers::pi * 3.1 * t); });
}

TEST(AddNoise, ZeroRatioIsIdentity) {
  const ChannelSignal s = unit_rms_sine(1000);
  const ChannelSignal n = add_noise(s, 0.0, 1);
  EXPECT_EQ(n.values, s.values);
  EXPECT_EQ(n.noise_variance, 0.0);
}

TEST(AddNoise, StandardDeviationFollowsRatio) {
  const ChannelSignal s = unit_rms_sine(100001);
  ASSERT_NEAR(rms(s.values), 1.0, 1e-3);
  const ChannelSignal n = add_noise(s, 0.10, 42);
  ASSERT_EQ(n.values.size(), s.values.size());
  EXPECT_EQ(n.times, s.times);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double d = n.values[i] - s.values[i];
    sum += d;
    sum_sq += d * d;
  }
  const double count = static_cast<double>(s.values.size());
  const double sd = std::sqrt((sum_sq - sum * sum / count) / (count - 1));
  EXPECT_GE(sd, 0.095);
  EXPECT_LE(sd, 0.105);
  EXPECT_NEAR(n.noise_variance, std::pow(0.1 * rms(s.values), 2), 1e-15);
}

TEST(AddNoise, SameSeedSameOutput) {
  const ChannelSignal s = unit_rms_sine(5000);
  EXPECT_EQ(add_noise(s, 0.1, 7).values, add_noise(s, 0.1, 7).values);
  EXPECT_NE(add_noise(s, 0.1, 7).values, add_noise(s, 0.1, 8).values);
  EXPECT_THROW(add_noise(s, -0.1, 7), InvalidArgument);
}

TEST(Downsample, IntegerRatioKeepsEveryTenth) {
  const ChannelSignal s = testing::sampled("a", 500.0, 2.0, [](double t) { return t; });
  const ChannelSignal d = downsample(s, 50.0);
  ASSERT_EQ(d.times.size(), 101u);
  for (std::size_t k = 0; k < d.times.size(); ++k) {
    EXPECT_EQ(d.times[k], s.times[10 * k]);
    EXPECT_NEAR(d.times[k], 0.02 * k, 1e-12);
  }
  EXPECT_EQ(d.sample_rate, 50.0);
}

TEST(Downsample, NonIntegerRatioInterpolates) {
  const ChannelSignal s = testing::sampled("a", 500.0, 2.0, [](double t) { return 3.0 * t + 1.0; });
  const ChannelSignal d = downsample(s, 30.0);
  ASSERT_EQ(d.times.size(), 61u);
  for (std::size_t k = 0; k < d.times.size(); ++k) {
    EXPECT_NEAR(d.times[k], k / 30.0, 1e-12);
    EXPECT_NEAR(d.values[k], 3.0 * d.times[k] + 1.0, 1e-12);  // linear signal is reproduced
  }
  // 31/30 s sits between the acceleration stamps 1.032 and 1.034.
  EXPECT_NEAR(d.times[31], 1.0333333333333, 1e-12);
  EXPECT_GT(d.times[31], s.times[516]);
  EXPECT_LT(d.times[31], s.times[517]);
}

TEST(Downsample, SameRateIsIdentityAndUpsamplingRejected) {
  const ChannelSignal s = testing::sampled("a", 100.0, 1.0, [](double t) { return t * t; });
  const ChannelSignal d = downsample(s, 100.0);
  EXPECT_EQ(d.times, s.times);
  EXPECT_EQ(d.values, s.values);
  EXPECT_THROW(downsample(s, 200.0), InvalidArgument);
}

TEST(NoiseVariance, ConstantSegmentIsZero) {
  const ChannelSignal s = testing::sampled("c", 100.0, 1.0, [](double) { return 4.2; });
  EXPECT_NEAR(estimate_noise_variance(s, 0.0, 1.0), 0.0, 1e-20);
}

TEST(NoiseVariance, WhiteNoiseWithinFivePercent) {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> g(0.0, 0.01);
  const ChannelSignal s = testing::sampled("n", 1000.0, 9.999, [&](double) { return g(rng); });
  ASSERT_EQ(s.values.size(), 10000u);
  EXPECT_NEAR(estimate_noise_variance(s, 0.0, 9.999), 1e-4, 5e-6);
}

TEST(NoiseVariance, SilentLeadIn) {
  std::mt19937_64 rng(321);
  std::normal_distribution<double> g(0.0, 0.02);
  const ChannelSignal s = testing::sampled("n", 1000.0, 3.0, [&](double t) {
    return g(rng) + (t > 1.0 ? 5.0 * std::sin(20.0 * t) : 0.0);
  });
  const double v = estimate_noise_variance(s, 0.0, 0.999);
  EXPECT_GE(v, 3.6e-4);
  EXPECT_LE(v, 4.4e-4);
}

TEST(NoiseVariance, RejectsBadWindows) {
  const ChannelSignal s = testing::sampled("c", 100.0, 1.0, [](double t) { return t; });
  EXPECT_THROW(estimate_noise_variance(s, 0.0, 2.0), InvalidArgument);
  EXPECT_THROW(estimate_noise_variance(s, 0.0, 0.05), InvalidArgument);  // 6 samples
}

TEST(Generators, ImpactAndWhiteNoiseShapes) {
  const InputRecord imp = half_sine_impact(3, 20.0, 0.5, 0.01, 1.0, 10000.0);
  EXPECT_EQ(imp.samples.size(), 10001u);
  EXPECT_NEAR(imp.value_at(0.505), 20.0, 1e-9);
  EXPECT_EQ(imp.value_at(0.4), 0.0);
  EXPECT_EQ(imp.value_at(0.52), 0.0);
  const InputRecord gm = synthetic_ground_motion(30.0, 100.0, 3.417, 7);
  double peak = 0.0;
  for (double v : gm.samples) peak = std::max(peak, std::abs(v));
  EXPECT_NEAR(peak, 3.417, 1e-12);
  EXPECT_EQ(gm.kind, InputKind::kGroundAcceleration);
}

TEST(InputCsv, BothLayoutsRoundTrip) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mrfuse_input_csv_test";
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "two.csv");
    f << "time_s,value\n0,1\n0.01,2\n0.02,3\n";
  }
  {
    std::ofstream f(dir / "dt.csv");
    f << "# dt=0.5\n1\n-1\n2\n";
  }
  const InputRecord a = read_input_csv((dir / "two.csv").string(), InputKind::kGroundAcceleration);
  EXPECT_NEAR(a.sample_rate, 100.0, 1e-9);
  EXPECT_EQ(a.samples, (std::vector<double>{1, 2, 3}));
  EXPECT_NEAR(a.value_at(0.015), 2.5, 1e-12);
  const InputRecord b = read_input_csv((dir / "dt.csv").string(), InputKind::kNodalForce, 0);
  EXPECT_NEAR(b.sample_rate, 2.0, 1e-12);
  EXPECT_EQ(b.samples, (std::vector<double>{1, -1, 2}));
  EXPECT_THROW(read_input_csv((dir / "missing.csv").string(), InputKind::kNodalForce, 0),
               InvalidArgument);
  fs::remove_all(dir);
}

TEST(ChannelCsv, HeaderNamesChannel) {
  ChannelSignal s = testing::sampled("disp1", 50.0, 0.04, [](double t) { return t; });
  s.channel.map.quantity = Quantity::kDisplacement;
  s.noise_variance = 0.25;
  std::ostringstream os;
  write_channel_csv(os, s);
  const std::string text = os.str();
  EXPECT_NE(text.find("disp1"), std::string::npos);
  EXPECT_NE(text.find("displacement"), std::string::npos);
  EXPECT_NE(text.find("0.25"), std::string::npos);
}

}  // namespace
}  // namespace mrfuse
