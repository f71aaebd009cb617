// Copyright 2026 The dmrseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "dmrseg/error.hpp"
#include "dmrseg/mtl_loss.hpp"
#include "dmrseg/ops.hpp"
#include "grad_check.hpp"

namespace dmrseg::mtl {
namespace {

namespace ag = autograd;
using TD = Tensor<double>;

TD leaf(double v) {
  TD t = TD::scalar(v);
  t.set_requires_grad(true);
  return t;
}

// Golden-section minimum of a unimodal function on [lo, hi].
template <typename F>
double golden_min(F f, double lo, double hi) {
  const double g = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = hi;
  for (int i = 0; i < 200; ++i) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (f(c) < f(d)) b = d;
    else a = c;
  }
  return 0.5 * (a + b);
}

TEST(TaskWeights, InitialisedToUnitScales) {
  auto w = TaskWeights<double>::init();
  EXPECT_EQ(w.sigma1(), 1.0);
  EXPECT_EQ(w.sigma2(), 1.0);
  EXPECT_EQ(w.mad_weight(), 1.0);
  EXPECT_EQ(w.ce_weight(), 1.0);
  EXPECT_TRUE(w.s1.requires_grad());
  auto v = TaskWeights<double>::init(std::log(2.0), std::log(3.0));
  EXPECT_NEAR(v.mad_weight(), 0.5, 1e-15);
  EXPECT_NEAR(v.ce_weight(), 1.0 / 9.0, 1e-15);
  EXPECT_GT(TaskWeights<double>::init(-50, -50).sigma1(), 0.0);
}

TEST(JointLoss, UnitScalesSumTheTerms) {
  auto w = TaskWeights<double>::init();
  EXPECT_DOUBLE_EQ(joint_loss(TD::scalar(2), TD::scalar(3), w).item(), 5.0);
  ag::Tape<double>::current().clear();
}

TEST(JointLoss, MatchesClosedForm) {
  auto w = TaskWeights<double>::init(0.7, -0.4);
  const double want = std::exp(-0.7) * 2 + std::exp(0.8) * 3 + 0.7 - 0.4;
  EXPECT_NEAR(joint_loss(TD::scalar(2), TD::scalar(3), w).item(), want, 1e-12);
  ag::Tape<double>::current().clear();
}

TEST(JointLoss, GradientWrtScales) {
  auto w = TaskWeights<double>::init(0.2, 0.1);
  TD l1 = leaf(2), l2 = leaf(3);
  ag::backward(joint_loss(l1, l2, w));
  EXPECT_NEAR(w.s1.grad()[0], -std::exp(-0.2) * 2 + 1, 1e-12);
  EXPECT_NEAR(w.s2.grad()[0], -2 * std::exp(-0.2) * 3 + 1, 1e-12);
  EXPECT_NEAR(l1.grad()[0], std::exp(-0.2), 1e-12);
  EXPECT_NEAR(l2.grad()[0], std::exp(-0.2), 1e-12);
}

TEST(JointLoss, GradientSignFollowsSigmaVersusLoss) {
  for (double s1 : {-1.0, 0.0, 0.5, 1.0, 2.0}) {
    auto w = TaskWeights<double>::init(s1, 0);
    ag::backward(joint_loss(TD::scalar(2), TD::scalar(3), w));
    const double g = w.s1.grad()[0];
    if (std::exp(s1) < 2) EXPECT_LT(g, 0) << s1;
    else EXPECT_GT(g, 0) << s1;
  }
}

TEST(JointLoss, FiniteDifferences) {
  std::mt19937_64 rng(1);
  TD a = testing::random_tensor<double>({3}, rng, 0.5, 2);
  TD b = testing::random_tensor<double>({3}, rng, 0.5, 2);
  auto w = TaskWeights<double>::init(0.3, -0.6);
  auto rep = testing::check_gradients({&a, &b, &w.s1, &w.s2},
                                      [&] { return joint_loss(ag::sum(a), ag::mean(b), w); });
  EXPECT_LT(rep.max_rel, 1e-4) << rep.worst;
}

TEST(JointLoss, StationaryPointsMatchNumericalMinimum) {
  const double l1 = 2, l2 = 3;
  auto f1 = [&](double s) { return std::exp(-s) * l1 + s; };
  auto f2 = [&](double s) { return std::exp(-2 * s) * l2 + s; };
  const double s1 = golden_min(f1, -5, 5), s2 = golden_min(f2, -5, 5);
  EXPECT_NEAR(std::exp(s1), 2.0, 1e-6);
  EXPECT_NEAR(std::exp(2 * s2), 6.0, 1e-6);
}

TEST(JointLoss, GradientDescentOnScalesConverges) {
  auto w = TaskWeights<double>::init();
  const double lr = 0.05;
  for (int it = 0; it < 10000; ++it) {
    w.s1.zero_grad();
    w.s2.zero_grad();
    ag::backward(joint_loss(TD::scalar(2), TD::scalar(3), w));
    w.s1[0] -= lr * w.s1.grad()[0];
    w.s2[0] -= lr * w.s2.grad()[0];
  }
  EXPECT_NEAR(w.sigma1(), 2.0, 1e-4);
  EXPECT_NEAR(w.sigma2() * w.sigma2(), 6.0, 1e-3);
}

TEST(JointLoss, MonotoneInBothLosses) {
  auto w = TaskWeights<double>::init(0.4, -0.3);
  double prev = -1e300;
  for (double l : {0.0, 0.5, 1.0, 4.0}) {
    const double v = joint_loss(TD::scalar(l), TD::scalar(1), w).item();
    EXPECT_GT(v, prev);
    prev = v;
  }
  prev = -1e300;
  for (double l : {0.0, 0.5, 1.0, 4.0}) {
    const double v = joint_loss(TD::scalar(1), TD::scalar(l), w).item();
    EXPECT_GT(v, prev);
    prev = v;
  }
  ag::Tape<double>::current().clear();
}

TEST(FixedLoss, Examples) {
  EXPECT_DOUBLE_EQ(fixed_loss(TD::scalar(2), TD::scalar(3), 1.0, 1.0).item(), 5.0);
  EXPECT_DOUBLE_EQ(fixed_loss(TD::scalar(2), TD::scalar(3), 0.0, 1.0).item(), 3.0);
  EXPECT_DOUBLE_EQ(fixed_loss(TD::scalar(4), TD::scalar(0), 1.5, 1.0).item(),
                   fixed_loss(TD::scalar(2), TD::scalar(0), 3.0, 1.0).item());
  EXPECT_THROW(fixed_loss(TD::scalar(1), TD::scalar(1), -1.0, 1.0), UsageError);
  ag::Tape<double>::current().clear();
}

TEST(FixedLoss, ZeroWeightBlocksGradient) {
  TD a = leaf(2), b = leaf(3);
  ag::backward(fixed_loss(a, b, 0.0, 2.0));
  EXPECT_TRUE(!a.has_grad() || a.grad()[0] == 0.0);
  EXPECT_EQ(b.grad()[0], 2.0);
}

}  // namespace
}  // namespace dmrseg::mtl
