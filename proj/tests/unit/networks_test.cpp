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
#include <random>

#include "dmrseg/error.hpp"
#include "dmrseg/mtl_loss.hpp"
#include "dmrseg/networks.hpp"
#include "dmrseg/ops.hpp"
#include "grad_check.hpp"

namespace dmrseg::nets {
namespace {

namespace ag = autograd;
using TD = Tensor<double>;

ArchSpec small_spec(Variant v, bool dmr) {
  ArchSpec s;
  s.variant = v;
  s.stage_channels = {4, 6, 8};
  s.bottleneck_channels = 10;
  s.dmr_attached = dmr;
  s.dm_threshold = 5.0;
  return s;
}

TD random_image(int b, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return testing::random_tensor<double>({b, 1, h, w}, rng, -1, 1, false);
}

bool same_values(const TD& a, const TD& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

constexpr Variant kAllVariants[] = {Variant::kSegNet, Variant::kUSegNet, Variant::kUNet};

TEST(ArchSpec, Validation) {
  ArchSpec s;
  EXPECT_NO_THROW(s.validate());
  s.stage_channels = {32, 32, 64};
  EXPECT_THROW(s.validate(), SpecError);
  s = ArchSpec{};
  s.stage_channels = {8, 16};
  EXPECT_THROW(s.validate(), SpecError);
  s = ArchSpec{};
  s.bottleneck_channels = 128;
  EXPECT_THROW(s.validate(), SpecError);
  s = ArchSpec{};
  s.num_classes = 1;
  EXPECT_THROW(s.validate(), SpecError);
  s = ArchSpec{};
  s.dm_threshold = 0;
  EXPECT_THROW(s.validate(), SpecError);
}

TEST(ArchSpec, VariantNamesRoundTrip) {
  for (Variant v : kAllVariants) EXPECT_EQ(parse_variant(variant_name(v)), v);
  EXPECT_THROW(parse_variant("vnet"), SpecError);
}

TEST(Build, SameSeedBitIdentical) {
  for (Variant v : kAllVariants) {
    auto a = build_model<double>(small_spec(v, true), 17);
    auto b = build_model<double>(small_spec(v, true), 17);
    auto la = a.learnables(), lb = b.learnables();
    ASSERT_EQ(la.size(), lb.size());
    for (std::size_t i = 0; i < la.size(); ++i) EXPECT_TRUE(same_values(*la[i], *lb[i]));
    auto c = build_model<double>(small_spec(v, true), 18);
    EXPECT_FALSE(same_values(*la[0], *c.learnables()[0]));
  }
}

TEST(Build, KaimingBoundsAndInitialValues) {
  EXPECT_DOUBLE_EQ(kaiming_bound(9), std::sqrt(2.0) * std::sqrt(3.0 / 9.0));
  auto m = build_model<double>(small_spec(Variant::kUNet, true), 3);
  for (auto* g : m.groups()) {
    for (const auto& p : g->params()) {
      const auto& t = p.tensor;
      if (p.name.ends_with(".weight")) {
        // conv kernels are Cout x Cin x k x k, transposed ones Cin x Cout x 2 x 2.
        const bool transposed = p.name.rfind("up", 0) == 0;
        const int fan_in = transposed ? t.dim(0) : t.dim(1) * t.dim(2) * t.dim(3);
        const double b = kaiming_bound(fan_in);
        double lo = 0, hi = 0;
        for (double v : t.data()) {
          EXPECT_LT(std::abs(v), b) << g->prefix() << "." << p.name;
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        if (t.numel() >= 64) EXPECT_GT(hi - lo, b) << p.name;  // actually spread
      } else if (p.name.ends_with(".gamma")) {
        for (double v : t.data()) EXPECT_EQ(v, 1.0);
      } else {
        for (double v : t.data()) EXPECT_EQ(v, 0.0) << p.name;
      }
    }
  }
}

TEST(Build, DetachedCountEqualsBaseline) {
  for (Variant v : kAllVariants) {
    for (bool bn : {true, false}) {
      auto spec = small_spec(v, true);
      spec.use_batchnorm = bn;
      auto attached = build_model<double>(spec, 1);
      auto base_spec = spec;
      base_spec.dmr_attached = false;
      auto baseline = build_model<double>(base_spec, 1);
      EXPECT_GT(attached.parameter_count(), baseline.parameter_count());
      EXPECT_EQ(detach_regularizer(attached).parameter_count(), baseline.parameter_count());
      EXPECT_FALSE(baseline.dmr_decoder.has_value());
    }
  }
}

TEST(Build, DefaultUNetCountMatchesEnumeration) {
  // Direct count for the default 32/64/128/256 U-Net with batchnorm.
  auto conv_bn = [](long cin, long cout) { return cin * cout * 9 + 2 * cout; };
  long want = 0;
  want += conv_bn(1, 32) + conv_bn(32, 32) + conv_bn(32, 64) + conv_bn(64, 64) + conv_bn(64, 128) +
          conv_bn(128, 128) + conv_bn(128, 256) + conv_bn(256, 256);
  want += 256 * 128 * 4 + conv_bn(256, 128) + conv_bn(128, 128);
  want += 128 * 64 * 4 + conv_bn(128, 64) + conv_bn(64, 64);
  want += 64 * 32 * 4 + conv_bn(64, 32) + conv_bn(32, 32);
  want += 32 * 4 + 4;
  ArchSpec s;
  EXPECT_EQ(static_cast<long>(build_model<float>(s, 0).parameter_count()), want);
}

TEST(Build, AttachedAndDetachedShareSegmentationWeights) {
  auto a = build_model<double>(small_spec(Variant::kUSegNet, true), 5);
  auto b = build_model<double>(small_spec(Variant::kUSegNet, false), 5);
  auto la = a.learnables(), lb = b.learnables();
  for (std::size_t i = 0; i < lb.size(); ++i) EXPECT_TRUE(same_values(*la[i], *lb[i]));
}

TEST(Forward, ShapeContract) {
  for (Variant v : kAllVariants) {
    auto m = build_model<double>(small_spec(v, true), 2);
    auto out = forward(m, random_image(2, 32, 32, 1), Mode::kTrain);
    EXPECT_EQ(out.logits.shape(), (ag::Shape{2, 4, 32, 32}));
    ASSERT_TRUE(out.dm_pred.has_value());
    EXPECT_EQ(out.dm_pred->shape(), (ag::Shape{2, 3, 32, 32}));
    ag::Tape<double>::current().clear();
  }
}

TEST(Forward, ShapesForEveryMultipleOfEight) {
  auto m = build_model<float>(small_spec(Variant::kUNet, true), 2);
  ag::NoGradGuard<float> ng;
  for (int h = 16; h <= 128; h += 8) {
    const int w = 144 - h;
    Tensor<float> x({1, 1, h, w}, 0.5f);
    auto out = forward(m, x, Mode::kEval);
    EXPECT_EQ(out.logits.shape(), (ag::Shape{1, 4, h, w}));
    EXPECT_EQ(out.dm_pred->shape(), (ag::Shape{1, 3, h, w}));
  }
}

TEST(Forward, IndivisibleExtentIsDimensionError) {
  auto m = build_model<double>(small_spec(Variant::kSegNet, false), 2);
  ag::NoGradGuard<double> ng;
  EXPECT_THROW(forward(m, random_image(1, 20, 16, 1), Mode::kEval), DimensionError);
  EXPECT_THROW(forward(m, TD::zeros({1, 2, 16, 16}), Mode::kEval), DimensionError);
}

TEST(Forward, DetachedHasNoDistancePrediction) {
  auto m = build_model<double>(small_spec(Variant::kUNet, false), 2);
  ag::NoGradGuard<double> ng;
  EXPECT_FALSE(forward(m, random_image(1, 16, 16, 1), Mode::kEval).dm_pred.has_value());
}

TEST(Forward, EvalIsDeterministic) {
  auto m = build_model<double>(small_spec(Variant::kUSegNet, true), 2);
  ag::NoGradGuard<double> ng;
  const TD x = random_image(2, 16, 16, 3);
  EXPECT_TRUE(same_values(forward(m, x, Mode::kEval).logits, forward(m, x, Mode::kEval).logits));
}

TEST(Forward, ZeroingSkipsOnlyMattersWithSkips) {
  for (Variant v : kAllVariants) {
    auto m = build_model<double>(small_spec(v, false), 4);
    ag::NoGradGuard<double> ng;
    const TD x = random_image(2, 16, 16, 5);
    const TD a = forward(m, x, Mode::kEval).logits;
    const TD b = forward(m, x, Mode::kEval, {.zero_skips = true}).logits;
    if (v == Variant::kSegNet) EXPECT_TRUE(same_values(a, b));
    else EXPECT_FALSE(same_values(a, b)) << variant_name(v);
  }
}

TEST(Regularizer, DetachKeepsLogitsBitIdentical) {
  for (Variant v : kAllVariants) {
    auto m = build_model<double>(small_spec(v, true), 6);
    ag::NoGradGuard<double> ng;
    const TD x = random_image(2, 16, 16, 7);
    const TD before = forward(m, x, Mode::kEval).logits;
    auto d = detach_regularizer(m);
    EXPECT_FALSE(d.spec.dmr_attached);
    EXPECT_TRUE(same_values(before, forward(d, x, Mode::kEval).logits));
    EXPECT_THROW(detach_regularizer(d), UsageError);
  }
}

TEST(Regularizer, ReattachRestoresShapes) {
  auto m = build_model<double>(small_spec(Variant::kUNet, true), 6);
  auto d = detach_regularizer(m);
  auto r = attach_regularizer(d, 99);
  EXPECT_EQ(r.parameter_count(), m.parameter_count());
  EXPECT_THROW(attach_regularizer(r, 1), UsageError);
  ag::NoGradGuard<double> ng;
  auto out = forward(r, random_image(1, 16, 16, 2), Mode::kEval);
  EXPECT_EQ(out.dm_pred->shape(), (ag::Shape{1, 3, 16, 16}));
}

TEST(Regularizer, SideBranchDoesNotChangeTrainLogits) {
  auto a = build_model<double>(small_spec(Variant::kUNet, true), 8);
  auto b = detach_regularizer(a);
  const TD x = random_image(2, 16, 16, 9);
  TD la = forward(a, x, Mode::kTrain).logits;
  TD lb = forward(b, x, Mode::kTrain).logits;
  EXPECT_TRUE(same_values(la, lb));
  ag::Tape<double>::current().clear();
}

TEST(Regularizer, CloneIsDeep) {
  auto a = build_model<double>(small_spec(Variant::kSegNet, true), 8);
  auto b = a.clone();
  (*b.learnables()[0])[0] += 1.0;
  EXPECT_NE((*a.learnables()[0])[0], (*b.learnables()[0])[0]);
}

TEST(GradientFlow, EncoderSeesBothTermsDecoderOnlySegmentation) {
  for (Variant v : kAllVariants) {
    auto m = build_model<double>(small_spec(v, true), 10);
    const TD x = random_image(2, 16, 16, 11);
    std::vector<std::int32_t> labels(2 * 256);
    std::mt19937_64 rng(12);
    for (auto& l : labels) l = static_cast<std::int32_t>(rng() % 4);
    TD target = testing::random_tensor<double>({2, 3, 16, 16}, rng, -5, 5, false);

    auto grads_with = [&](bool use_mad, bool use_ce) {
      for (auto* p : m.learnables()) p->zero_grad();
      auto out = forward(m, x, Mode::kTrain);
      TD loss = mtl::fixed_loss(ag::mad_loss(*out.dm_pred, target), ag::cross_entropy_loss(out.logits, labels),
                                use_mad ? 1.0 : 0.0, use_ce ? 1.0 : 0.0);
      ag::backward(loss);
    };
    auto nonzero = [](const TD& t) {
      if (!t.has_grad()) return false;
      for (double g : t.grad())
        if (g != 0) return true;
      return false;
    };
    grads_with(true, false);
    for (auto& p : m.encoder.params()) EXPECT_TRUE(nonzero(p.tensor)) << "mad " << p.name;
    for (auto& p : m.seg_decoder.params()) EXPECT_FALSE(nonzero(p.tensor)) << "mad " << p.name;
    grads_with(false, true);
    for (auto& p : m.encoder.params()) EXPECT_TRUE(nonzero(p.tensor)) << "ce " << p.name;
    for (auto& p : m.dmr_decoder->params()) EXPECT_FALSE(nonzero(p.tensor)) << "ce " << p.name;
  }
}

TEST(GradientCheck, DmrUNetCompositeSixteenBySixteen) {
  ArchSpec s = small_spec(Variant::kUNet, true);
  s.stage_channels = {2, 3, 4};
  s.bottleneck_channels = 5;
  auto m = build_model<double>(s, 13);
  const TD x = random_image(2, 16, 16, 14);
  std::vector<std::int32_t> labels(2 * 256);
  std::mt19937_64 rng(15);
  for (auto& l : labels) l = static_cast<std::int32_t>(rng() % 4);
  TD target = testing::random_tensor<double>({2, 3, 16, 16}, rng, -5, 5, false);
  auto w = mtl::TaskWeights<double>::init(0.3, -0.2);
  std::vector<TD*> leaves = m.learnables();
  leaves.push_back(&w.s1);
  leaves.push_back(&w.s2);
  auto rep = testing::check_gradients(leaves, [&] {
    auto out = forward(m, x, Mode::kTrain);
    return mtl::joint_loss(ag::mad_loss(*out.dm_pred, target), ag::cross_entropy_loss(out.logits, labels), w);
  }, 12);
  EXPECT_LT(rep.max_rel, 1e-3) << rep.worst;
  EXPECT_GT(rep.checked, 200u);
}

TEST(Predict, ShapeAndArgmax) {
  auto m = build_model<double>(small_spec(Variant::kUNet, false), 16);
  Volume v({16, 24, 3}, {1.5, 1.5, 8});
  std::mt19937_64 rng(17);
  for (auto& x : v.voxels) x = std::uniform_real_distribution<double>(-1, 1)(rng);
  const auto lab = predict_labels(m, v, 2);
  EXPECT_EQ(lab.dims, v.dims);
  EXPECT_EQ(lab.spacing, v.spacing);
  EXPECT_EQ(lab.num_classes, 4);
  // Slice-by-slice with a batch of one gives the same labels.
  EXPECT_EQ(predict_labels(m, v, 1).labels, lab.labels);
}

TEST(Argmax, DominantClassAndTies) {
  TD logits({1, 3, 1, 3}, std::vector<double>{5, 0, 1, 0, 0, 1, 0, 9, 1});
  EXPECT_EQ(argmax_channels(logits), (std::vector<std::int32_t>{0, 2, 0}));
  TD shifted = logits.clone();
  for (auto& v : shifted.data()) v += 100;
  EXPECT_EQ(argmax_channels(shifted), argmax_channels(logits));
}

TEST(Cast, FloatRoundTripKeepsShapes) {
  auto m = build_model<double>(small_spec(Variant::kSegNet, true), 18);
  auto f = m.cast<float>();
  EXPECT_EQ(f.parameter_count(), m.parameter_count());
  EXPECT_EQ(f.encoder.buffers().size(), m.encoder.buffers().size());
  EXPECT_FLOAT_EQ((*f.learnables()[0])[0], static_cast<float>((*m.learnables()[0])[0]));
}

}  // namespace
}  // namespace dmrseg::nets
