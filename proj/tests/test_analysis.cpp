#include "blazedet/analysis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "blazedet/network.hpp"
#include "reference_ops.hpp"

using blazedet::ConvKind;
using blazedet::ConvParams;
using blazedet::NetworkSpec;
using blazedet::Padding;

namespace {

ConvParams dw(int kernel, int channels, int stride = 1) {
  ConvParams p;
  p.kind = ConvKind::depthwise;
  p.kernel_h = p.kernel_w = kernel;
  p.in_channels = p.out_channels = channels;
  p.stride = stride;
  p.padding = Padding::same;
  return p;
}

ConvParams pw(int in_channels, int out_channels) {
  ConvParams p;
  p.kind = ConvKind::pointwise;
  p.kernel_h = p.kernel_w = 1;
  p.in_channels = in_channels;
  p.out_channels = out_channels;
  p.stride = 1;
  p.padding = Padding::same;
  return p;
}

ConvParams full(int kernel, int in_channels, int out_channels, int stride = 1) {
  ConvParams p;
  p.kind = ConvKind::full;
  p.kernel_h = p.kernel_w = kernel;
  p.in_channels = in_channels;
  p.out_channels = out_channels;
  p.stride = stride;
  p.padding = Padding::same;
  return p;
}

// ---------------------------------------------------------------------------
// Multiply-accumulate counts.
// ---------------------------------------------------------------------------

TEST(MacCount, DepthwiseVersusPointwiseAt56x56x128) {
  // The classic separable-convolution cost split: on a 56x56x128 map the
  // 3x3 depthwise stage is 9 MACs per value, the 1x1 pointwise stage 128.
  const long long dw_macs = blazedet::mac_count(dw(3, 128), 56);
  const long long pw_macs = blazedet::mac_count(pw(128, 128), 56);
  EXPECT_EQ(dw_macs, 3612672LL);
  EXPECT_EQ(pw_macs, 51380224LL);
  EXPECT_NEAR(static_cast<double>(pw_macs) / static_cast<double>(dw_macs), 128.0 / 9.0,
              1e-12);
}

TEST(MacCount, KnownLayersOfTheFrontalNetwork) {
  // Stem: full 5x5, 3 -> 24 channels, 64x64 output.
  EXPECT_EQ(blazedet::mac_count(full(5, 3, 24, 2), 64), 7372800LL);
  // First block: depthwise 5x5 at 64x64x24, then 24 -> 24 pointwise.
  EXPECT_EQ(blazedet::mac_count(dw(5, 24), 64), 2457600LL);
  EXPECT_EQ(blazedet::mac_count(pw(24, 24), 64), 2359296LL);
  // Head on the 8x8 map: pointwise 96 -> 102.
  EXPECT_EQ(blazedet::mac_count(pw(96, 102), 8), 626688LL);
}

TEST(MacCount, ValidatesItsInputs) {
  EXPECT_THROW(blazedet::mac_count(dw(5, 24), 0), std::invalid_argument);
  EXPECT_THROW(blazedet::mac_count(dw(5, 24), -3), std::invalid_argument);
  ConvParams bad = dw(5, 24);
  bad.out_channels = 48;  // depthwise must preserve the channel count
  EXPECT_THROW(blazedet::mac_count(bad, 64), std::invalid_argument);
}

TEST(NetworkCost, TotalsAreConsistent) {
  const NetworkSpec spec = blazedet::frontal_network_spec();
  const auto report = blazedet::network_cost(spec);

  EXPECT_EQ(report.dispatch_count, 37);
  EXPECT_EQ(report.extractor_dispatch_count, 35);
  ASSERT_EQ(report.layers.size(), 37u);

  long long sum = 0, extractor = 0, heads = 0;
  for (const auto& layer : report.layers) {
    EXPECT_GT(layer.macs, 0) << layer.name;
    sum += layer.macs;
    (layer.head ? heads : extractor) += layer.macs;
  }
  EXPECT_EQ(report.total_macs, sum);
  EXPECT_EQ(report.extractor_macs, extractor);
  EXPECT_EQ(report.head_macs, heads);
  EXPECT_EQ(report.total_macs, report.extractor_macs + report.head_macs);

  // The stem is the single most expensive dispatch in this ladder.
  EXPECT_EQ(report.layers[0].name, "conv1");
  EXPECT_EQ(report.layers[0].macs, 7372800LL);
  for (const auto& layer : report.layers) {
    EXPECT_LE(layer.macs, report.layers[0].macs) << layer.name;
  }
}

TEST(NetworkCost, EmptySpecCostsNothing) {
  NetworkSpec spec = blazedet::frontal_network_spec();
  spec.blocks.clear();
  spec.heads.clear();
  const auto report = blazedet::network_cost(spec);
  EXPECT_TRUE(report.layers.empty());
  EXPECT_EQ(report.total_macs, 0);
  EXPECT_EQ(report.dispatch_count, 0);
}

// ---------------------------------------------------------------------------
// Receptive fields.
// ---------------------------------------------------------------------------

// Independent fold of rf/jump over the ladder's (kernel, stride) sequence,
// written out literally.
long long fold_rf(const std::vector<std::pair<int, int>>& kernel_stride) {
  long long rf = 1, jump = 1;
  for (const auto& [kernel, stride] : kernel_stride) {
    rf += static_cast<long long>(kernel - 1) * jump;
    jump *= stride;
  }
  return rf;
}

std::vector<std::pair<int, int>> ladder_primitives(int dw_kernel, int upto_block) {
  std::vector<std::pair<int, int>> seq{{5, 2}};  // stem
  const auto single = [&](int stride) {
    seq.push_back({dw_kernel, stride});
    seq.push_back({1, 1});
  };
  const auto dbl = [&](int stride) {
    seq.push_back({dw_kernel, stride});
    seq.push_back({1, 1});
    seq.push_back({dw_kernel, 1});
    seq.push_back({1, 1});
  };
  int block = 1;
  const auto upto = [&] { return ++block <= upto_block; };
  if (upto()) single(1);  // block02
  if (upto()) single(1);  // block03
  if (upto()) single(2);  // block04
  if (upto()) single(1);  // block05
  if (upto()) single(1);  // block06
  if (upto()) dbl(2);     // block07
  if (upto()) dbl(1);     // block08
  if (upto()) dbl(1);     // block09
  if (upto()) dbl(2);     // block10
  if (upto()) dbl(1);     // block11
  if (upto()) dbl(1);     // block12
  return seq;
}

TEST(ReceptiveField, MatchesTheIndependentFold) {
  const auto report = blazedet::receptive_field(blazedet::frontal_network_spec());
  ASSERT_EQ(report.steps.size(), 35u);

  EXPECT_EQ(report.steps[0].name, "conv1");
  EXPECT_EQ(report.steps[0].rf, 5);
  EXPECT_EQ(report.steps[0].jump, 2);

  EXPECT_EQ(report.rf_map16, fold_rf(ladder_primitives(5, 9)));
  EXPECT_EQ(report.rf_map8, fold_rf(ladder_primitives(5, 12)));
  EXPECT_EQ(report.rf_map16, 237);
  EXPECT_EQ(report.rf_map8, 589);
}

TEST(ReceptiveField, PointwiseStepsDoNotGrowIt) {
  const auto report = blazedet::receptive_field(blazedet::frontal_network_spec());
  long long previous = 1;
  for (const auto& step : report.steps) {
    if (step.kernel == 1) {
      EXPECT_EQ(step.rf, previous) << step.name;
    } else {
      EXPECT_GT(step.rf, previous) << step.name;
    }
    previous = step.rf;
  }
}

TEST(ReceptiveField, SmallerDepthwiseKernelShrinksIt) {
  const NetworkSpec narrow =
      blazedet::with_dw_kernel(blazedet::frontal_network_spec(), 3);
  const auto report = blazedet::receptive_field(narrow);
  EXPECT_EQ(report.steps[0].kernel, 5);  // the stem keeps its kernel
  EXPECT_EQ(report.rf_map8, fold_rf(ladder_primitives(3, 12)));
  EXPECT_EQ(report.rf_map8, 297);
  EXPECT_LT(report.rf_map8, 589);
  EXPECT_THROW(blazedet::with_dw_kernel(blazedet::frontal_network_spec(), 0),
               std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Layer timing.
// ---------------------------------------------------------------------------

TEST(TimeLayers, ValidatesIterationsAndReportsEveryDispatch) {
  const NetworkSpec spec = blazedet::frontal_network_spec();
  const blazedet::WeightStore weights = blazedet::init_random_weights(spec, 5);
  blazedet::Tensor input(1, 128, 128, 3);
  std::mt19937 rng(7);
  for (float& v : input.data()) v = blazedet::uniform_in(rng, -1.0f, 1.0f);

  EXPECT_THROW(blazedet::time_layers(spec, weights, input, 0), std::invalid_argument);

  const auto report = blazedet::time_layers(spec, weights, input, 1);
  EXPECT_EQ(report.iterations, 1);
  ASSERT_EQ(report.layers.size(), 37u);
  EXPECT_EQ(report.layers.front().name, "conv1");
  double sum = 0.0;
  for (const auto& layer : report.layers) {
    EXPECT_GE(layer.median_ms, 0.0) << layer.name;
    EXPECT_LE(layer.min_ms, layer.median_ms + 1e-9) << layer.name;
    sum += layer.median_ms;
  }
  EXPECT_NEAR(report.layer_median_sum_ms, sum, 1e-9);
  EXPECT_GT(report.network_median_ms, 0.0);
  EXPECT_LE(report.network_min_ms, report.network_median_ms + 1e-9);
}

}  // namespace
