#include "blazedet/tensor.hpp"

#include <gtest/gtest.h>

#include <random>
#include <stdexcept>
#include <vector>

#include "reference_ops.hpp"

using blazedet::ConvKind;
using blazedet::ConvParams;
using blazedet::Dims;
using blazedet::Padding;
using blazedet::Tensor;

namespace {

// ---------------------------------------------------------------------------
// Construction and indexing.
// ---------------------------------------------------------------------------

TEST(Tensor, StoresChannelsInnermost) {
  Tensor t(1, 2, 3, 4);
  t.at(0, 1, 2, 3) = 42.0f;
  EXPECT_EQ(t.index(0, 0, 0, 0), 0u);
  EXPECT_EQ(t.index(0, 0, 0, 1), 1u);
  EXPECT_EQ(t.index(0, 0, 1, 0), 4u);
  EXPECT_EQ(t.index(0, 1, 0, 0), 12u);
  EXPECT_FLOAT_EQ(t.data()[t.index(0, 1, 2, 3)], 42.0f);
  EXPECT_EQ(t.size(), 24u);
}

TEST(Tensor, RejectsNonPositiveAxes) {
  EXPECT_THROW(Tensor(1, 0, 4, 4), std::invalid_argument);
  EXPECT_THROW(Tensor(0, 4, 4, 4), std::invalid_argument);
  EXPECT_THROW(Tensor(1, 4, -1, 4), std::invalid_argument);
  EXPECT_THROW(Tensor(1, 4, 4, 0), std::invalid_argument);
}

TEST(Tensor, RejectsMismatchedDataLength) {
  EXPECT_THROW(Tensor(Dims{1, 2, 2, 1}, std::vector<float>(3)), std::invalid_argument);
  EXPECT_NO_THROW(Tensor(Dims{1, 2, 2, 1}, std::vector<float>(4)));
}

// ---------------------------------------------------------------------------
// Output extents and padding arithmetic.
// ---------------------------------------------------------------------------

TEST(ConvGeometry, SamePaddingOutputIsCeilOfInOverStride) {
  EXPECT_EQ(blazedet::conv_output_extent(128, 5, 2, Padding::same), 64);
  EXPECT_EQ(blazedet::conv_output_extent(64, 5, 1, Padding::same), 64);
  EXPECT_EQ(blazedet::conv_output_extent(7, 3, 2, Padding::same), 4);
  EXPECT_EQ(blazedet::conv_output_extent(1, 5, 2, Padding::same), 1);
}

TEST(ConvGeometry, ValidPaddingOutput) {
  EXPECT_EQ(blazedet::conv_output_extent(128, 5, 2, Padding::valid), 62);
  EXPECT_EQ(blazedet::conv_output_extent(8, 3, 1, Padding::valid), 6);
  EXPECT_EQ(blazedet::conv_output_extent(5, 5, 1, Padding::valid), 1);
}

TEST(ConvGeometry, ValidPaddingRejectsKernelLargerThanInput) {
  EXPECT_THROW(blazedet::conv_output_extent(4, 5, 1, Padding::valid), std::invalid_argument);
}

TEST(ConvGeometry, SamePaddingPutsSmallerHalfFirst) {
  // 128 wide, kernel 5, stride 2: total pad 3 -> 1 before, 2 after.
  EXPECT_EQ(blazedet::same_pad_before(128, 5, 2), 1);
  // Stride 1, kernel 5: total pad 4 -> symmetric 2.
  EXPECT_EQ(blazedet::same_pad_before(64, 5, 1), 2);
  // Kernel 1 needs no padding.
  EXPECT_EQ(blazedet::same_pad_before(16, 1, 1), 0);
  // Kernel 2, stride 2, even input: no padding needed.
  EXPECT_EQ(blazedet::same_pad_before(16, 2, 2), 0);
}

// ---------------------------------------------------------------------------
// conv2d against the naive reference.
// ---------------------------------------------------------------------------

ConvParams params_for(ConvKind kind, int k, int stride, Padding padding, int ci, int co) {
  ConvParams p;
  p.kernel_h = k;
  p.kernel_w = k;
  p.stride = stride;
  p.padding = padding;
  p.kind = kind;
  p.in_channels = ci;
  p.out_channels = kind == ConvKind::depthwise ? ci : co;
  if (kind == ConvKind::pointwise) p.kernel_h = p.kernel_w = 1;
  return p;
}

void expect_matches_reference(const Tensor& input, const Tensor& weights,
                              const std::vector<float>& bias, const ConvParams& p) {
  const Tensor actual = blazedet::conv2d(input, weights, bias, p);
  const Tensor expected = refops::naive_conv2d(input, weights, bias, p);
  ASSERT_TRUE(actual.dims() == expected.dims());
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ASSERT_TRUE(refops::approx_rel(actual.data()[i], expected.data()[i]))
        << "value " << i << ": " << actual.data()[i] << " vs " << expected.data()[i];
  }
}

TEST(Conv2d, MatchesNaiveReferenceAcrossKindsStridesAndPaddings) {
  std::mt19937 rng(20240817);
  int cases = 0;
  for (ConvKind kind : {ConvKind::full, ConvKind::depthwise, ConvKind::pointwise}) {
    for (int stride : {1, 2}) {
      for (Padding padding : {Padding::same, Padding::valid}) {
        for (int rep = 0; rep < 3; ++rep) {
          const int k = kind == ConvKind::pointwise ? 1 : (rep % 2 == 0 ? 3 : 5);
          const int h = 5 + static_cast<int>(rng() % 12);  // 5..16
          const int w = 5 + static_cast<int>(rng() % 12);
          const int ci = 1 + static_cast<int>(rng() % 8);
          const int co = 1 + static_cast<int>(rng() % 8);
          const ConvParams p = params_for(kind, k, stride, padding, ci, co);
          const Tensor input = refops::random_tensor(rng, Dims{1, h, w, ci});
          const int stored_co = kind == ConvKind::depthwise ? 1 : p.out_channels;
          const Tensor weights =
              refops::random_tensor(rng, Dims{p.kernel_h, p.kernel_w, ci, stored_co});
          const std::vector<float> bias = refops::random_vector(rng, p.out_channels);
          SCOPED_TRACE(std::string(blazedet::to_string(kind)) + " k" + std::to_string(k) +
                       " s" + std::to_string(stride) +
                       (padding == Padding::same ? " same " : " valid ") + std::to_string(h) +
                       "x" + std::to_string(w) + "x" + std::to_string(ci));
          expect_matches_reference(input, weights, bias, p);
          ++cases;
        }
      }
    }
  }
  EXPECT_GE(cases, 36);
}

TEST(Conv2d, BatchedInputMatchesReference) {
  std::mt19937 rng(7);
  const ConvParams p = params_for(ConvKind::full, 3, 2, Padding::same, 3, 5);
  const Tensor input = refops::random_tensor(rng, Dims{3, 9, 7, 3});
  const Tensor weights = refops::random_tensor(rng, Dims{3, 3, 3, 5});
  expect_matches_reference(input, weights, refops::random_vector(rng, 5), p);
}

TEST(Conv2d, ValidatesWeightShapePerKind) {
  std::mt19937 rng(3);
  const Tensor input = refops::random_tensor(rng, Dims{1, 8, 8, 4});
  const std::vector<float> bias4(4, 0.0f);

  // Depthwise wants kxkxCx1.
  ConvParams dw = params_for(ConvKind::depthwise, 3, 1, Padding::same, 4, 4);
  EXPECT_NO_THROW(blazedet::conv2d(input, Tensor(3, 3, 4, 1), bias4, dw));
  EXPECT_THROW(blazedet::conv2d(input, Tensor(3, 3, 4, 4), bias4, dw), std::invalid_argument);

  // Full conv wants kxkxCixCo.
  ConvParams full = params_for(ConvKind::full, 3, 1, Padding::same, 4, 4);
  EXPECT_THROW(blazedet::conv2d(input, Tensor(3, 3, 4, 1), bias4, full), std::invalid_argument);

  // Pointwise must be 1x1.
  ConvParams pw = params_for(ConvKind::pointwise, 1, 1, Padding::same, 4, 4);
  pw.kernel_h = 3;
  pw.kernel_w = 3;
  EXPECT_THROW(blazedet::conv2d(input, Tensor(3, 3, 4, 4), bias4, pw), std::invalid_argument);
}

TEST(Conv2d, ValidatesChannelAndBiasCounts) {
  std::mt19937 rng(4);
  const Tensor input = refops::random_tensor(rng, Dims{1, 8, 8, 4});
  const ConvParams p = params_for(ConvKind::full, 3, 1, Padding::same, 4, 6);
  const Tensor weights = refops::random_tensor(rng, Dims{3, 3, 4, 6});
  EXPECT_NO_THROW(blazedet::conv2d(input, weights, std::vector<float>(6, 0.0f), p));
  EXPECT_THROW(blazedet::conv2d(input, weights, std::vector<float>(5, 0.0f), p),
               std::invalid_argument);

  const Tensor wrong_channels = refops::random_tensor(rng, Dims{1, 8, 8, 3});
  EXPECT_THROW(blazedet::conv2d(wrong_channels, weights, std::vector<float>(6, 0.0f), p),
               std::invalid_argument);
}

TEST(Conv2d, DepthwiseRequiresMatchingOutChannels) {
  ConvParams p;
  p.kernel_h = p.kernel_w = 3;
  p.kind = ConvKind::depthwise;
  p.in_channels = 4;
  p.out_channels = 8;
  std::mt19937 rng(5);
  const Tensor input = refops::random_tensor(rng, Dims{1, 8, 8, 4});
  EXPECT_THROW(blazedet::conv2d(input, Tensor(3, 3, 4, 1), std::vector<float>(8, 0.0f), p),
               std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Elementwise ops, pooling, channel padding.
// ---------------------------------------------------------------------------

TEST(Relu, ClampsNegativesOnly) {
  Tensor t(Dims{1, 1, 2, 2}, {-1.5f, 0.0f, 0.25f, 3.0f});
  const Tensor out = blazedet::relu(t);
  EXPECT_FLOAT_EQ(out.data()[0], 0.0f);
  EXPECT_FLOAT_EQ(out.data()[1], 0.0f);
  EXPECT_FLOAT_EQ(out.data()[2], 0.25f);
  EXPECT_FLOAT_EQ(out.data()[3], 3.0f);
}

TEST(Add, RequiresIdenticalDims) {
  Tensor a(1, 2, 2, 1), b(1, 2, 2, 1), c(1, 2, 2, 2);
  a.data() = {1, 2, 3, 4};
  b.data() = {10, 20, 30, 40};
  const Tensor sum = blazedet::add(a, b);
  EXPECT_FLOAT_EQ(sum.data()[3], 44.0f);
  EXPECT_THROW(blazedet::add(a, c), std::invalid_argument);
}

TEST(MaxPool, MatchesNaiveReference) {
  std::mt19937 rng(11);
  for (int stride : {1, 2}) {
    for (int window : {1, 2, 3}) {
      const Tensor input = refops::random_tensor(rng, Dims{1, 9, 7, 3});
      const Tensor actual = blazedet::max_pool2d(input, window, stride);
      const Tensor expected = refops::naive_max_pool2d(input, window, stride);
      ASSERT_TRUE(actual.dims() == expected.dims());
      for (std::size_t i = 0; i < actual.size(); ++i) {
        ASSERT_FLOAT_EQ(actual.data()[i], expected.data()[i]);
      }
    }
  }
}

TEST(MaxPool, Window2Stride2HalvesExtent) {
  std::mt19937 rng(12);
  const Tensor input = refops::random_tensor(rng, Dims{1, 64, 64, 4});
  const Tensor out = blazedet::max_pool2d(input, 2, 2);
  EXPECT_EQ(out.height(), 32);
  EXPECT_EQ(out.width(), 32);
  EXPECT_EQ(out.channels(), 4);
}

TEST(PadChannels, AppendsZeros) {
  Tensor t(Dims{1, 1, 2, 2}, {1, 2, 3, 4});
  const Tensor out = blazedet::pad_channels(t, 4);
  EXPECT_EQ(out.channels(), 4);
  EXPECT_FLOAT_EQ(out.at(0, 0, 0, 0), 1.0f);
  EXPECT_FLOAT_EQ(out.at(0, 0, 0, 1), 2.0f);
  EXPECT_FLOAT_EQ(out.at(0, 0, 0, 2), 0.0f);
  EXPECT_FLOAT_EQ(out.at(0, 0, 1, 3), 0.0f);
  EXPECT_FLOAT_EQ(out.at(0, 0, 1, 0), 3.0f);
  EXPECT_THROW(blazedet::pad_channels(t, 1), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Internal parallelism must not change results.
// ---------------------------------------------------------------------------

TEST(Threading, ParallelConvIsBitIdenticalToSerial) {
  std::mt19937 rng(13);
  const Tensor input = refops::random_tensor(rng, Dims{1, 33, 29, 6});
  const Tensor weights = refops::random_tensor(rng, Dims{5, 5, 6, 7});
  const std::vector<float> bias = refops::random_vector(rng, 7);
  const ConvParams p = params_for(ConvKind::full, 5, 2, Padding::same, 6, 7);

  blazedet::set_num_threads(1);
  const Tensor serial = blazedet::conv2d(input, weights, bias, p);
  blazedet::set_num_threads(4);
  const Tensor parallel = blazedet::conv2d(input, weights, bias, p);
  blazedet::set_num_threads(1);

  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    ASSERT_EQ(serial.data()[i], parallel.data()[i]) << "value " << i;
  }
}

}  // namespace
