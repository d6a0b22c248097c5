#include "blazedet/detector.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "reference_ops.hpp"

using blazedet::Detection;
using blazedet::DetectorConfig;
using blazedet::Tensor;
using blazedet::WeightStore;

namespace {

const float kScoreOf15 = 1.0f / (1.0f + std::exp(-15.0f));

void expect_pulse_detection(const Detection& det, float center_x, float center_y,
                            int anchor_index) {
  EXPECT_EQ(det.anchor_index, anchor_index);
  EXPECT_NEAR(det.score, kScoreOf15, 1e-6f);
  EXPECT_NEAR(det.box.xmin, center_x - 0.05f, 1e-6f);
  EXPECT_NEAR(det.box.ymin, center_y - 0.05f, 1e-6f);
  EXPECT_NEAR(det.box.xmax, center_x + 0.05f, 1e-6f);
  EXPECT_NEAR(det.box.ymax, center_y + 0.05f, 1e-6f);
  EXPECT_NEAR(det.keypoints[0].x, center_x - 0.05f, 1e-6f);
  EXPECT_NEAR(det.keypoints[0].y, center_y, 1e-6f);
  EXPECT_NEAR(det.keypoints[1].x, center_x + 0.05f, 1e-6f);
  EXPECT_NEAR(det.keypoints[1].y, center_y, 1e-6f);
  for (int k = 2; k < blazedet::kNumKeypoints; ++k) {
    EXPECT_NEAR(det.keypoints[k].x, center_x, 1e-6f);
    EXPECT_NEAR(det.keypoints[k].y, center_y, 1e-6f);
  }
  EXPECT_NEAR(blazedet::inter_ocular_distance(det.keypoints), 0.1, 1e-6);
}

TEST(Detect, ConstructedWeightsYieldTheSingleKnownDetection) {
  const WeightStore weights = refops::constructed_weights();
  const auto detections = blazedet::detect(refops::pulse_image(), weights);
  ASSERT_EQ(detections.size(), 1u);
  // Pixel (43, 43) lands in cell (5, 5) of the 16x16 map; slot 0 there is
  // anchor (5 * 16 + 5) * 2 = 170 with center (5.5 / 16, 5.5 / 16).
  expect_pulse_detection(detections[0], 0.34375f, 0.34375f, 170);
}

TEST(Detect, MovingThePulseMovesTheDetectionWithIt) {
  const WeightStore weights = refops::constructed_weights();
  // 32 pixels down = 4 cells on the 16x16 map: row 5 -> row 9.
  const auto detections = blazedet::detect(refops::pulse_image(43 + 32, 43), weights);
  ASSERT_EQ(detections.size(), 1u);
  expect_pulse_detection(detections[0], 0.34375f, 0.59375f, (9 * 16 + 5) * 2);
}

TEST(Detect, BitwiseDeterministicAcrossRunsAndThreadCounts) {
  const WeightStore weights = refops::constructed_weights();
  const Tensor image = refops::pulse_image();
  const auto first = blazedet::detect(image, weights);
  const auto second = blazedet::detect(image, weights);

  blazedet::set_num_threads(3);
  const auto threaded = blazedet::detect(image, weights);
  blazedet::set_num_threads(1);

  for (const auto* other : {&second, &threaded}) {
    ASSERT_EQ(other->size(), first.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
      EXPECT_EQ((*other)[i].score, first[i].score);
      EXPECT_EQ((*other)[i].box.xmin, first[i].box.xmin);
      EXPECT_EQ((*other)[i].box.ymax, first[i].box.ymax);
      EXPECT_EQ((*other)[i].anchor_index, first[i].anchor_index);
      for (int k = 0; k < blazedet::kNumKeypoints; ++k) {
        EXPECT_EQ((*other)[i].keypoints[k].x, first[i].keypoints[k].x);
        EXPECT_EQ((*other)[i].keypoints[k].y, first[i].keypoints[k].y);
      }
    }
  }
}

TEST(Detect, RandomWeightsProduceFiniteSortedClampedOutput) {
  const auto spec = blazedet::frontal_network_spec();
  const WeightStore weights = blazedet::init_random_weights(spec, 3);
  std::mt19937 rng(99);
  Tensor image(1, 128, 128, 3);
  for (float& v : image.data()) v = blazedet::uniform_in(rng, -1.0f, 1.0f);

  const auto detections = blazedet::detect(image, weights);
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const Detection& det = detections[i];
    if (i > 0) EXPECT_LE(det.score, detections[i - 1].score);
    EXPECT_TRUE(std::isfinite(det.score));
    EXPECT_GE(det.score, 0.5f);  // the decode cutoff carries through resolution
    EXPECT_LE(det.score, 1.0f);
    EXPECT_GE(det.anchor_index, 0);
    EXPECT_LT(det.anchor_index, blazedet::kAnchorCount);
    // Box corners were clamped to the unit square before blending, which is
    // convex, so they stay inside it.
    EXPECT_GE(det.box.xmin, 0.0f);
    EXPECT_GE(det.box.ymin, 0.0f);
    EXPECT_LE(det.box.xmax, 1.0f);
    EXPECT_LE(det.box.ymax, 1.0f);
    for (const auto& kp : det.keypoints) {
      EXPECT_TRUE(std::isfinite(kp.x));
      EXPECT_TRUE(std::isfinite(kp.y));
    }
  }
}

TEST(Detect, WeightValidationNamesTheProblemTensor) {
  const auto spec = blazedet::frontal_network_spec();
  const WeightStore good = refops::constructed_weights();

  // Missing tensor.
  WeightStore missing;
  for (const std::string& name : good.names()) {
    if (name != "head8.bias") missing.put(name, good.get(name));
  }
  try {
    blazedet::validate_weights(missing, spec);
    FAIL() << "expected a missing-tensor error";
  } catch (const std::invalid_argument& error) {
    EXPECT_NE(std::string(error.what()).find("head8.bias"), std::string::npos) << error.what();
  }

  // Wrong dims.
  WeightStore wrong = good;
  wrong.put("conv1.weight", Tensor(3, 3, 3, 24));
  try {
    blazedet::validate_weights(wrong, spec);
    FAIL() << "expected a dims error";
  } catch (const std::invalid_argument& error) {
    EXPECT_NE(std::string(error.what()).find("conv1.weight"), std::string::npos)
        << error.what();
  }

  // Extra tensors are ignored.
  WeightStore extra = good;
  extra.put("optimizer.momentum", Tensor(1, 1, 1, 4));
  EXPECT_NO_THROW(blazedet::validate_weights(extra, spec));
  EXPECT_EQ(blazedet::detect(refops::pulse_image(), extra).size(), 1u);
}

TEST(Detect, ConfigValidation) {
  const WeightStore weights = refops::constructed_weights();
  const Tensor image = refops::pulse_image();

  DetectorConfig config;
  config.min_score = -0.1f;
  EXPECT_THROW(blazedet::detect(image, weights, config), std::invalid_argument);
  config.min_score = 1.5f;
  EXPECT_THROW(blazedet::detect(image, weights, config), std::invalid_argument);

  config = DetectorConfig{};
  config.tie_policy.iou_threshold = 0.0f;
  EXPECT_THROW(blazedet::detect(image, weights, config), std::invalid_argument);

  config = DetectorConfig{};
  config.min_face_area = -1.0f;
  EXPECT_THROW(blazedet::validate_config(config), std::invalid_argument);

  // A higher cutoff than sigmoid(15) filters the lone detection out.
  config = DetectorConfig{};
  config.min_score = 1.0f;
  EXPECT_TRUE(blazedet::detect(image, weights, config).empty());
}

TEST(Detect, MakeDetectorBindsWeightsAndValidatesUpFront) {
  const blazedet::Detector detector = blazedet::make_detector(refops::constructed_weights());
  const auto detections = detector(refops::pulse_image());
  ASSERT_EQ(detections.size(), 1u);
  expect_pulse_detection(detections[0], 0.34375f, 0.34375f, 170);

  WeightStore incomplete;
  incomplete.put("conv1.weight", Tensor(5, 5, 3, 24));
  EXPECT_THROW(blazedet::make_detector(std::move(incomplete)), std::invalid_argument);
}

TEST(Detect, SuppressionModeKeepsTheSeedDetection) {
  const WeightStore weights = refops::constructed_weights();
  DetectorConfig config;
  config.tie_policy.mode = blazedet::TieMode::suppression;
  const auto detections = blazedet::detect(refops::pulse_image(), weights, config);
  ASSERT_EQ(detections.size(), 1u);
  expect_pulse_detection(detections[0], 0.34375f, 0.34375f, 170);
}

}  // namespace
