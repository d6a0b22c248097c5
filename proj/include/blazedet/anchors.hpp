#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "blazedet/detection.hpp"

namespace blazedet {

inline constexpr int kMap16Grid = 16;
inline constexpr int kMap8Grid = 8;
inline constexpr int kAnchorsPerCell16 = 2;
inline constexpr int kAnchorsPerCell8 = 6;
inline constexpr int kMap16AnchorCount = kMap16Grid * kMap16Grid * kAnchorsPerCell16;  // 512
inline constexpr int kMap8AnchorCount = kMap8Grid * kMap8Grid * kAnchorsPerCell8;      // 384
inline constexpr int kAnchorCount = kMap16AnchorCount + kMap8AnchorCount;              // 896

// Regressor outputs are expressed in 1/128ths of the anchor box — the network
// input resolution.
inline constexpr float kRegressorScale = 128.0f;

// One reference box: which grid it sits on, its cell, and its center and size
// in normalized image coordinates. Every anchor spans the whole unit square
// (w = h = 1); scale variation is learned by the regressors instead.
struct Anchor {
  int grid = 0;
  int row = 0;
  int col = 0;
  float cx = 0.0f;
  float cy = 0.0f;
  float w = 1.0f;
  float h = 1.0f;
};

// Flat anchor order: 16x16 cells row-major with their 2 slots innermost,
// then 8x8 cells row-major with their 6 slots innermost. This matches the
// row order of the raw prediction tensor.
inline int anchor_row_index(int grid, int row, int col, int slot) {
  if (grid == kMap16Grid) {
    if (row < 0 || row >= kMap16Grid || col < 0 || col >= kMap16Grid || slot < 0 ||
        slot >= kAnchorsPerCell16) {
      throw std::invalid_argument("anchor_row_index: cell out of range for 16x16 grid");
    }
    return (row * kMap16Grid + col) * kAnchorsPerCell16 + slot;
  }
  if (grid == kMap8Grid) {
    if (row < 0 || row >= kMap8Grid || col < 0 || col >= kMap8Grid || slot < 0 ||
        slot >= kAnchorsPerCell8) {
      throw std::invalid_argument("anchor_row_index: cell out of range for 8x8 grid");
    }
    return kMap16AnchorCount + (row * kMap8Grid + col) * kAnchorsPerCell8 + slot;
  }
  throw std::invalid_argument("anchor_row_index: grid must be 16 or 8, got " +
                              std::to_string(grid));
}

inline std::vector<Anchor> generate_anchors() {
  std::vector<Anchor> anchors;
  anchors.reserve(kAnchorCount);
  for (int row = 0; row < kMap16Grid; ++row) {
    for (int col = 0; col < kMap16Grid; ++col) {
      for (int slot = 0; slot < kAnchorsPerCell16; ++slot) {
        anchors.push_back(Anchor{kMap16Grid, row, col, (col + 0.5f) / kMap16Grid,
                                 (row + 0.5f) / kMap16Grid, 1.0f, 1.0f});
      }
    }
  }
  for (int row = 0; row < kMap8Grid; ++row) {
    for (int col = 0; col < kMap8Grid; ++col) {
      for (int slot = 0; slot < kAnchorsPerCell8; ++slot) {
        anchors.push_back(Anchor{kMap8Grid, row, col, (col + 0.5f) / kMap8Grid,
                                 (row + 0.5f) / kMap8Grid, 1.0f, 1.0f});
      }
    }
  }
  return anchors;
}

// Raw network outputs, one row per anchor: a confidence logit plus 16
// regressor values [dx, dy, dw, dh, k1x, k1y, ..., k6x, k6y].
struct RawPredictions {
  std::vector<float> scores;
  std::vector<std::array<float, 16>> regressors;
};

// Logistic with the logit clamped to +-80, where the result already saturates
// in float, so extreme network outputs cannot produce inf/nan.
inline float logistic(float logit) {
  const float clamped = std::clamp(logit, -80.0f, 80.0f);
  return 1.0f / (1.0f + std::exp(-clamped));
}

inline float clamp_unit(float v) { return std::clamp(v, 0.0f, 1.0f); }

// Turns raw per-anchor rows into detections. Offsets and sizes are scaled by
// 1/128 of the owning anchor; box corners are clamped to the unit square;
// keypoints stay relative to the anchor center and are left unclamped; rows
// scoring below min_score are dropped.
inline std::vector<Detection> decode(const RawPredictions& raw,
                                     const std::vector<Anchor>& anchors,
                                     float min_score = 0.5f) {
  if (raw.scores.size() != anchors.size() || raw.regressors.size() != anchors.size()) {
    throw std::invalid_argument("decode: got " + std::to_string(raw.scores.size()) +
                                " score rows and " + std::to_string(raw.regressors.size()) +
                                " regressor rows for " + std::to_string(anchors.size()) +
                                " anchors");
  }
  std::vector<Detection> detections;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const float score = logistic(raw.scores[i]);
    if (score < min_score) continue;

    const Anchor& anchor = anchors[i];
    const std::array<float, 16>& reg = raw.regressors[i];
    const float cx = anchor.cx + reg[0] / kRegressorScale * anchor.w;
    const float cy = anchor.cy + reg[1] / kRegressorScale * anchor.h;
    const float w = reg[2] / kRegressorScale * anchor.w;
    const float h = reg[3] / kRegressorScale * anchor.h;

    Detection det;
    det.score = score;
    det.box.xmin = clamp_unit(cx - 0.5f * w);
    det.box.ymin = clamp_unit(cy - 0.5f * h);
    det.box.xmax = clamp_unit(cx + 0.5f * w);
    det.box.ymax = clamp_unit(cy + 0.5f * h);
    for (int k = 0; k < kNumKeypoints; ++k) {
      det.keypoints[k].x = anchor.cx + reg[4 + 2 * k] / kRegressorScale * anchor.w;
      det.keypoints[k].y = anchor.cy + reg[5 + 2 * k] / kRegressorScale * anchor.h;
    }
    det.anchor_index = static_cast<int>(i);
    detections.push_back(det);
  }
  return detections;
}

}  // namespace blazedet
