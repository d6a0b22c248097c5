#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "blazedet/detection.hpp"

namespace blazedet {

enum class TieMode {
  suppression,  // classical greedy NMS: keep the top detection of each cluster
  blending,     // emit the score-weighted mean of each cluster instead
};

// How overlapping detections of one face are resolved into a single output.
struct TiePolicy {
  TieMode mode = TieMode::blending;
  float iou_threshold = 0.3f;
};

inline float iou(const Box& a, const Box& b) {
  const float ix = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const float iy = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  const float inter = (ix > 0.0f && iy > 0.0f) ? ix * iy : 0.0f;
  const float uni = a.area() + b.area() - inter;
  return uni > 0.0f ? inter / uni : 0.0f;
}

namespace detail {

// Descending score; equal scores resolved by lower anchor index, then by box
// coordinates so that synthetic detections without anchors still sort
// deterministically regardless of input order.
inline bool detection_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.anchor_index != b.anchor_index) return a.anchor_index < b.anchor_index;
  return std::tie(a.box.xmin, a.box.ymin, a.box.xmax, a.box.ymax) <
         std::tie(b.box.xmin, b.box.ymin, b.box.xmax, b.box.ymax);
}

}  // namespace detail

// Greedy single-pass tie resolution. Detections are visited in descending
// score order; each round the best remaining detection seeds a cluster of
// everything overlapping it at iou >= threshold (itself included), and the
// cluster is emitted as one detection:
//   suppression — the seed, unchanged;
//   blending    — score-weighted mean of the cluster's box and keypoint
//                 coordinates, score = cluster maximum, anchor of the seed.
inline std::vector<Detection> resolve(const std::vector<Detection>& detections,
                                      const TiePolicy& policy) {
  if (!(policy.iou_threshold > 0.0f && policy.iou_threshold <= 1.0f)) {
    throw std::invalid_argument("resolve: iou_threshold must lie in (0, 1], got " +
                                std::to_string(policy.iou_threshold));
  }
  for (const Detection& det : detections) {
    if (!(det.score >= 0.0f && det.score <= 1.0f)) {
      throw std::invalid_argument("resolve: detection score " + std::to_string(det.score) +
                                  " lies outside [0, 1]");
    }
  }

  std::vector<Detection> ordered = detections;
  std::sort(ordered.begin(), ordered.end(), detail::detection_before);

  std::vector<Detection> output;
  std::vector<bool> consumed(ordered.size(), false);
  for (std::size_t top = 0; top < ordered.size(); ++top) {
    if (consumed[top]) continue;

    std::vector<std::size_t> cluster;
    for (std::size_t i = top; i < ordered.size(); ++i) {
      if (consumed[i]) continue;
      if (i == top || iou(ordered[top].box, ordered[i].box) >= policy.iou_threshold) {
        cluster.push_back(i);
        consumed[i] = true;
      }
    }

    if (policy.mode == TieMode::suppression) {
      output.push_back(ordered[top]);
      continue;
    }

    Detection blended = ordered[top];  // score, anchor index, and fallback coords
    double weight_sum = 0.0;
    for (std::size_t i : cluster) weight_sum += ordered[i].score;
    double coords[4 + 2 * kNumKeypoints] = {};
    for (std::size_t i : cluster) {
      // All-zero scores degrade to an unweighted mean.
      const double w = weight_sum > 0.0 ? ordered[i].score / weight_sum
                                        : 1.0 / static_cast<double>(cluster.size());
      const Detection& d = ordered[i];
      coords[0] += w * d.box.xmin;
      coords[1] += w * d.box.ymin;
      coords[2] += w * d.box.xmax;
      coords[3] += w * d.box.ymax;
      for (int k = 0; k < kNumKeypoints; ++k) {
        coords[4 + 2 * k] += w * d.keypoints[k].x;
        coords[5 + 2 * k] += w * d.keypoints[k].y;
      }
    }
    blended.box = Box{static_cast<float>(coords[0]), static_cast<float>(coords[1]),
                      static_cast<float>(coords[2]), static_cast<float>(coords[3])};
    for (int k = 0; k < kNumKeypoints; ++k) {
      blended.keypoints[k] = Point{static_cast<float>(coords[4 + 2 * k]),
                                   static_cast<float>(coords[5 + 2 * k])};
    }
    output.push_back(blended);
  }
  return output;
}

}  // namespace blazedet
