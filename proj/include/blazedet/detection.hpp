#pragma once

#include <array>

namespace blazedet {

inline constexpr int kNumKeypoints = 6;

struct Point {
  float x = 0.0f;
  float y = 0.0f;

  bool operator==(const Point&) const = default;
};

// Axis-aligned box in normalized image coordinates (0..1, origin top-left).
struct Box {
  float xmin = 0.0f;
  float ymin = 0.0f;
  float xmax = 0.0f;
  float ymax = 0.0f;

  bool operator==(const Box&) const = default;

  float width() const { return xmax - xmin; }
  float height() const { return ymax - ymin; }
  float area() const {
    const float w = width(), h = height();
    return (w > 0.0f && h > 0.0f) ? w * h : 0.0f;
  }
};

// One detected face: confidence, bounding box, and six facial keypoints
// (left eye, right eye, nose tip, mouth center, left ear tragion, right ear
// tragion), all in normalized image coordinates.
struct Detection {
  float score = 0.0f;
  Box box;
  std::array<Point, kNumKeypoints> keypoints{};
  int anchor_index = -1;
};

}  // namespace blazedet
