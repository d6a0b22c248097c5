#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "blazedet/detection.hpp"
#include "blazedet/image.hpp"
#include "blazedet/postprocess.hpp"
#include "blazedet/util.hpp"

namespace blazedet {

// Any face detector working on preprocessed input tensors. Used so the
// metrics can evaluate the real pipeline and synthetic test detectors alike.
using Detector = std::function<std::vector<Detection>(const Tensor&)>;

struct GroundTruthFace {
  Box box;
  std::array<Point, kNumKeypoints> keypoints{};
};

struct GroundTruth {
  std::string image_id;
  std::vector<GroundTruthFace> faces;
};

// ---------------------------------------------------------------------------
// Matching and average precision.
// ---------------------------------------------------------------------------

struct ImageMatches {
  // Per prediction, in descending-score order: (score, matched a truth face).
  std::vector<std::pair<float, bool>> scored_labels;
  // Matched (prediction index, truth index) pairs, indices into the inputs.
  std::vector<std::pair<int, int>> pairs;
};

// Greedy one-to-one matching: predictions in descending score order each take
// the highest-IoU still-unmatched truth face, counting as a match only at
// IoU >= match_iou.
inline ImageMatches match_predictions(const std::vector<Detection>& predictions,
                                      const std::vector<GroundTruthFace>& faces,
                                      float match_iou = 0.5f) {
  std::vector<int> order(predictions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return detail::detection_before(predictions[a], predictions[b]);
  });

  ImageMatches result;
  std::vector<bool> taken(faces.size(), false);
  for (int pred_idx : order) {
    int best = -1;
    float best_iou = 0.0f;
    for (std::size_t t = 0; t < faces.size(); ++t) {
      if (taken[t]) continue;
      const float overlap = iou(predictions[pred_idx].box, faces[t].box);
      if (overlap > best_iou) {
        best_iou = overlap;
        best = static_cast<int>(t);
      }
    }
    const bool matched = best >= 0 && best_iou >= match_iou;
    if (matched) {
      taken[best] = true;
      result.pairs.emplace_back(pred_idx, best);
    }
    result.scored_labels.emplace_back(predictions[pred_idx].score, matched);
  }
  return result;
}

namespace detail {

// Area under the precision-recall curve, summed over distinct score
// thresholds: sum of (recall step) x (precision at that threshold). Grouping
// equal scores keeps the result independent of input order.
inline double ap_from_labels(std::vector<std::pair<float, bool>> scored_labels,
                             std::size_t truth_count) {
  std::sort(scored_labels.begin(), scored_labels.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0, seen = 0, i = 0;
  while (i < scored_labels.size()) {
    std::size_t j = i;
    while (j < scored_labels.size() && scored_labels[j].first == scored_labels[i].first) {
      tp += scored_labels[j].second ? 1u : 0u;
      ++seen;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(truth_count);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

}  // namespace detail

// Dataset-level AP at the given match threshold. Degenerate conventions: no
// truth faces anywhere -> 0 if there are predictions, 1 if there are none;
// used_empty_convention (when non-null) reports that one of these fired.
inline double average_precision(const std::vector<std::vector<Detection>>& predictions,
                                const std::vector<GroundTruth>& truths,
                                float match_iou = 0.5f,
                                bool* used_empty_convention = nullptr) {
  if (predictions.size() != truths.size()) {
    throw std::invalid_argument("average_precision: " + std::to_string(predictions.size()) +
                                " prediction lists vs " + std::to_string(truths.size()) +
                                " truth images");
  }
  if (used_empty_convention != nullptr) *used_empty_convention = false;

  std::vector<std::pair<float, bool>> scored_labels;
  std::size_t truth_count = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    for (const auto& det : predictions[i]) {
      if (!(det.score >= 0.0f && det.score <= 1.0f)) {
        throw std::invalid_argument("average_precision: prediction score " +
                                    std::to_string(det.score) + " lies outside [0, 1]");
      }
    }
    truth_count += truths[i].faces.size();
    const ImageMatches matches = match_predictions(predictions[i], truths[i].faces, match_iou);
    scored_labels.insert(scored_labels.end(), matches.scored_labels.begin(),
                         matches.scored_labels.end());
  }

  if (truth_count == 0) {
    if (used_empty_convention != nullptr) *used_empty_convention = true;
    return scored_labels.empty() ? 1.0 : 0.0;
  }
  return detail::ap_from_labels(std::move(scored_labels), truth_count);
}

// ---------------------------------------------------------------------------
// Keypoint regression error.
// ---------------------------------------------------------------------------

// Distance between the two eye-center keypoints (slots 0 and 1).
inline double inter_ocular_distance(const std::array<Point, kNumKeypoints>& keypoints) {
  const double dx = static_cast<double>(keypoints[0].x) - keypoints[1].x;
  const double dy = static_cast<double>(keypoints[0].y) - keypoints[1].y;
  const double dist = std::sqrt(dx * dx + dy * dy);
  if (dist == 0.0) {
    throw std::invalid_argument("inter_ocular_distance: eye keypoints coincide (degenerate face)");
  }
  return dist;
}

// Median over all matched faces and all 12 keypoint coordinates of the
// absolute prediction error, each scaled by the matched truth face's
// inter-ocular distance.
inline double regression_error(const std::vector<std::vector<Detection>>& predictions,
                               const std::vector<GroundTruth>& truths,
                               float match_iou = 0.5f) {
  if (predictions.size() != truths.size()) {
    throw std::invalid_argument("regression_error: " + std::to_string(predictions.size()) +
                                " prediction lists vs " + std::to_string(truths.size()) +
                                " truth images");
  }
  std::vector<double> coordinate_errors;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const ImageMatches matches = match_predictions(predictions[i], truths[i].faces, match_iou);
    for (const auto& [pred_idx, truth_idx] : matches.pairs) {
      const GroundTruthFace& face = truths[i].faces[truth_idx];
      const Detection& det = predictions[i][pred_idx];
      const double iod = inter_ocular_distance(face.keypoints);
      for (int k = 0; k < kNumKeypoints; ++k) {
        coordinate_errors.push_back(
            std::abs(static_cast<double>(det.keypoints[k].x) - face.keypoints[k].x) / iod);
        coordinate_errors.push_back(
            std::abs(static_cast<double>(det.keypoints[k].y) - face.keypoints[k].y) / iod);
      }
    }
  }
  if (coordinate_errors.empty()) {
    throw std::invalid_argument("regression_error: no predictions matched any truth face");
  }
  return median_of(std::move(coordinate_errors));
}

// ---------------------------------------------------------------------------
// Translation-jitter metric.
// ---------------------------------------------------------------------------

// The 8 unit shifts around the origin plus the 4 axis-aligned 2-pixel shifts.
inline std::vector<std::pair<int, int>> default_jitter_offsets() {
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx != 0 || dy != 0) offsets.emplace_back(dx, dy);
    }
  }
  offsets.emplace_back(2, 0);
  offsets.emplace_back(-2, 0);
  offsets.emplace_back(0, 2);
  offsets.emplace_back(0, -2);
  return offsets;
}

// Bookkeeping for one jitter run; sum_squared/coords pool across images.
struct JitterStats {
  int matched = 0;    // displaced detections paired with an original
  int unmatched = 0;  // displaced detections excluded from the RMS
  double sum_squared = 0.0;
  std::size_t coords = 0;

  void merge(const JitterStats& other) {
    matched += other.matched;
    unmatched += other.unmatched;
    sum_squared += other.sum_squared;
    coords += other.coords;
  }

  double rms() const {
    if (coords == 0) {
      throw std::invalid_argument("jitter: no displaced detection matched an original one");
    }
    return std::sqrt(sum_squared / static_cast<double>(coords));
  }
};

// Prediction stability under small translations: runs the detector on the
// original image and on edge-replicated translated copies, cancels each
// translation out of the displaced predictions, pairs them with the original
// detections by highest IoU (>= 0.3), and returns the RMS of all paired box
// and keypoint coordinate differences, each scaled by the original
// detection's inter-ocular distance.
inline double jitter_metric(const Detector& detector, const Tensor& image,
                            const std::vector<std::pair<int, int>>& offsets,
                            JitterStats* stats = nullptr) {
  const std::vector<Detection> originals = detector(image);
  if (originals.empty()) {
    throw std::invalid_argument("jitter_metric: detector found nothing on the original image");
  }
  std::vector<double> original_iod(originals.size());
  for (std::size_t i = 0; i < originals.size(); ++i) {
    original_iod[i] = inter_ocular_distance(originals[i].keypoints);
  }

  JitterStats local;
  const float w = static_cast<float>(image.width());
  const float h = static_cast<float>(image.height());
  for (const auto& [dx, dy] : offsets) {
    std::vector<Detection> displaced = detector(translate_image(image, dx, dy));
    for (Detection& det : displaced) {
      const float sx = static_cast<float>(dx) / w;
      const float sy = static_cast<float>(dy) / h;
      det.box.xmin -= sx;
      det.box.xmax -= sx;
      det.box.ymin -= sy;
      det.box.ymax -= sy;
      for (Point& kp : det.keypoints) {
        kp.x -= sx;
        kp.y -= sy;
      }

      int best = -1;
      float best_iou = 0.0f;
      for (std::size_t i = 0; i < originals.size(); ++i) {
        const float overlap = iou(det.box, originals[i].box);
        if (overlap > best_iou) {
          best_iou = overlap;
          best = static_cast<int>(i);
        }
      }
      if (best < 0 || best_iou < 0.3f) {
        ++local.unmatched;
        continue;
      }
      ++local.matched;
      const Detection& ref = originals[best];
      const double iod = original_iod[best];
      const double diffs[16] = {
          (det.box.xmin - ref.box.xmin) / iod,       (det.box.ymin - ref.box.ymin) / iod,
          (det.box.xmax - ref.box.xmax) / iod,       (det.box.ymax - ref.box.ymax) / iod,
          (det.keypoints[0].x - ref.keypoints[0].x) / iod,
          (det.keypoints[0].y - ref.keypoints[0].y) / iod,
          (det.keypoints[1].x - ref.keypoints[1].x) / iod,
          (det.keypoints[1].y - ref.keypoints[1].y) / iod,
          (det.keypoints[2].x - ref.keypoints[2].x) / iod,
          (det.keypoints[2].y - ref.keypoints[2].y) / iod,
          (det.keypoints[3].x - ref.keypoints[3].x) / iod,
          (det.keypoints[3].y - ref.keypoints[3].y) / iod,
          (det.keypoints[4].x - ref.keypoints[4].x) / iod,
          (det.keypoints[4].y - ref.keypoints[4].y) / iod,
          (det.keypoints[5].x - ref.keypoints[5].x) / iod,
          (det.keypoints[5].y - ref.keypoints[5].y) / iod,
      };
      for (double d : diffs) local.sum_squared += d * d;
      local.coords += 16;
    }
  }
  if (stats != nullptr) *stats = local;
  return local.rms();
}

inline double jitter_metric(const Detector& detector, const Tensor& image) {
  return jitter_metric(detector, image, default_jitter_offsets());
}

// ---------------------------------------------------------------------------
// Dataset harness.
// ---------------------------------------------------------------------------

struct DatasetEntry {
  std::string image_path;
  GroundTruth truth;
};

// Text index, one image per line:
//   image_path xmin ymin xmax ymax kx1 ky1 ... kx6 ky6 [; 16 more per face]
// Coordinates normalized to [0, 1]; '#' starts a comment; image paths are
// resolved relative to the index file's directory.
inline std::vector<DatasetEntry> parse_dataset_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open dataset index '" + path + "'");
  }
  const std::filesystem::path base = std::filesystem::path(path).parent_path();

  std::vector<DatasetEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string image_path;
    if (!(fields >> image_path)) continue;  // blank line

    DatasetEntry entry;
    entry.image_path = (base / image_path).string();
    entry.truth.image_id = image_path;
    while (true) {
      GroundTruthFace face;
      float values[16];
      int got = 0;
      for (; got < 16; ++got) {
        std::string token;
        if (!(fields >> token)) break;
        if (token == ";") {
          --got;  // separator, not a value
          break;
        }
        try {
          values[got] = std::stof(token);
        } catch (const std::exception&) {
          throw std::runtime_error("dataset index line " + std::to_string(line_no) +
                                   ": '" + token + "' is not a number");
        }
      }
      if (got == 0 && entry.truth.faces.empty()) {
        throw std::runtime_error("dataset index line " + std::to_string(line_no) +
                                 ": image entry has no face record");
      }
      if (got == 0) break;  // trailing separator
      if (got != 16) {
        throw std::runtime_error("dataset index line " + std::to_string(line_no) +
                                 ": face record has " + std::to_string(got) +
                                 " values, expected 16");
      }
      face.box = Box{values[0], values[1], values[2], values[3]};
      for (int k = 0; k < kNumKeypoints; ++k) {
        face.keypoints[k] = Point{values[4 + 2 * k], values[5 + 2 * k]};
      }
      entry.truth.faces.push_back(face);
      // Peek for a face separator; anything else on the line is an error
      // caught by the next 16-value read.
      std::string sep;
      if (!(fields >> sep)) break;
      if (sep != ";") {
        throw std::runtime_error("dataset index line " + std::to_string(line_no) +
                                 ": expected ';' between faces, got '" + sep + "'");
      }
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

struct EvalOptions {
  float match_iou = 0.5f;
  // Truth faces whose box area (fraction of the image) is below this are
  // ignored, mirroring evaluation protocols that only score large faces.
  float min_face_area = 0.0f;
  bool compute_jitter = false;
  std::vector<std::pair<int, int>> jitter_offsets = default_jitter_offsets();
  int threads = 1;
};

struct EvalReport {
  double average_precision = 0.0;
  bool empty_truth_convention = false;  // AP came from an empty-dataset convention
  std::optional<double> median_regression_error_iod;  // absent when nothing matched
  std::optional<double> jitter_iod;                   // absent unless requested and measurable
  int images = 0;
  int truth_faces = 0;
  int detections = 0;
  int matched = 0;
  JitterStats jitter_stats;
  int jitter_images_skipped = 0;  // images with no original detection
  // Per image, the matched (prediction index, truth index) pairs.
  std::vector<std::vector<std::pair<int, int>>> per_image_matches;
};

namespace detail {

struct ImageEvalResult {
  std::vector<Detection> detections;
  std::vector<GroundTruthFace> kept_faces;
  JitterStats jitter;
  bool jitter_skipped = false;
};

}  // namespace detail

// Runs the detector over every dataset image and aggregates the three
// metrics. Images are processed independently (optionally on several
// threads); aggregation only sums and merges, so thread count cannot change
// the report.
inline EvalReport evaluate_dataset(const Detector& detector,
                                   const std::vector<DatasetEntry>& entries,
                                   const EvalOptions& options = {}) {
  const int workers = std::max(1, options.threads);
  std::vector<detail::ImageEvalResult> results(entries.size());

  const auto process = [&](std::size_t index) {
    const DatasetEntry& entry = entries[index];
    detail::ImageEvalResult result;
    const Tensor image = load_image(entry.image_path);
    result.detections = detector(image);
    for (const GroundTruthFace& face : entry.truth.faces) {
      if (face.box.area() >= options.min_face_area) result.kept_faces.push_back(face);
    }
    if (options.compute_jitter) {
      try {
        jitter_metric(detector, image, options.jitter_offsets, &result.jitter);
      } catch (const std::invalid_argument&) {
        result.jitter_skipped = true;
      }
    }
    results[index] = std::move(result);
  };

  if (workers == 1 || entries.size() <= 1) {
    for (std::size_t i = 0; i < entries.size(); ++i) process(i);
  } else {
    std::vector<std::future<void>> futures;
    std::atomic<std::size_t> next{0};
    const std::size_t pool =
        std::min(static_cast<std::size_t>(workers), entries.size());
    for (std::size_t t = 0; t < pool; ++t) {
      futures.push_back(std::async(std::launch::async, [&] {
        for (std::size_t i = next.fetch_add(1); i < entries.size(); i = next.fetch_add(1)) {
          process(i);
        }
      }));
    }
    for (auto& f : futures) f.get();  // propagate the first exception, if any
  }

  EvalReport report;
  report.images = static_cast<int>(entries.size());
  std::vector<std::pair<float, bool>> scored_labels;
  std::vector<double> coordinate_errors;
  std::size_t truth_count = 0;
  for (const detail::ImageEvalResult& result : results) {
    truth_count += result.kept_faces.size();
    report.detections += static_cast<int>(result.detections.size());

    const ImageMatches matches =
        match_predictions(result.detections, result.kept_faces, options.match_iou);
    scored_labels.insert(scored_labels.end(), matches.scored_labels.begin(),
                         matches.scored_labels.end());
    report.per_image_matches.push_back(matches.pairs);
    report.matched += static_cast<int>(matches.pairs.size());
    for (const auto& [pred_idx, truth_idx] : matches.pairs) {
      const GroundTruthFace& face = result.kept_faces[truth_idx];
      const Detection& det = result.detections[pred_idx];
      const double iod = inter_ocular_distance(face.keypoints);
      for (int k = 0; k < kNumKeypoints; ++k) {
        coordinate_errors.push_back(
            std::abs(static_cast<double>(det.keypoints[k].x) - face.keypoints[k].x) / iod);
        coordinate_errors.push_back(
            std::abs(static_cast<double>(det.keypoints[k].y) - face.keypoints[k].y) / iod);
      }
    }

    if (options.compute_jitter) {
      if (result.jitter_skipped) {
        ++report.jitter_images_skipped;
      } else {
        report.jitter_stats.merge(result.jitter);
      }
    }
  }
  report.truth_faces = static_cast<int>(truth_count);

  if (truth_count == 0) {
    report.empty_truth_convention = true;
    report.average_precision = scored_labels.empty() ? 1.0 : 0.0;
  } else {
    report.average_precision = detail::ap_from_labels(std::move(scored_labels), truth_count);
  }
  if (!coordinate_errors.empty()) {
    report.median_regression_error_iod = median_of(std::move(coordinate_errors));
  }
  if (options.compute_jitter && report.jitter_stats.coords > 0) {
    report.jitter_iod = report.jitter_stats.rms();
  }
  return report;
}

}  // namespace blazedet
