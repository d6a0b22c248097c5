#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "blazedet/anchors.hpp"
#include "blazedet/detection.hpp"
#include "blazedet/metrics.hpp"
#include "blazedet/network.hpp"
#include "blazedet/postprocess.hpp"
#include "blazedet/tensor.hpp"
#include "blazedet/weights.hpp"

namespace blazedet {

// Which camera the model variant targets. Only the frontal model is
// implemented; a rear-camera variant would plug in here.
enum class CameraProfile { frontal };

struct DetectorConfig {
  CameraProfile profile = CameraProfile::frontal;
  float min_score = 0.5f;
  TiePolicy tie_policy{};
  std::vector<std::pair<int, int>> jitter_offsets = default_jitter_offsets();
  float min_face_area = 0.0f;  // evaluation-time truth filter, fraction of image
};

inline void validate_config(const DetectorConfig& config) {
  if (!(config.min_score >= 0.0f && config.min_score <= 1.0f)) {
    throw std::invalid_argument("detector config: min_score must lie in [0, 1], got " +
                                std::to_string(config.min_score));
  }
  if (!(config.tie_policy.iou_threshold > 0.0f && config.tie_policy.iou_threshold <= 1.0f)) {
    throw std::invalid_argument("detector config: cluster iou threshold must lie in (0, 1], got " +
                                std::to_string(config.tie_policy.iou_threshold));
  }
  if (config.min_face_area < 0.0f) {
    throw std::invalid_argument("detector config: min_face_area must be >= 0");
  }
}

inline NetworkSpec network_spec_for(CameraProfile) { return frontal_network_spec(); }

// Audits a weight store against the network's expected tensor set: every
// layer present with exactly the declared dims. Extra tensors are ignored.
inline void validate_weights(const WeightStore& store, const NetworkSpec& spec) {
  for (const TensorShapeDef& def : weight_shapes(spec)) {
    if (!store.contains(def.name)) {
      throw std::invalid_argument("weight store is missing tensor '" + def.name + "'");
    }
    const Tensor& tensor = store.get(def.name);
    if (!(tensor.dims() == def.dims)) {
      throw std::invalid_argument("weight tensor '" + def.name + "' has dims " +
                                  tensor.dims().to_string() + ", expected " +
                                  def.dims.to_string());
    }
  }
}

// Full single-image pipeline: feature extraction, raw head predictions,
// anchor decoding, tie resolution. Returns detections sorted by descending
// score.
inline std::vector<Detection> detect(const Tensor& image, const WeightStore& weights,
                                     const DetectorConfig& config = {}) {
  validate_config(config);
  const NetworkSpec spec = network_spec_for(config.profile);
  const FeatureMaps maps = extract_features(image, weights, spec);
  const RawPredictions raw = predict_raw(maps.map16, maps.map8, weights, spec);
  const std::vector<Detection> decoded = decode(raw, generate_anchors(), config.min_score);
  return resolve(decoded, config.tie_policy);
}

// Binds weights and config into a reusable callable for the evaluation
// harness. Validates the weight store once, up front.
inline Detector make_detector(WeightStore weights, const DetectorConfig& config = {}) {
  validate_config(config);
  const NetworkSpec spec = network_spec_for(config.profile);
  validate_weights(weights, spec);
  auto shared = std::make_shared<const WeightStore>(std::move(weights));
  return [shared, config](const Tensor& image) { return detect(image, *shared, config); };
}

}  // namespace blazedet
