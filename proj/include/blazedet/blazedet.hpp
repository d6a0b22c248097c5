#pragma once

// Umbrella header for the whole face-detection stack: tensor primitives, the
// feature-extractor network and heads, anchor decoding, tie resolution,
// evaluation metrics, and the analytic cost/receptive-field models.

#include "blazedet/analysis.hpp"
#include "blazedet/anchors.hpp"
#include "blazedet/detection.hpp"
#include "blazedet/detector.hpp"
#include "blazedet/image.hpp"
#include "blazedet/metrics.hpp"
#include "blazedet/network.hpp"
#include "blazedet/postprocess.hpp"
#include "blazedet/tensor.hpp"
#include "blazedet/util.hpp"
#include "blazedet/weights.hpp"
