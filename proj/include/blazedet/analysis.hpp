#pragma once

#include <algorithm>
#include <chrono>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "blazedet/network.hpp"
#include "blazedet/tensor.hpp"
#include "blazedet/util.hpp"
#include "blazedet/weights.hpp"

namespace blazedet {

// ---------------------------------------------------------------------------
// Multiply-add cost model.
// ---------------------------------------------------------------------------

// Multiply-add count of one convolution on a square out_extent x out_extent
// output grid:
//   depthwise: out^2 * c * k^2
//   pointwise: out^2 * c_in * c_out
//   full:      out^2 * c_in * c_out * k^2
inline long long mac_count(const ConvParams& params, int out_extent) {
  validate_params(params);
  if (out_extent < 1) {
    throw std::invalid_argument("mac_count: output extent must be >= 1");
  }
  const long long spatial = static_cast<long long>(out_extent) * out_extent;
  const long long kernel = static_cast<long long>(params.kernel_h) * params.kernel_w;
  switch (params.kind) {
    case ConvKind::depthwise:
      return spatial * params.in_channels * kernel;
    case ConvKind::pointwise:
      return spatial * params.in_channels * params.out_channels;
    case ConvKind::full:
      return spatial * params.in_channels * params.out_channels * kernel;
  }
  return 0;
}

struct LayerCost {
  std::string name;
  ConvKind kind = ConvKind::full;
  int out_extent = 0;
  long long macs = 0;
  bool head = false;
};

struct CostReport {
  std::vector<LayerCost> layers;
  long long total_macs = 0;
  long long extractor_macs = 0;
  long long head_macs = 0;
  int dispatch_count = 0;            // primitive convolutions, heads included
  int extractor_dispatch_count = 0;  // primitive convolutions in the ladder
};

// Sums mac_count over every primitive convolution of the expanded network.
// Structure-only: weight values never enter.
inline CostReport network_cost(const NetworkSpec& spec) {
  CostReport report;
  for (const LayerDef& layer : expand_layers(spec)) {
    const int out_extent = conv_output_extent(layer.in_extent, layer.params.kernel_h,
                                              layer.params.stride, layer.params.padding);
    const long long macs = mac_count(layer.params, out_extent);
    report.layers.push_back({layer.name, layer.params.kind, out_extent, macs, layer.head});
    report.total_macs += macs;
    if (layer.head) {
      report.head_macs += macs;
    } else {
      report.extractor_macs += macs;
      ++report.extractor_dispatch_count;
    }
    ++report.dispatch_count;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Receptive field.
// ---------------------------------------------------------------------------

struct RFStep {
  std::string name;
  int kernel = 1;
  int stride = 1;
  int out_extent = 0;
  long long rf = 1;    // receptive field in input pixels after this layer
  long long jump = 1;  // cumulative stride after this layer
};

struct RFReport {
  std::vector<RFStep> steps;
  long long rf_map16 = 0;  // receptive field at the half-resolution head map
  long long rf_map8 = 0;   // receptive field at the final head map
};

// Standard receptive-field recursion over the extractor's primitive
// convolutions: rf_0 = 1, j_0 = 1; rf_l = rf_{l-1} + (k - 1) * j_{l-1};
// j_l = j_{l-1} * stride.
inline RFReport receptive_field(const NetworkSpec& spec) {
  RFReport report;
  long long rf = 1, jump = 1;
  for (const LayerDef& layer : expand_layers(spec, /*include_heads=*/false)) {
    const int out_extent = conv_output_extent(layer.in_extent, layer.params.kernel_h,
                                              layer.params.stride, layer.params.padding);
    rf += static_cast<long long>(layer.params.kernel_h - 1) * jump;
    jump *= layer.params.stride;
    report.steps.push_back(
        {layer.name, layer.params.kernel_h, layer.params.stride, out_extent, rf, jump});
  }
  if (!report.steps.empty()) {
    const int final_extent = report.steps.back().out_extent;
    report.rf_map8 = report.steps.back().rf;
    for (const RFStep& step : report.steps) {
      if (step.out_extent == 2 * final_extent) report.rf_map16 = step.rf;
    }
  }
  return report;
}

// Copy of the spec with every BlazeBlock depthwise kernel replaced; the stem
// convolution is untouched. Supports the 5x5-vs-3x3 comparison.
inline NetworkSpec with_dw_kernel(NetworkSpec spec, int kernel) {
  if (kernel < 1) {
    throw std::invalid_argument("with_dw_kernel: kernel must be >= 1");
  }
  for (BlockSpec& block : spec.blocks) {
    if (block.kind != BlockKind::conv) block.kernel = kernel;
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Wall-clock layer timing.
// ---------------------------------------------------------------------------

struct LayerTiming {
  std::string name;
  double median_ms = 0.0;
  double min_ms = 0.0;
};

struct TimingReport {
  std::vector<LayerTiming> layers;
  double layer_median_sum_ms = 0.0;
  double network_median_ms = 0.0;
  double network_min_ms = 0.0;
  int iterations = 0;
};

namespace detail {

template <typename Fn>
LayerTiming time_repeated(const std::string& name, int iterations, const Fn& fn) {
  fn();  // warm-up, excluded
  std::vector<double> samples;
  samples.reserve(iterations);
  for (int i = 0; i < iterations; ++i) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const auto stop = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  LayerTiming timing;
  timing.name = name;
  timing.median_ms = median_of(samples);
  timing.min_ms = *std::min_element(samples.begin(), samples.end());
  return timing;
}

}  // namespace detail

// Times every primitive convolution in isolation (on seeded random inputs of
// its true resolution) plus the whole forward pass on `input`. One warm-up
// run per measurement is excluded; median and min are over `iterations` runs.
inline TimingReport time_layers(const NetworkSpec& spec, const WeightStore& weights,
                                const Tensor& input, int iterations) {
  if (iterations < 1) {
    throw std::invalid_argument("time_layers: iterations must be >= 1, got " +
                                std::to_string(iterations));
  }
  TimingReport report;
  report.iterations = iterations;

  std::uint32_t layer_seed = 90210;
  for (const LayerDef& layer : expand_layers(spec)) {
    std::mt19937 rng(layer_seed++);
    Tensor layer_input(1, layer.in_extent, layer.in_extent, layer.params.in_channels);
    for (float& v : layer_input.data()) v = uniform_in(rng, -1.0f, 1.0f);
    const Tensor& weight = weights.get(layer.name + ".weight");
    const std::vector<float> bias = weights.get_vector(layer.name + ".bias");
    volatile float sink = 0.0f;  // keep the optimizer from dropping the work
    const LayerTiming timing = detail::time_repeated(layer.name, iterations, [&] {
      const Tensor out = conv2d(layer_input, weight, bias, layer.params);
      sink = sink + out.data()[0];
    });
    report.layers.push_back(timing);
    report.layer_median_sum_ms += timing.median_ms;
  }

  volatile float sink = 0.0f;
  const LayerTiming network = detail::time_repeated("network", iterations, [&] {
    const FeatureMaps maps = extract_features(input, weights, spec);
    const RawPredictions raw = predict_raw(maps.map16, maps.map8, weights, spec);
    sink = sink + raw.scores[0];
  });
  report.network_median_ms = network.median_ms;
  report.network_min_ms = network.min_ms;
  return report;
}

}  // namespace blazedet
