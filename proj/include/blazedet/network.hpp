#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "blazedet/anchors.hpp"
#include "blazedet/tensor.hpp"
#include "blazedet/util.hpp"
#include "blazedet/weights.hpp"

namespace blazedet {

enum class BlockKind { conv, single_blaze, double_blaze };

// One stage of the feature-extractor ladder.
struct BlockSpec {
  std::string name;
  BlockKind kind = BlockKind::single_blaze;
  int stride = 1;
  int in_channels = 0;
  int out_channels = 0;
  int mid_channels = 0;  // double-block projection width
  int kernel = 5;        // stem / depthwise kernel extent
};

// One detection head: a pointwise convolution over a feature map, emitting
// outputs_per_anchor values for each anchor slot of each cell.
struct HeadSpec {
  std::string name;
  int grid = 0;  // spatial extent of the source feature map
  int anchors_per_cell = 0;
  int outputs_per_anchor = 17;  // 1 score + 4 box + 12 keypoint values
  int in_channels = 96;
};

struct NetworkSpec {
  int input_extent = 128;
  int input_channels = 3;
  std::vector<BlockSpec> blocks;
  std::vector<HeadSpec> heads;
};

// The frontal-camera detector: a strided 5x5 stem, five single blocks, six
// double blocks (24 -> 48 -> 96 channels over 128 -> 8 resolution), and two
// heads reading the 16x16 and 8x8 maps.
inline NetworkSpec frontal_network_spec() {
  NetworkSpec spec;
  spec.blocks = {
      {"conv1", BlockKind::conv, 2, 3, 24},
      {"block02", BlockKind::single_blaze, 1, 24, 24},
      {"block03", BlockKind::single_blaze, 1, 24, 24},
      {"block04", BlockKind::single_blaze, 2, 24, 48},
      {"block05", BlockKind::single_blaze, 1, 48, 48},
      {"block06", BlockKind::single_blaze, 1, 48, 48},
      {"block07", BlockKind::double_blaze, 2, 48, 96, 24},
      {"block08", BlockKind::double_blaze, 1, 96, 96, 24},
      {"block09", BlockKind::double_blaze, 1, 96, 96, 24},
      {"block10", BlockKind::double_blaze, 2, 96, 96, 24},
      {"block11", BlockKind::double_blaze, 1, 96, 96, 24},
      {"block12", BlockKind::double_blaze, 1, 96, 96, 24},
  };
  spec.heads = {
      {"head16", kMap16Grid, kAnchorsPerCell16, 17, 96},
      {"head8", kMap8Grid, kAnchorsPerCell8, 17, 96},
  };
  return spec;
}

// ---------------------------------------------------------------------------
// Layer expansion: the block ladder unrolled into primitive convolutions.
// ---------------------------------------------------------------------------

// One primitive convolution of the expanded network, with the spatial extent
// it runs at. `head` marks detection-head layers so analyses can separate the
// extractor from the heads.
struct LayerDef {
  std::string name;   // weight-store prefix, e.g. "block04.dw"
  std::string block;  // owning ladder stage, e.g. "block04"
  ConvParams params;
  int in_extent = 0;  // square input resolution of this primitive
  bool head = false;
};

inline std::vector<LayerDef> expand_layers(const NetworkSpec& spec, bool include_heads = true) {
  std::vector<LayerDef> layers;
  int extent = spec.input_extent;
  const auto out_extent = [](int in, int stride) { return (in + stride - 1) / stride; };

  for (const BlockSpec& block : spec.blocks) {
    const int k = block.kernel;
    switch (block.kind) {
      case BlockKind::conv:
        layers.push_back({block.name, block.name,
                          ConvParams{k, k, block.stride, Padding::same, ConvKind::full,
                                     block.in_channels, block.out_channels},
                          extent});
        break;
      case BlockKind::single_blaze:
        layers.push_back({block.name + ".dw", block.name,
                          ConvParams{k, k, block.stride, Padding::same, ConvKind::depthwise,
                                     block.in_channels, block.in_channels},
                          extent});
        layers.push_back({block.name + ".pw", block.name,
                          ConvParams{1, 1, 1, Padding::same, ConvKind::pointwise,
                                     block.in_channels, block.out_channels},
                          out_extent(extent, block.stride)});
        break;
      case BlockKind::double_blaze:
        layers.push_back({block.name + ".dw1", block.name,
                          ConvParams{k, k, block.stride, Padding::same, ConvKind::depthwise,
                                     block.in_channels, block.in_channels},
                          extent});
        layers.push_back({block.name + ".pw1", block.name,
                          ConvParams{1, 1, 1, Padding::same, ConvKind::pointwise,
                                     block.in_channels, block.mid_channels},
                          out_extent(extent, block.stride)});
        layers.push_back({block.name + ".dw2", block.name,
                          ConvParams{k, k, 1, Padding::same, ConvKind::depthwise,
                                     block.mid_channels, block.mid_channels},
                          out_extent(extent, block.stride)});
        layers.push_back({block.name + ".pw2", block.name,
                          ConvParams{1, 1, 1, Padding::same, ConvKind::pointwise,
                                     block.mid_channels, block.out_channels},
                          out_extent(extent, block.stride)});
        break;
    }
    extent = out_extent(extent, block.stride);
  }

  if (include_heads) {
    for (const HeadSpec& head : spec.heads) {
      layers.push_back({head.name, head.name,
                        ConvParams{1, 1, 1, Padding::same, ConvKind::pointwise, head.in_channels,
                                   head.anchors_per_cell * head.outputs_per_anchor},
                        head.grid, true});
    }
  }
  return layers;
}

// Names and shapes of every tensor the network expects in a WeightStore, in
// ladder order, weight before bias. Biases are stored as 1x1x1xN.
struct TensorShapeDef {
  std::string name;
  Dims dims;
};

inline std::vector<TensorShapeDef> weight_shapes(const NetworkSpec& spec) {
  std::vector<TensorShapeDef> shapes;
  for (const LayerDef& layer : expand_layers(spec)) {
    const ConvParams& p = layer.params;
    const int stored_out = p.kind == ConvKind::depthwise ? 1 : p.out_channels;
    shapes.push_back({layer.name + ".weight", Dims{p.kernel_h, p.kernel_w, p.in_channels, stored_out}});
    shapes.push_back({layer.name + ".bias", Dims{1, 1, 1, p.out_channels}});
  }
  return shapes;
}

// Fresh store with uniform(-b, b) values per layer, b = sqrt(6 / (fan_in +
// fan_out)) computed from the stored weight dims; a layer's bias reuses its
// weight bound. One generator stream drawn in ladder order keeps the result
// a pure function of the seed.
inline WeightStore init_random_weights(const NetworkSpec& spec, std::uint32_t seed) {
  std::mt19937 rng(seed);
  WeightStore store;
  store.creation_seed = seed;
  float bound = 0.0f;
  for (const TensorShapeDef& def : weight_shapes(spec)) {
    const Dims& d = def.dims;
    if (def.name.ends_with(".weight")) {
      const float fan_in = static_cast<float>(d.batch) * d.height * d.width;
      const float fan_out = static_cast<float>(d.batch) * d.height * d.channels;
      bound = std::sqrt(6.0f / (fan_in + fan_out));
    }
    std::vector<float> values(d.count());
    for (float& v : values) v = uniform_in(rng, -bound, bound);
    store.put(def.name, Tensor(d, std::move(values)));
  }
  return store;
}

// ---------------------------------------------------------------------------
// Forward pass.
// ---------------------------------------------------------------------------

namespace detail {

inline Tensor layer_conv(const Tensor& input, const WeightStore& weights,
                         const std::string& name, const ConvParams& params) {
  return conv2d(input, weights.get(name + ".weight"), weights.get_vector(name + ".bias"),
                params);
}

// Shortcut branch shared by both block kinds: identity when the shape is
// unchanged, otherwise max-pool to the strided resolution and zero-pad the
// new channels.
inline Tensor residual_branch(const Tensor& input, int stride, int out_channels) {
  if (stride == 1 && input.channels() == out_channels) return input;
  return pad_channels(max_pool2d(input, stride, stride), out_channels);
}

}  // namespace detail

// depthwise 5x5 (stride) -> pointwise 1x1 -> residual add -> relu.
inline Tensor single_blaze_block(const Tensor& input, const WeightStore& weights,
                                 const BlockSpec& spec) {
  if (input.channels() != spec.in_channels) {
    throw std::invalid_argument(spec.name + ": input channels axis is " +
                                std::to_string(input.channels()) + ", spec expects " +
                                std::to_string(spec.in_channels));
  }
  Tensor main = detail::layer_conv(input, weights, spec.name + ".dw",
                                   ConvParams{spec.kernel, spec.kernel, spec.stride,
                                              Padding::same, ConvKind::depthwise,
                                              spec.in_channels, spec.in_channels});
  main = detail::layer_conv(main, weights, spec.name + ".pw",
                            ConvParams{1, 1, 1, Padding::same, ConvKind::pointwise,
                                       spec.in_channels, spec.out_channels});
  return relu(add(main, detail::residual_branch(input, spec.stride, spec.out_channels)));
}

// depthwise 5x5 (stride) -> pointwise projection to mid -> relu ->
// depthwise 5x5 -> pointwise expansion to out -> residual add -> relu.
inline Tensor double_blaze_block(const Tensor& input, const WeightStore& weights,
                                 const BlockSpec& spec) {
  if (input.channels() != spec.in_channels) {
    throw std::invalid_argument(spec.name + ": input channels axis is " +
                                std::to_string(input.channels()) + ", spec expects " +
                                std::to_string(spec.in_channels));
  }
  Tensor main = detail::layer_conv(input, weights, spec.name + ".dw1",
                                   ConvParams{spec.kernel, spec.kernel, spec.stride,
                                              Padding::same, ConvKind::depthwise,
                                              spec.in_channels, spec.in_channels});
  main = detail::layer_conv(main, weights, spec.name + ".pw1",
                            ConvParams{1, 1, 1, Padding::same, ConvKind::pointwise,
                                       spec.in_channels, spec.mid_channels});
  main = relu(main);
  main = detail::layer_conv(main, weights, spec.name + ".dw2",
                            ConvParams{spec.kernel, spec.kernel, 1, Padding::same,
                                       ConvKind::depthwise, spec.mid_channels,
                                       spec.mid_channels});
  main = detail::layer_conv(main, weights, spec.name + ".pw2",
                            ConvParams{1, 1, 1, Padding::same, ConvKind::pointwise,
                                       spec.mid_channels, spec.out_channels});
  return relu(add(main, detail::residual_branch(input, spec.stride, spec.out_channels)));
}

// Output of every ladder stage, in order, for shape and locality checks.
struct FeatureTrace {
  std::vector<std::string> names;
  std::vector<Tensor> outputs;
};

struct FeatureMaps {
  Tensor map16;
  Tensor map8;
};

// Runs the ladder on a 1 x 128 x 128 x 3 input. map8 is the final stage
// output; map16 is the last stage at twice that resolution.
inline FeatureMaps extract_features(const Tensor& input, const WeightStore& weights,
                                    const NetworkSpec& spec, FeatureTrace* trace = nullptr) {
  if (input.batch() != 1 || input.height() != spec.input_extent ||
      input.width() != spec.input_extent || input.channels() != spec.input_channels) {
    throw std::invalid_argument("extract_features: input dims " + input.dims().to_string() +
                                " do not match expected 1x" + std::to_string(spec.input_extent) +
                                "x" + std::to_string(spec.input_extent) + "x" +
                                std::to_string(spec.input_channels));
  }
  if (spec.blocks.empty()) {
    throw std::invalid_argument("extract_features: network spec has no blocks");
  }

  std::vector<Tensor> stages;
  Tensor current = input;
  for (const BlockSpec& block : spec.blocks) {
    switch (block.kind) {
      case BlockKind::conv:
        current = detail::layer_conv(current, weights, block.name,
                                     ConvParams{block.kernel, block.kernel, block.stride,
                                                Padding::same, ConvKind::full,
                                                block.in_channels, block.out_channels});
        break;
      case BlockKind::single_blaze:
        current = single_blaze_block(current, weights, block);
        break;
      case BlockKind::double_blaze:
        current = double_blaze_block(current, weights, block);
        break;
    }
    stages.push_back(current);
    if (trace != nullptr) {
      trace->names.push_back(block.name);
      trace->outputs.push_back(current);
    }
  }

  const int final_extent = stages.back().height();
  const Tensor* half_res = nullptr;
  for (const Tensor& stage : stages) {
    if (stage.height() == 2 * final_extent) half_res = &stage;
  }
  if (half_res == nullptr) {
    throw std::invalid_argument(
        "extract_features: ladder never produces a map at twice the final resolution");
  }
  return FeatureMaps{*half_res, stages.back()};
}

inline FeatureMaps extract_features(const Tensor& input, const WeightStore& weights) {
  return extract_features(input, weights, frontal_network_spec());
}

// Applies the pointwise head convolutions and flattens their outputs into
// per-anchor rows: each head's cells in row-major order with the cell's
// anchor slots innermost, heads in spec order (16x16 map first). Channel
// layout per slot: [score logit, dx, dy, dw, dh, k1x, k1y, ..., k6x, k6y].
inline RawPredictions predict_raw(const Tensor& map16, const Tensor& map8,
                                  const WeightStore& weights, const NetworkSpec& spec) {
  RawPredictions raw;
  for (const HeadSpec& head : spec.heads) {
    const Tensor& source = head.grid == map16.height() ? map16 : map8;
    if (source.height() != head.grid || source.width() != head.grid ||
        source.channels() != head.in_channels) {
      throw std::invalid_argument(head.name + ": source map dims " + source.dims().to_string() +
                                  " do not match expected 1x" + std::to_string(head.grid) + "x" +
                                  std::to_string(head.grid) + "x" +
                                  std::to_string(head.in_channels));
    }
    const Tensor out = detail::layer_conv(
        source, weights, head.name,
        ConvParams{1, 1, 1, Padding::same, ConvKind::pointwise, head.in_channels,
                   head.anchors_per_cell * head.outputs_per_anchor});
    for (int row = 0; row < head.grid; ++row) {
      for (int col = 0; col < head.grid; ++col) {
        for (int slot = 0; slot < head.anchors_per_cell; ++slot) {
          const int base = slot * head.outputs_per_anchor;
          raw.scores.push_back(out.at(0, row, col, base));
          std::array<float, 16> reg;
          for (int v = 0; v < 16; ++v) reg[v] = out.at(0, row, col, base + 1 + v);
          raw.regressors.push_back(reg);
        }
      }
    }
  }
  return raw;
}

inline RawPredictions predict_raw(const Tensor& map16, const Tensor& map8,
                                  const WeightStore& weights) {
  return predict_raw(map16, map8, weights, frontal_network_spec());
}

}  // namespace blazedet
