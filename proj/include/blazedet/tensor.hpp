#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace blazedet {

// Shape of a rank-4 tensor, batch/height/width/channels order.
struct Dims {
  int batch = 1;
  int height = 1;
  int width = 1;
  int channels = 1;

  bool operator==(const Dims&) const = default;

  std::size_t count() const {
    return static_cast<std::size_t>(batch) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
  }

  std::string to_string() const {
    return std::to_string(batch) + "x" + std::to_string(height) + "x" +
           std::to_string(width) + "x" + std::to_string(channels);
  }
};

// Dense rank-4 tensor of 32-bit floats stored batch-major with channels
// innermost (row-major over height, then width, then channels). Immutable by
// convention once built: every operation below returns a fresh tensor.
//
// Convolution weights reuse the same container with the axes read as
// (kernel_h, kernel_w, in_channels, out_channels).
class Tensor {
 public:
  Tensor(int batch, int height, int width, int channels)
      : dims_{batch, height, width, channels} {
    validate_dims();
    data_.assign(dims_.count(), 0.0f);
  }

  Tensor(Dims dims, std::vector<float> data) : dims_(dims), data_(std::move(data)) {
    validate_dims();
    if (data_.size() != dims_.count()) {
      throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                  " does not match dims " + dims_.to_string());
    }
  }

  const Dims& dims() const { return dims_; }
  int batch() const { return dims_.batch; }
  int height() const { return dims_.height; }
  int width() const { return dims_.width; }
  int channels() const { return dims_.channels; }
  std::size_t size() const { return data_.size(); }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  std::size_t index(int b, int y, int x, int c) const {
    return ((static_cast<std::size_t>(b) * dims_.height + y) * dims_.width + x) *
               dims_.channels +
           c;
  }

  float at(int b, int y, int x, int c) const { return data_[index(b, y, x, c)]; }
  float& at(int b, int y, int x, int c) { return data_[index(b, y, x, c)]; }

 private:
  void validate_dims() const {
    const char* names[4] = {"batch", "height", "width", "channels"};
    const int values[4] = {dims_.batch, dims_.height, dims_.width, dims_.channels};
    for (int i = 0; i < 4; ++i) {
      if (values[i] < 1) {
        throw std::invalid_argument(std::string("Tensor: ") + names[i] + " axis must be >= 1, got " +
                                    std::to_string(values[i]));
      }
    }
  }

  Dims dims_;
  std::vector<float> data_;
};

enum class Padding { same, valid };
enum class ConvKind { full, depthwise, pointwise };

// Static description of one convolution layer.
struct ConvParams {
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  Padding padding = Padding::same;
  ConvKind kind = ConvKind::full;
  int in_channels = 0;
  int out_channels = 0;
};

inline const char* to_string(ConvKind kind) {
  switch (kind) {
    case ConvKind::full: return "full";
    case ConvKind::depthwise: return "depthwise";
    case ConvKind::pointwise: return "pointwise";
  }
  return "?";
}

inline void validate_params(const ConvParams& p) {
  if (p.kernel_h < 1 || p.kernel_w < 1) {
    throw std::invalid_argument("conv params: kernel must be >= 1x1");
  }
  if (p.stride < 1) {
    throw std::invalid_argument("conv params: stride must be >= 1");
  }
  if (p.in_channels < 1 || p.out_channels < 1) {
    throw std::invalid_argument("conv params: channel counts must be >= 1");
  }
  if (p.kind == ConvKind::pointwise && (p.kernel_h != 1 || p.kernel_w != 1)) {
    throw std::invalid_argument("conv params: pointwise requires a 1x1 kernel");
  }
  if (p.kind == ConvKind::depthwise && p.out_channels != p.in_channels) {
    throw std::invalid_argument("conv params: depthwise requires out_channels == in_channels");
  }
}

// Output extent along one spatial axis. Same padding: ceil(in / stride).
// Valid padding: floor((in - k) / stride) + 1.
inline int conv_output_extent(int in, int kernel, int stride, Padding padding) {
  if (padding == Padding::same) {
    return (in + stride - 1) / stride;
  }
  if (in < kernel) {
    throw std::invalid_argument("conv: zero-sized window (valid padding, kernel " +
                                std::to_string(kernel) + " exceeds input extent " +
                                std::to_string(in) + ")");
  }
  return (in - kernel) / stride + 1;
}

// Leading (top/left) pad for same padding: total pad is
// max((out - 1) * stride + k - in, 0), split with the smaller half leading.
inline int same_pad_before(int in, int kernel, int stride) {
  const int out = (in + stride - 1) / stride;
  const int total = std::max((out - 1) * stride + kernel - in, 0);
  return total / 2;
}

namespace detail {

inline std::atomic<int>& thread_count_slot() {
  static std::atomic<int> count{1};
  return count;
}

// Splits [0, rows) into contiguous chunks, one per worker. Each row is written
// by exactly one thread with identical arithmetic, so results match the
// single-threaded path bit for bit.
template <typename Fn>
void parallel_rows(int rows, const Fn& fn) {
  const int workers = std::min(thread_count_slot().load(), rows);
  if (workers <= 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    const int begin = static_cast<int>(static_cast<long long>(rows) * t / workers);
    const int end = static_cast<int>(static_cast<long long>(rows) * (t + 1) / workers);
    pool.emplace_back([&fn, begin, end] {
      for (int r = begin; r < end; ++r) fn(r);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Worker count for the row-parallel inner loops. 1 (the default) keeps every
// operation on the calling thread.
inline void set_num_threads(int n) { detail::thread_count_slot().store(std::max(1, n)); }
inline int num_threads() { return detail::thread_count_slot().load(); }

// 2D convolution over a batch/height/width/channels tensor.
//
// Weight layout by kind:
//   full:      kernel_h x kernel_w x in_channels x out_channels
//   depthwise: kernel_h x kernel_w x in_channels x 1   (channel multiplier 1)
//   pointwise: 1 x 1 x in_channels x out_channels
inline Tensor conv2d(const Tensor& input, const Tensor& weights,
                     const std::vector<float>& bias, const ConvParams& params) {
  validate_params(params);
  if (input.channels() != params.in_channels) {
    throw std::invalid_argument("conv2d: input channels axis is " +
                                std::to_string(input.channels()) + ", params expect " +
                                std::to_string(params.in_channels));
  }
  const int expected_co = params.kind == ConvKind::depthwise ? 1 : params.out_channels;
  const Dims expected{params.kernel_h, params.kernel_w, params.in_channels, expected_co};
  if (!(weights.dims() == expected)) {
    throw std::invalid_argument(std::string("conv2d: ") + to_string(params.kind) +
                                " weight dims " + weights.dims().to_string() +
                                " do not match expected " + expected.to_string());
  }
  if (static_cast<int>(bias.size()) != params.out_channels) {
    throw std::invalid_argument("conv2d: bias length " + std::to_string(bias.size()) +
                                " does not match out_channels axis " +
                                std::to_string(params.out_channels));
  }

  const int in_h = input.height(), in_w = input.width();
  const int kh = params.kernel_h, kw = params.kernel_w;
  const int out_h = conv_output_extent(in_h, kh, params.stride, params.padding);
  const int out_w = conv_output_extent(in_w, kw, params.stride, params.padding);
  const int pad_top = params.padding == Padding::same ? same_pad_before(in_h, kh, params.stride) : 0;
  const int pad_left = params.padding == Padding::same ? same_pad_before(in_w, kw, params.stride) : 0;

  const int ci_n = params.in_channels;
  const int co_n = params.out_channels;
  Tensor out(input.batch(), out_h, out_w, co_n);

  const float* in_data = input.data().data();
  const float* w_data = weights.data().data();
  float* out_data = out.data().data();
  const std::size_t in_row = static_cast<std::size_t>(in_w) * ci_n;

  for (int b = 0; b < input.batch(); ++b) {
    const float* in_b = in_data + static_cast<std::size_t>(b) * in_h * in_row;
    float* out_b = out_data + static_cast<std::size_t>(b) * out_h * out_w * co_n;
    detail::parallel_rows(out_h, [&](int oy) {
      std::vector<float> acc(co_n);
      for (int ox = 0; ox < out_w; ++ox) {
        for (int c = 0; c < co_n; ++c) acc[c] = bias[c];
        const int iy0 = oy * params.stride - pad_top;
        const int ix0 = ox * params.stride - pad_left;
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = iy0 + ky;
          if (iy < 0 || iy >= in_h) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ix0 + kx;
            if (ix < 0 || ix >= in_w) continue;
            const float* px = in_b + static_cast<std::size_t>(iy) * in_row +
                              static_cast<std::size_t>(ix) * ci_n;
            if (params.kind == ConvKind::depthwise) {
              const float* wk = w_data + (static_cast<std::size_t>(ky) * kw + kx) * ci_n;
              for (int c = 0; c < ci_n; ++c) acc[c] += px[c] * wk[c];
            } else {
              const float* wk = w_data + ((static_cast<std::size_t>(ky) * kw + kx) * ci_n) * co_n;
              for (int ci = 0; ci < ci_n; ++ci) {
                const float v = px[ci];
                const float* wrow = wk + static_cast<std::size_t>(ci) * co_n;
                for (int co = 0; co < co_n; ++co) acc[co] += v * wrow[co];
              }
            }
          }
        }
        float* dst = out_b + (static_cast<std::size_t>(oy) * out_w + ox) * co_n;
        for (int c = 0; c < co_n; ++c) dst[c] = acc[c];
      }
    });
  }
  return out;
}

inline Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
  return out;
}

// Per-channel max over each window; same-padding output rule as conv2d.
// Out-of-bounds positions are skipped rather than padded.
inline Tensor max_pool2d(const Tensor& input, int window, int stride) {
  if (window < 1 || stride < 1) {
    throw std::invalid_argument("max_pool2d: window and stride must be >= 1");
  }
  const int in_h = input.height(), in_w = input.width(), cn = input.channels();
  const int out_h = conv_output_extent(in_h, window, stride, Padding::same);
  const int out_w = conv_output_extent(in_w, window, stride, Padding::same);
  const int pad_top = same_pad_before(in_h, window, stride);
  const int pad_left = same_pad_before(in_w, window, stride);

  Tensor out(input.batch(), out_h, out_w, cn);
  for (int b = 0; b < input.batch(); ++b) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        bool seen = false;
        for (int ky = 0; ky < window; ++ky) {
          const int iy = oy * stride - pad_top + ky;
          if (iy < 0 || iy >= in_h) continue;
          for (int kx = 0; kx < window; ++kx) {
            const int ix = ox * stride - pad_left + kx;
            if (ix < 0 || ix >= in_w) continue;
            for (int c = 0; c < cn; ++c) {
              const float v = input.at(b, iy, ix, c);
              float& dst = out.at(b, oy, ox, c);
              dst = seen ? std::max(dst, v) : v;
            }
            seen = true;
          }
        }
        if (!seen) {
          throw std::invalid_argument("max_pool2d: zero-sized window at output (" +
                                      std::to_string(oy) + ", " + std::to_string(ox) + ")");
        }
      }
    }
  }
  return out;
}

// Appends zero-filled channels up to new_channels; existing values untouched.
inline Tensor pad_channels(const Tensor& input, int new_channels) {
  if (new_channels < input.channels()) {
    throw std::invalid_argument("pad_channels: channels axis cannot shrink (" +
                                std::to_string(input.channels()) + " -> " +
                                std::to_string(new_channels) + ")");
  }
  if (new_channels == input.channels()) return input;
  Tensor out(input.batch(), input.height(), input.width(), new_channels);
  const int cn = input.channels();
  for (int b = 0; b < input.batch(); ++b)
    for (int y = 0; y < input.height(); ++y)
      for (int x = 0; x < input.width(); ++x)
        for (int c = 0; c < cn; ++c) out.at(b, y, x, c) = input.at(b, y, x, c);
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (!(a.dims() == b.dims())) {
    const char* names[4] = {"batch", "height", "width", "channels"};
    const int av[4] = {a.batch(), a.height(), a.width(), a.channels()};
    const int bv[4] = {b.batch(), b.height(), b.width(), b.channels()};
    for (int i = 0; i < 4; ++i) {
      if (av[i] != bv[i]) {
        throw std::invalid_argument(std::string("add: ") + names[i] + " axis mismatch (" +
                                    std::to_string(av[i]) + " vs " + std::to_string(bv[i]) + ")");
      }
    }
  }
  Tensor out = a;
  const auto& bd = b.data();
  auto& od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
  return out;
}

}  // namespace blazedet
