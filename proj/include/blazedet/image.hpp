#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "blazedet/tensor.hpp"

namespace blazedet {

inline constexpr int kInputExtent = 128;  // network input is 128x128 RGB

// Raised when image bytes cannot be decoded.
class ImageFormatError : public std::runtime_error {
 public:
  explicit ImageFormatError(const std::string& message) : std::runtime_error(message) {}
};

namespace detail {

inline bool is_ppm_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Reads one decimal header field, skipping whitespace and '#' comments.
inline int read_ppm_field(const std::vector<std::uint8_t>& bytes, std::size_t& pos,
                          const char* what) {
  while (pos < bytes.size()) {
    if (is_ppm_space(bytes[pos])) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9') {
    throw ImageFormatError(std::string("ppm header: expected ") + what);
  }
  long value = 0;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
    value = value * 10 + (bytes[pos] - '0');
    if (value > 1000000) throw ImageFormatError(std::string("ppm header: ") + what + " too large");
    ++pos;
  }
  return static_cast<int>(value);
}

}  // namespace detail

// Decodes a binary PPM (P6, 8-bit) into a 1 x height x width x 3 tensor with
// values in 0..255 (rescaled when maxval < 255).
inline Tensor decode_ppm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw ImageFormatError("ppm: not a P6 file");
  }
  std::size_t pos = 2;
  const int width = detail::read_ppm_field(bytes, pos, "width");
  const int height = detail::read_ppm_field(bytes, pos, "height");
  const int maxval = detail::read_ppm_field(bytes, pos, "maxval");
  if (width < 1 || height < 1) {
    throw ImageFormatError("ppm header: image extent must be >= 1");
  }
  if (maxval < 1 || maxval > 255) {
    throw ImageFormatError("ppm header: maxval " + std::to_string(maxval) +
                           " outside 8-bit range");
  }
  if (pos >= bytes.size() || !detail::is_ppm_space(bytes[pos])) {
    throw ImageFormatError("ppm header: missing whitespace before pixel data");
  }
  ++pos;  // exactly one whitespace byte separates maxval from the raster

  const std::size_t expected = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() - pos < expected) {
    throw ImageFormatError("ppm: pixel data truncated, expected " + std::to_string(expected) +
                           " bytes, got " + std::to_string(bytes.size() - pos));
  }
  const float scale = 255.0f / static_cast<float>(maxval);
  Tensor out(1, height, width, 3);
  float* dst = out.data().data();
  for (std::size_t i = 0; i < expected; ++i) {
    dst[i] = static_cast<float>(bytes[pos + i]) * scale;
  }
  return out;
}

// Bilinear resample with the half-pixel center convention:
//   src = (dst + 0.5) * (in_extent / out_extent) - 0.5,
// sample coordinates clamped to the edges. Identity when sizes match.
inline Tensor bilinear_resize(const Tensor& input, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw std::invalid_argument("bilinear_resize: output extent must be >= 1");
  }
  if (input.height() == out_h && input.width() == out_w) return input;

  const int in_h = input.height(), in_w = input.width(), cn = input.channels();
  const float sy = static_cast<float>(in_h) / static_cast<float>(out_h);
  const float sx = static_cast<float>(in_w) / static_cast<float>(out_w);
  Tensor out(input.batch(), out_h, out_w, cn);
  for (int b = 0; b < input.batch(); ++b) {
    for (int oy = 0; oy < out_h; ++oy) {
      const float fy = (static_cast<float>(oy) + 0.5f) * sy - 0.5f;
      const int fy0 = static_cast<int>(std::floor(fy));
      // Clamp the two sample rows independently so coordinates outside the
      // image replicate the edge instead of blending inward.
      const int y0 = std::clamp(fy0, 0, in_h - 1);
      const int y1 = std::clamp(fy0 + 1, 0, in_h - 1);
      const float wy = fy - static_cast<float>(fy0);
      for (int ox = 0; ox < out_w; ++ox) {
        const float fx = (static_cast<float>(ox) + 0.5f) * sx - 0.5f;
        const int fx0 = static_cast<int>(std::floor(fx));
        const int x0 = std::clamp(fx0, 0, in_w - 1);
        const int x1 = std::clamp(fx0 + 1, 0, in_w - 1);
        const float wx = fx - static_cast<float>(fx0);
        for (int c = 0; c < cn; ++c) {
          const float top = input.at(b, y0, x0, c) * (1.0f - wx) + input.at(b, y0, x1, c) * wx;
          const float bottom = input.at(b, y1, x0, c) * (1.0f - wx) + input.at(b, y1, x1, c) * wx;
          out.at(b, oy, ox, c) = top * (1.0f - wy) + bottom * wy;
        }
      }
    }
  }
  return out;
}

// Shifts image content by (dx, dy) pixels (positive = toward bottom-right),
// filling uncovered pixels by replicating the nearest edge.
inline Tensor translate_image(const Tensor& input, int dx, int dy) {
  Tensor out(input.batch(), input.height(), input.width(), input.channels());
  const int h = input.height(), w = input.width(), cn = input.channels();
  for (int b = 0; b < input.batch(); ++b) {
    for (int y = 0; y < h; ++y) {
      const int sy = std::clamp(y - dy, 0, h - 1);
      for (int x = 0; x < w; ++x) {
        const int sx = std::clamp(x - dx, 0, w - 1);
        for (int c = 0; c < cn; ++c) out.at(b, y, x, c) = input.at(b, sy, sx, c);
      }
    }
  }
  return out;
}

// Maps 0..255 pixel values onto the network's [-1, 1] input range.
inline Tensor normalize_pixels(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.data()) v = v / 127.5f - 1.0f;
  return out;
}

// Reads a P6 image from disk, resizes it to the 128x128 network input, and
// maps values onto [-1, 1].
inline Tensor load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open image file '" + path + "'");
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return normalize_pixels(bilinear_resize(decode_ppm(bytes), kInputExtent, kInputExtent));
}

}  // namespace blazedet
