#pragma once

#include <cstdint>
#include <vector>

namespace cvsdeblur {

// Dense image plane, row-major with interleaved channels (y, x, c).
// Intensity frames live in [0,1]; difference frames in [-1,1].
struct Frame {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Frame() = default;
  Frame(int h, int w, int c) : height(h), width(w), channels(c), data(static_cast<size_t>(h) * w * c, 0.0f) {}

  static Frame constant(int h, int w, int c, float v) {
    Frame f(h, w, c);
    std::fill(f.data.begin(), f.data.end(), v);
    return f;
  }

  float& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
  float at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }

  std::int64_t size() const { return static_cast<std::int64_t>(height) * width * channels; }
  bool same_shape(const Frame& o) const { return height == o.height && width == o.width && channels == o.channels; }
};

// Quantized difference plane, same layout as Frame but with signed integer
// codes in [-(2^bit_depth - 1), 2^bit_depth - 1].
struct QuantFrame {
  int height = 0;
  int width = 0;
  int channels = 0;
  int bit_depth = 7;
  std::vector<std::int8_t> data;

  QuantFrame() = default;
  QuantFrame(int h, int w, int c, int bits = 7)
      : height(h), width(w), channels(c), bit_depth(bits), data(static_cast<size_t>(h) * w * c, 0) {}

  std::int8_t& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
  std::int8_t at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }

  std::int64_t size() const { return static_cast<std::int64_t>(height) * width * channels; }
};

// Per-pixel mean of the three color channels. 1-channel input passes through.
Frame luma(const Frame& rgb);

// Throws ValidationError unless every value is finite and inside [lo, hi].
// `what` names the offending frame in the error message.
void validate_range(const Frame& f, float lo, float hi, const char* what);

}  // namespace cvsdeblur
