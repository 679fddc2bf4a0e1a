#include "cvsdeblur/frame.hpp"

#include <cmath>
#include <string>

#include "cvsdeblur/errors.hpp"

namespace cvsdeblur {

Frame luma(const Frame& rgb) {
  if (rgb.channels == 1) return rgb;
  if (rgb.channels != 3) throw ValidationError("luma: expected 1 or 3 channels, got " + std::to_string(rgb.channels));
  Frame out(rgb.height, rgb.width, 1);
  const float* src = rgb.data.data();
  float* dst = out.data.data();
  const std::int64_t n = static_cast<std::int64_t>(rgb.height) * rgb.width;
  for (std::int64_t i = 0; i < n; ++i) {
    dst[i] = (src[3 * i] + src[3 * i + 1] + src[3 * i + 2]) * (1.0f / 3.0f);
  }
  return out;
}

void validate_range(const Frame& f, float lo, float hi, const char* what) {
  for (float v : f.data) {
    if (!std::isfinite(v) || v < lo || v > hi) {
      throw ValidationError(std::string(what) + ": value " + std::to_string(v) + " outside [" +
                            std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  }
}

}  // namespace cvsdeblur
