#pragma once

#include <cstdint>
#include <vector>

#include "cvsdeblur/frame.hpp"

namespace cvsdeblur {

// Procedural training scenes: a smooth sinusoid-mixture texture undergoing
// rigid motion (translation plus slow rotation about the image center),
// evaluated analytically per frame so there is no resampling loss.
struct TextureSpec {
  int size = 48;
  int n_frames = 8;
  std::uint64_t seed = 0;
  int n_waves = 6;
  double min_speed = 0.6;  // translation, pixels per frame
  double max_speed = 1.4;
  double max_spin = 0.03;        // |rotation| per frame, radians
  double min_wavelength = 8.0;   // spatial wavelength range of the mixture, px
  double max_wavelength = 24.0;
};

std::vector<Frame> render_moving_texture(const TextureSpec& spec);

}  // namespace cvsdeblur
