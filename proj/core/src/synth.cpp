#include "cvsdeblur/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "cvsdeblur/errors.hpp"
#include "cvsdeblur/rng.hpp"

namespace cvsdeblur {

std::vector<Frame> render_moving_texture(const TextureSpec& spec) {
  if (spec.size < 8) throw ValidationError("render_moving_texture: size must be at least 8");
  if (spec.n_frames < 1) throw ValidationError("render_moving_texture: n_frames must be positive");
  if (spec.n_waves < 1) throw ValidationError("render_moving_texture: n_waves must be positive");
  if (!(spec.min_speed >= 0) || spec.max_speed < spec.min_speed) {
    throw ValidationError("render_moving_texture: bad speed range");
  }
  if (!(spec.min_wavelength > 0) || spec.max_wavelength < spec.min_wavelength) {
    throw ValidationError("render_moving_texture: bad wavelength range");
  }

  std::mt19937_64 rng(spec.seed);
  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<Wave> waves(static_cast<size_t>(spec.n_waves));
  double amp_sum = 0.0;
  for (auto& w : waves) {
    const double wavelength = spec.min_wavelength + u01(rng) * (spec.max_wavelength - spec.min_wavelength);
    const double dir = u01(rng) * 2.0 * std::numbers::pi;
    const double k = 2.0 * std::numbers::pi / wavelength;
    w.kx = k * std::cos(dir);
    w.ky = k * std::sin(dir);
    w.phase = u01(rng) * 2.0 * std::numbers::pi;
    w.amp = 0.5 + u01(rng) * 0.5;
    amp_sum += w.amp;
  }
  // Channel gains keep values inside [0.05, 0.95] after the +-1 normalization.
  double gain[3];
  for (double& g : gain) g = 0.20 + u01(rng) * 0.25;

  const double speed = spec.min_speed + u01(rng) * (spec.max_speed - spec.min_speed);
  const double heading = u01(rng) * 2.0 * std::numbers::pi;
  const double vx = speed * std::cos(heading);
  const double vy = speed * std::sin(heading);
  const double spin = (2.0 * u01(rng) - 1.0) * spec.max_spin;
  const double c0 = spec.size / 2.0;

  std::vector<Frame> frames;
  frames.reserve(static_cast<size_t>(spec.n_frames));
  for (int t = 0; t < spec.n_frames; ++t) {
    const double ca = std::cos(-spin * t);
    const double sa = std::sin(-spin * t);
    Frame f(spec.size, spec.size, 3);
    for (int y = 0; y < spec.size; ++y) {
      for (int x = 0; x < spec.size; ++x) {
        // Inverse rigid map: undo the rotation about the center, then the shift.
        const double px = (x + 0.5) - c0;
        const double py = (y + 0.5) - c0;
        const double u = ca * px - sa * py + c0 - vx * t;
        const double v = sa * px + ca * py + c0 - vy * t;
        double s = 0.0;
        for (const auto& w : waves) s += w.amp * std::sin(w.kx * u + w.ky * v + w.phase);
        s /= amp_sum;
        for (int c = 0; c < 3; ++c) {
          f.at(y, x, c) = static_cast<float>(0.5 + gain[c] * s);
        }
      }
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace cvsdeblur
