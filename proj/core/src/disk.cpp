#include "cvsdeblur/disk.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cvsdeblur/errors.hpp"

namespace cvsdeblur {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Bright and dark sector colors at unit illumination; luma contrast ~0.72.
constexpr float kColorA[3] = {0.95f, 0.92f, 0.88f};
constexpr float kColorB[3] = {0.28f, 0.12f, 0.18f};
constexpr float kBackground = 0.05f;
}  // namespace

std::vector<Frame> render_disk_frames(const DiskSpec& spec) {
  if (spec.size < 32) throw ValidationError("render_disk_frames: size must be at least 32");
  if (spec.sectors < 2 || spec.sectors % 2 != 0) {
    throw ValidationError("render_disk_frames: sector count must be even and at least 2");
  }
  if (spec.n_frames < 1) throw ValidationError("render_disk_frames: n_frames must be positive");
  if (!(spec.fps > 0)) throw ValidationError("render_disk_frames: fps must be positive");
  if (!(spec.illumination > 0) || spec.illumination > 1.0) {
    throw ValidationError("render_disk_frames: illumination must lie in (0, 1]");
  }
  if (!(spec.radius_frac > 0) || spec.radius_frac > 0.5) {
    throw ValidationError("render_disk_frames: radius_frac must lie in (0, 0.5]");
  }

  const double cx = spec.size / 2.0;
  const double cy = spec.size / 2.0;
  const double radius = spec.radius_frac * spec.size;
  const double sector_width = kTwoPi / spec.sectors;
  const float ill = static_cast<float>(spec.illumination);
  const double offsets[2] = {0.25, 0.75};

  std::vector<Frame> frames;
  frames.reserve(static_cast<size_t>(spec.n_frames));
  for (int t = 0; t < spec.n_frames; ++t) {
    const double angle = kTwoPi * (spec.rpm / 60.0) * (t / spec.fps);
    Frame f(spec.size, spec.size, 3);
    for (int y = 0; y < spec.size; ++y) {
      for (int x = 0; x < spec.size; ++x) {
        float acc[3] = {0.0f, 0.0f, 0.0f};
        for (double oy : offsets) {
          for (double ox : offsets) {
            const double dx = (x + ox) - cx;
            const double dy = (y + oy) - cy;
            if (dx * dx + dy * dy > radius * radius) {
              acc[0] += kBackground;
              acc[1] += kBackground;
              acc[2] += kBackground;
              continue;
            }
            double phi = std::atan2(dy, dx) - angle;
            phi -= kTwoPi * std::floor(phi / kTwoPi);  // wrap to [0, 2pi)
            const int sector = static_cast<int>(phi / sector_width) % spec.sectors;
            const float* color = (sector % 2 == 0) ? kColorA : kColorB;
            acc[0] += color[0] * ill;
            acc[1] += color[1] * ill;
            acc[2] += color[2] * ill;
          }
        }
        for (int c = 0; c < 3; ++c) f.at(y, x, c) = acc[c] * 0.25f;
      }
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

DiskGeometry disk_geometry(const DiskSpec& spec) {
  DiskGeometry g;
  g.cx = spec.size / 2.0;
  g.cy = spec.size / 2.0;
  g.radius = 0.8 * spec.radius_frac * spec.size;
  g.sectors = spec.sectors;
  return g;
}

}  // namespace cvsdeblur
