#pragma once

#include <vector>

#include "cvsdeblur/frame.hpp"

namespace cvsdeblur {

// Rotating test chart: a disk of alternating two-color sectors on a dark
// background, rendered with 2x2 supersampling. Frame t is rotated by
// 2*pi * (rpm / 60) * (t / fps) radians.
struct DiskSpec {
  int size = 128;
  int sectors = 8;  // even, alternating colors
  double rpm = 0.0;
  double fps = 1e6 / 1320.0;  // difference-pathway tick rate
  int n_frames = 1;
  double illumination = 1.0;  // scales both sector colors, in (0, 1]
  double radius_frac = 0.42;  // disk radius as a fraction of the image size
};

std::vector<Frame> render_disk_frames(const DiskSpec& spec);

// Sampling geometry shared by the disk renderer and the edge-width metric:
// the profile circle runs at 0.8 of the disk radius around its center.
struct DiskGeometry {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;  // profile sampling radius in pixels
  int sectors = 0;
};

DiskGeometry disk_geometry(const DiskSpec& spec);

}  // namespace cvsdeblur
