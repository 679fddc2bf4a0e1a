#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "cvsdeblur/frame.hpp"

namespace cvsdeblur {

// Exposure bookkeeping for a dual-pathway sensor: an RGB exposure of
// t_rgb_us microseconds spans n = ceil(t_rgb_us / tau_diff_us) ticks of the
// fast difference pathway.
struct ExposureConfig {
  int t_rgb_us = 0;
  int tau_diff_us = 1320;
};

struct ExposureInfo {
  int n = 0;          // sharp frames per exposure
  int mid_index = 0;  // (n - 1) / 2
};

ExposureInfo compute_exposure(const ExposureConfig& cfg);

// Diagonal spatial differences on luma, replicate padding at the borders.
// Channel 0 looks up-right (+45 degrees): I(y-1, x+1) - I(y, x).
// Channel 1 looks down-right (-45 degrees): I(y+1, x+1) - I(y, x).
// Accepts an RGB or single-channel frame; RGB is reduced to luma first.
Frame spatial_difference(const Frame& frame);

// Temporal difference on luma: next - prev, single channel.
Frame temporal_difference(const Frame& prev, const Frame& next);

// Signed quantization of a difference frame in [-1, 1] to integer codes in
// [-(2^bits - 1), 2^bits - 1]: round(v * (2^bits - 1)) half away from zero,
// clamped. quantize(dequantize(q)) reproduces q for every code.
QuantFrame quantize(const Frame& d, int bits = 7);
Frame dequantize(const QuantFrame& q);

// Per-pixel mean of the sharp frames; the discrete exposure integral.
Frame synthesize_blur(const std::vector<Frame>& frames);

// One training/eval unit: a blurred RGB frame plus the aligned difference
// signals that the fast pathway produced during its exposure.
struct CVSSample {
  Frame blur;                      // [0,1] RGB
  std::vector<QuantFrame> sd_seq;  // n entries, 2 channels each
  std::vector<QuantFrame> td_seq;  // n-1 entries, 1 channel each
  std::map<int, Frame> gt;         // sharp frames kept by tick index
  int gt_index = 0;                // index of the training target in gt
  int t_rgb_us = 0;
  int tau_diff_us = 0;
  int n = 0;
  int mid_index = 0;
  int height = 0;
  int width = 0;

  const Frame& gt_frame() const { return gt.at(gt_index); }
};

// Builds a sample from the first n sharp frames of `sharp`. gt_index -1
// selects the mid frame. keep_all_gt retains every sharp frame in gt;
// otherwise only the target frame is kept.
CVSSample make_sample(const std::vector<Frame>& sharp, const ExposureConfig& cfg, int gt_index = -1,
                      bool keep_all_gt = false);

// Tail-lengthening augmentation: replaces the last temporal difference with
// the sum of itself and the first m post-exposure differences, accumulated
// on dequantized values and then requantized. m must lie in [1, 3].
CVSSample augment_td_tail(const CVSSample& s, const std::vector<QuantFrame>& extra_tds, int m);

}  // namespace cvsdeblur
