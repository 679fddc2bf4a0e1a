#include "cvsdeblur/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cvsdeblur/errors.hpp"

namespace cvsdeblur {

ExposureInfo compute_exposure(const ExposureConfig& cfg) {
  if (cfg.t_rgb_us <= 0) throw ValidationError("compute_exposure: t_rgb_us must be positive");
  if (cfg.tau_diff_us <= 0) throw ValidationError("compute_exposure: tau_diff_us must be positive");
  if (cfg.t_rgb_us <= cfg.tau_diff_us) {
    throw ValidationError("compute_exposure: exposure " + std::to_string(cfg.t_rgb_us) +
                          "us does not span multiple difference ticks of " + std::to_string(cfg.tau_diff_us) +
                          "us");
  }
  ExposureInfo info;
  info.n = static_cast<int>((static_cast<std::int64_t>(cfg.t_rgb_us) + cfg.tau_diff_us - 1) / cfg.tau_diff_us);
  info.mid_index = (info.n - 1) / 2;
  return info;
}

namespace {
void check_intensity_frame(const Frame& f, const char* what) {
  if (f.height < 8 || f.width < 8) {
    throw ValidationError(std::string(what) + ": extents must be at least 8x8, got " + std::to_string(f.height) +
                          "x" + std::to_string(f.width));
  }
  validate_range(f, 0.0f, 1.0f, what);
}
}  // namespace

Frame spatial_difference(const Frame& frame) {
  check_intensity_frame(frame, "spatial_difference");
  const Frame I = luma(frame);
  const int H = I.height, W = I.width;
  Frame out(H, W, 2);
  for (int y = 0; y < H; ++y) {
    const int yu = std::max(y - 1, 0);
    const int yd = std::min(y + 1, H - 1);
    for (int x = 0; x < W; ++x) {
      const int xr = std::min(x + 1, W - 1);
      const float c = I.at(y, x, 0);
      out.at(y, x, 0) = I.at(yu, xr, 0) - c;
      out.at(y, x, 1) = I.at(yd, xr, 0) - c;
    }
  }
  return out;
}

Frame temporal_difference(const Frame& prev, const Frame& next) {
  check_intensity_frame(prev, "temporal_difference (prev)");
  check_intensity_frame(next, "temporal_difference (next)");
  if (prev.height != next.height || prev.width != next.width || prev.channels != next.channels) {
    throw ValidationError("temporal_difference: frame shapes differ");
  }
  const Frame a = luma(prev);
  const Frame b = luma(next);
  Frame out(a.height, a.width, 1);
  for (std::int64_t i = 0; i < out.size(); ++i) out.data[i] = b.data[i] - a.data[i];
  return out;
}

QuantFrame quantize(const Frame& d, int bits) {
  if (bits < 1 || bits > 7) throw ValidationError("quantize: bits must lie in [1, 7]");
  for (float v : d.data) {
    if (!std::isfinite(v)) throw ValidationError("quantize: non-finite value");
  }
  const float scale = static_cast<float>((1 << bits) - 1);
  QuantFrame q(d.height, d.width, d.channels, bits);
  for (std::int64_t i = 0; i < d.size(); ++i) {
    // round half away from zero, then clamp to the signed code range
    const float r = std::round(d.data[i] * scale);
    q.data[i] = static_cast<std::int8_t>(std::clamp(r, -scale, scale));
  }
  return q;
}

Frame dequantize(const QuantFrame& q) {
  const float inv = 1.0f / static_cast<float>((1 << q.bit_depth) - 1);
  Frame out(q.height, q.width, q.channels);
  for (std::int64_t i = 0; i < q.size(); ++i) out.data[i] = static_cast<float>(q.data[i]) * inv;
  return out;
}

Frame synthesize_blur(const std::vector<Frame>& frames) {
  if (frames.empty()) throw ValidationError("synthesize_blur: empty frame list");
  Frame out(frames[0].height, frames[0].width, frames[0].channels);
  // Double accumulation keeps the mean of n identical frames bit-exact: the
  // sum n*x is exact in double for any float x, and dividing it back by n
  // returns x before the final narrowing.
  std::vector<double> acc(static_cast<size_t>(out.size()), 0.0);
  for (const Frame& f : frames) {
    check_intensity_frame(f, "synthesize_blur");
    if (!f.same_shape(out)) throw ValidationError("synthesize_blur: frame shapes differ");
    for (std::int64_t i = 0; i < out.size(); ++i) acc[static_cast<size_t>(i)] += f.data[i];
  }
  const double n = static_cast<double>(frames.size());
  for (std::int64_t i = 0; i < out.size(); ++i) {
    out.data[i] = static_cast<float>(acc[static_cast<size_t>(i)] / n);
  }
  return out;
}

CVSSample make_sample(const std::vector<Frame>& sharp, const ExposureConfig& cfg, int gt_index,
                      bool keep_all_gt) {
  const ExposureInfo info = compute_exposure(cfg);
  if (static_cast<int>(sharp.size()) < info.n) {
    throw ValidationError("make_sample: exposure needs " + std::to_string(info.n) + " frames, got " +
                          std::to_string(sharp.size()));
  }
  if (gt_index == -1) gt_index = info.mid_index;
  if (gt_index < 0 || gt_index >= info.n) {
    throw ValidationError("make_sample: gt_index " + std::to_string(gt_index) + " outside [0, " +
                          std::to_string(info.n) + ")");
  }
  for (int i = 0; i < info.n; ++i) {
    if (sharp[static_cast<size_t>(i)].channels != 3) {
      throw ValidationError("make_sample: sharp frames must be RGB");
    }
    if (!sharp[static_cast<size_t>(i)].same_shape(sharp[0])) {
      throw ValidationError("make_sample: sharp frame shapes differ");
    }
  }

  CVSSample s;
  s.t_rgb_us = cfg.t_rgb_us;
  s.tau_diff_us = cfg.tau_diff_us;
  s.n = info.n;
  s.mid_index = info.mid_index;
  s.gt_index = gt_index;
  s.height = sharp[0].height;
  s.width = sharp[0].width;

  std::vector<Frame> window(sharp.begin(), sharp.begin() + info.n);
  s.blur = synthesize_blur(window);
  s.sd_seq.reserve(static_cast<size_t>(info.n));
  for (int k = 0; k < info.n; ++k) s.sd_seq.push_back(quantize(spatial_difference(window[static_cast<size_t>(k)])));
  s.td_seq.reserve(static_cast<size_t>(info.n) - 1);
  for (int i = 0; i + 1 < info.n; ++i) {
    s.td_seq.push_back(quantize(temporal_difference(window[static_cast<size_t>(i)], window[static_cast<size_t>(i) + 1])));
  }
  if (keep_all_gt) {
    for (int k = 0; k < info.n; ++k) s.gt.emplace(k, window[static_cast<size_t>(k)]);
  } else {
    s.gt.emplace(gt_index, window[static_cast<size_t>(gt_index)]);
  }
  return s;
}

CVSSample augment_td_tail(const CVSSample& s, const std::vector<QuantFrame>& extra_tds, int m) {
  if (m < 1 || m > 3) throw ValidationError("augment_td_tail: m must lie in [1, 3]");
  if (s.td_seq.empty()) throw ValidationError("augment_td_tail: sample has no temporal differences");
  if (static_cast<int>(extra_tds.size()) < m) {
    throw ValidationError("augment_td_tail: need " + std::to_string(m) + " extra differences, got " +
                          std::to_string(extra_tds.size()));
  }
  Frame acc = dequantize(s.td_seq.back());
  for (int j = 0; j < m; ++j) {
    const QuantFrame& e = extra_tds[static_cast<size_t>(j)];
    if (e.height != acc.height || e.width != acc.width || e.channels != acc.channels) {
      throw ValidationError("augment_td_tail: extra difference shape mismatch");
    }
    const Frame ef = dequantize(e);
    for (std::int64_t i = 0; i < acc.size(); ++i) acc.data[i] += ef.data[i];
  }
  CVSSample out = s;
  out.td_seq.back() = quantize(acc, s.td_seq.back().bit_depth);
  return out;
}

}  // namespace cvsdeblur
