#pragma once

#include <vector>

#include "cvsdeblur/disk.hpp"
#include "cvsdeblur/frame.hpp"

namespace cvsdeblur::metrics {

// Peak signal-to-noise ratio in dB over all channels, capped at 100 dB
// (mse <= 1e-10 counts as a perfect match).
double psnr(const Frame& a, const Frame& b);

// Mean SSIM with the standard 11x11 Gaussian window (sigma 1.5) on unit-range
// data, averaged over valid window positions and channels. Frames must be at
// least 11x11.
double ssim(const Frame& a, const Frame& b);

// Bilinear luma sample on the circle (cx, cy, radius) at angle theta.
// y grows downward, so theta runs clockwise in image terms; what matters is
// that the renderer and the metric share the convention.
double sample_circle(const Frame& f, double cx, double cy, double radius, double theta);

struct ProfilePoint {
  double theta = 0.0;
  double value = 0.0;
};

// Luma profile at n_samples uniformly spaced angles in [0, 2pi).
std::vector<ProfilePoint> angular_profile(const Frame& f, double cx, double cy, double radius, int n_samples);

// Logistic edge model S(t) = delta / (1 + exp(-(a t + b))) + g_min.
struct SigmoidFit {
  double a = 0.0;
  double b = 0.0;
  double delta = 0.0;
  double g_min = 0.0;
  double rmse = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Damped Gauss-Newton fit of the logistic edge model to a profile segment
// holding exactly one rising transition. Convergence is a scaled step norm
// below 1e-10 within 100 iterations.
SigmoidFit fit_sigmoid(const std::vector<ProfilePoint>& segment);

// 10%-90% transition width of the fitted model: 2 * ln(9) / |a|.
double bew(double a);

struct EdgeMeasurement {
  double theta_center = 0.0;  // 50%-crossing angle
  bool rising = true;
  SigmoidFit fit;
  double width = 0.0;  // bew(fit.a), 0 when the fit failed
};

// Cuts the closed profile into per-edge segments and fits each one. Segments
// are centered on the 50%-level crossings and bounded by the midpoints to the
// neighboring crossings, so each holds one full transition; falling edges are
// reflected in theta before fitting.
std::vector<EdgeMeasurement> measure_edges(const std::vector<ProfilePoint>& profile);

struct RBewReport {
  std::vector<EdgeMeasurement> test_edges;
  std::vector<EdgeMeasurement> ref_edges;
  std::vector<double> rbews;  // per usable test edge, matched to nearest ref edge
  double mean_rbew = 0.0;
  int excluded = 0;  // edges dropped for failed fits on either side
};

// Mean relative edge width of `test` against the static reference chart,
// both sampled on the same circle. Throws ValidationError when no edge pair
// is usable.
RBewReport mean_rbew(const Frame& test, const Frame& reference, const DiskGeometry& geom, int n_samples = 720);

}  // namespace cvsdeblur::metrics
