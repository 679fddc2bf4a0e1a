#include "cvsdeblur/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "cvsdeblur/errors.hpp"

namespace cvsdeblur::metrics {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

double psnr(const Frame& a, const Frame& b) {
  if (!a.same_shape(b)) throw ValidationError("psnr: shape mismatch");
  if (a.size() == 0) throw ValidationError("psnr: empty frames");
  double sse = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.size());
  if (!(mse > 1e-10)) return 100.0;
  return std::min(100.0, -10.0 * std::log10(mse));
}

double ssim(const Frame& a, const Frame& b) {
  if (!a.same_shape(b)) throw ValidationError("ssim: shape mismatch");
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  if (a.height < kWin || a.width < kWin) {
    throw ValidationError("ssim: frames smaller than the " + std::to_string(kWin) + "x" +
                          std::to_string(kWin) + " window");
  }

  std::array<double, kWin * kWin> w;
  {
    double sum = 0.0;
    for (int y = 0; y < kWin; ++y) {
      for (int x = 0; x < kWin; ++x) {
        const double dy = y - kWin / 2, dx = x - kWin / 2;
        w[static_cast<size_t>(y * kWin + x)] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
        sum += w[static_cast<size_t>(y * kWin + x)];
      }
    }
    for (double& v : w) v /= sum;
  }

  double total = 0.0;
  std::int64_t count = 0;
  for (int c = 0; c < a.channels; ++c) {
    for (int y0 = 0; y0 + kWin <= a.height; ++y0) {
      for (int x0 = 0; x0 + kWin <= a.width; ++x0) {
        double mx = 0.0, my = 0.0;
        for (int y = 0; y < kWin; ++y) {
          for (int x = 0; x < kWin; ++x) {
            const double wi = w[static_cast<size_t>(y * kWin + x)];
            mx += wi * a.at(y0 + y, x0 + x, c);
            my += wi * b.at(y0 + y, x0 + x, c);
          }
        }
        double vx = 0.0, vy = 0.0, cov = 0.0;
        for (int y = 0; y < kWin; ++y) {
          for (int x = 0; x < kWin; ++x) {
            const double wi = w[static_cast<size_t>(y * kWin + x)];
            const double dx = a.at(y0 + y, x0 + x, c) - mx;
            const double dy = b.at(y0 + y, x0 + x, c) - my;
            vx += wi * dx * dx;
            vy += wi * dy * dy;
            cov += wi * dx * dy;
          }
        }
        const double num = (2.0 * mx * my + kC1) * (2.0 * cov + kC2);
        const double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
        total += num / den;
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

double sample_circle(const Frame& f, double cx, double cy, double radius, double theta) {
  const Frame L = luma(f);
  const double px = cx + radius * std::cos(theta);
  const double py = cy + radius * std::sin(theta);
  // Pixel (i, j) has its center at (j + 0.5, i + 0.5).
  const double u = px - 0.5;
  const double v = py - 0.5;
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  if (x0 < 0 || y0 < 0 || x0 + 1 >= L.width || y0 + 1 >= L.height) {
    throw ValidationError("sample_circle: circle leaves the frame");
  }
  const double fx = u - x0;
  const double fy = v - y0;
  const double top = L.at(y0, x0, 0) * (1.0 - fx) + L.at(y0, x0 + 1, 0) * fx;
  const double bot = L.at(y0 + 1, x0, 0) * (1.0 - fx) + L.at(y0 + 1, x0 + 1, 0) * fx;
  return top * (1.0 - fy) + bot * fy;
}

std::vector<ProfilePoint> angular_profile(const Frame& f, double cx, double cy, double radius, int n_samples) {
  if (n_samples < 16) throw ValidationError("angular_profile: need at least 16 samples");
  if (!(radius > 0)) throw ValidationError("angular_profile: radius must be positive");
  const Frame L = luma(f);
  std::vector<ProfilePoint> out;
  out.reserve(static_cast<size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    const double theta = kTwoPi * i / n_samples;
    ProfilePoint p;
    p.theta = theta;
    p.value = sample_circle(L, cx, cy, radius, theta);
    out.push_back(p);
  }
  return out;
}

namespace {

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Solves the 4x4 system A x = rhs in place; partial pivoting.
bool solve4(std::array<std::array<double, 4>, 4>& A, std::array<double, 4>& rhs) {
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    }
    if (std::abs(A[piv][col]) < 1e-300) return false;
    std::swap(A[col], A[piv]);
    std::swap(rhs[col], rhs[piv]);
    for (int r = col + 1; r < 4; ++r) {
      const double f = A[r][col] / A[col][col];
      for (int c2 = col; c2 < 4; ++c2) A[r][c2] -= f * A[col][c2];
      rhs[r] -= f * rhs[col];
    }
  }
  for (int col = 3; col >= 0; --col) {
    double s = rhs[col];
    for (int c2 = col + 1; c2 < 4; ++c2) s -= A[col][c2] * rhs[c2];
    rhs[col] = s / A[col][col];
  }
  return true;
}

double sse_of(const std::vector<ProfilePoint>& seg, const std::array<double, 4>& p) {
  double sse = 0.0;
  for (const auto& pt : seg) {
    const double r = p[2] * logistic(p[0] * pt.theta + p[1]) + p[3] - pt.value;
    sse += r * r;
  }
  return sse;
}

}  // namespace

SigmoidFit fit_sigmoid(const std::vector<ProfilePoint>& segment) {
  if (segment.size() < 8) throw ValidationError("fit_sigmoid: need at least 8 points");
  double lo = segment[0].value, hi = segment[0].value;
  for (const auto& pt : segment) {
    lo = std::min(lo, pt.value);
    hi = std::max(hi, pt.value);
  }
  SigmoidFit fit;
  if (!(hi - lo > 1e-12)) return fit;  // flat segment, nothing to fit

  // Initial guesses: plateau levels from the extremes, center from the 50%
  // crossing, slope from the finite difference across it.
  const double mid = 0.5 * (lo + hi);
  double theta_c = segment[segment.size() / 2].theta;
  double slope = 0.0;
  for (size_t i = 0; i + 1 < segment.size(); ++i) {
    const double v0 = segment[i].value, v1 = segment[i + 1].value;
    if ((v0 - mid) * (v1 - mid) <= 0.0 && v1 != v0) {
      const double t = (mid - v0) / (v1 - v0);
      theta_c = segment[i].theta + t * (segment[i + 1].theta - segment[i].theta);
      slope = (v1 - v0) / (segment[i + 1].theta - segment[i].theta);
      break;
    }
  }
  const double span = segment.back().theta - segment.front().theta;
  double a0 = (slope > 0.0) ? 4.0 * slope / (hi - lo) : 10.0 / std::max(span, 1e-9);
  std::array<double, 4> p{a0, -a0 * theta_c, hi - lo, lo};

  double sse = sse_of(segment, p);
  double lambda = 1e-3;
  for (int iter = 1; iter <= 100; ++iter) {
    fit.iterations = iter;
    // Normal equations from the analytic Jacobian.
    std::array<std::array<double, 4>, 4> jtj{};
    std::array<double, 4> jtr{};
    for (const auto& pt : segment) {
      const double s = logistic(p[0] * pt.theta + p[1]);
      const double ds = s * (1.0 - s);
      const std::array<double, 4> j{p[2] * ds * pt.theta, p[2] * ds, s, 1.0};
      const double r = p[2] * s + p[3] - pt.value;
      for (int row = 0; row < 4; ++row) {
        for (int col = row; col < 4; ++col) jtj[row][col] += j[row] * j[col];
        jtr[row] += j[row] * r;
      }
    }
    for (int row = 1; row < 4; ++row) {
      for (int col = 0; col < row; ++col) jtj[row][col] = jtj[col][row];
    }

    bool advanced = false;
    while (lambda <= 1e12) {
      auto A = jtj;
      for (int d = 0; d < 4; ++d) A[d][d] += lambda * std::max(jtj[d][d], 1e-12);
      std::array<double, 4> delta{-jtr[0], -jtr[1], -jtr[2], -jtr[3]};
      if (solve4(A, delta)) {
        const std::array<double, 4> trial{p[0] + delta[0], p[1] + delta[1], p[2] + delta[2], p[3] + delta[3]};
        const double trial_sse = sse_of(segment, trial);
        if (trial_sse <= sse) {
          p = trial;
          sse = trial_sse;
          lambda = std::max(lambda / 3.0, 1e-12);
          double step = 0.0;
          for (int d = 0; d < 4; ++d) {
            const double scaled = delta[d] / (1.0 + std::abs(p[d]));
            step += scaled * scaled;
          }
          if (std::sqrt(step) < 1e-10) fit.converged = true;
          advanced = true;
          break;
        }
      }
      lambda *= 4.0;
    }
    if (!advanced || fit.converged) break;
  }

  fit.a = p[0];
  fit.b = p[1];
  fit.delta = p[2];
  fit.g_min = p[3];
  fit.rmse = std::sqrt(sse / static_cast<double>(segment.size()));
  if (!std::isfinite(fit.a) || !std::isfinite(fit.b) || !std::isfinite(fit.delta) || !std::isfinite(fit.g_min)) {
    fit.converged = false;
  }
  return fit;
}

double bew(double a) {
  if (!(std::abs(a) > 0.0)) throw ValidationError("bew: zero slope has no transition width");
  return 2.0 * std::log(9.0) / std::abs(a);
}

std::vector<EdgeMeasurement> measure_edges(const std::vector<ProfilePoint>& profile) {
  if (profile.size() < 16) throw ValidationError("measure_edges: need at least 16 profile samples");
  const size_t n = profile.size();
  double lo = profile[0].value, hi = profile[0].value;
  for (const auto& pt : profile) {
    lo = std::min(lo, pt.value);
    hi = std::max(hi, pt.value);
  }
  std::vector<EdgeMeasurement> edges;
  if (!(hi - lo > 1e-9)) return edges;  // flat profile has no edges
  const double mid = 0.5 * (lo + hi);

  // 50%-level crossings of the closed profile, with interpolated angles.
  struct Crossing {
    double theta;
    bool rising;
  };
  std::vector<Crossing> crossings;
  for (size_t i = 0; i < n; ++i) {
    const size_t j = (i + 1) % n;
    const bool side_i = profile[i].value >= mid;
    const bool side_j = profile[j].value >= mid;
    if (side_i == side_j) continue;
    const double theta_i = profile[i].theta;
    const double theta_j = (j == 0) ? profile[j].theta + kTwoPi : profile[j].theta;
    const double t = (mid - profile[i].value) / (profile[j].value - profile[i].value);
    crossings.push_back({theta_i + t * (theta_j - theta_i), side_j});
  }
  if (crossings.size() < 2) return edges;

  for (size_t e = 0; e < crossings.size(); ++e) {
    const Crossing& cur = crossings[e];
    const Crossing& prev = crossings[(e + crossings.size() - 1) % crossings.size()];
    const Crossing& next = crossings[(e + 1) % crossings.size()];
    auto cyc_gap = [](double from, double to) {
      double d = to - from;
      d -= kTwoPi * std::floor(d / kTwoPi);
      return d;
    };
    const double half_prev = 0.5 * cyc_gap(prev.theta, cur.theta);
    const double half_next = 0.5 * cyc_gap(cur.theta, next.theta);

    // Collect samples whose cyclic offset from the crossing falls inside the
    // segment window, unwrapped around the crossing angle.
    std::vector<ProfilePoint> seg;
    for (const auto& pt : profile) {
      double d = pt.theta - cur.theta;
      d -= kTwoPi * std::round(d / kTwoPi);
      if (d >= -half_prev && d < half_next) seg.push_back({cur.theta + d, pt.value});
    }
    std::sort(seg.begin(), seg.end(), [](const ProfilePoint& x, const ProfilePoint& y) { return x.theta < y.theta; });

    EdgeMeasurement em;
    em.theta_center = cur.theta - kTwoPi * std::floor(cur.theta / kTwoPi);
    em.rising = cur.rising;
    if (seg.size() >= 8) {
      if (!cur.rising) {
        // Reflect so the fitted transition always rises.
        for (auto& pt : seg) pt.theta = 2.0 * cur.theta - pt.theta;
        std::sort(seg.begin(), seg.end(),
                  [](const ProfilePoint& x, const ProfilePoint& y) { return x.theta < y.theta; });
      }
      em.fit = fit_sigmoid(seg);
      if (em.fit.converged && std::abs(em.fit.a) > 0.0) em.width = bew(em.fit.a);
    }
    edges.push_back(std::move(em));
  }
  return edges;
}

RBewReport mean_rbew(const Frame& test, const Frame& reference, const DiskGeometry& geom, int n_samples) {
  if (geom.sectors < 2) throw ValidationError("mean_rbew: geometry without sectors");
  RBewReport rep;
  rep.test_edges = measure_edges(angular_profile(test, geom.cx, geom.cy, geom.radius, n_samples));
  rep.ref_edges = measure_edges(angular_profile(reference, geom.cx, geom.cy, geom.radius, n_samples));
  if (rep.test_edges.empty() || rep.ref_edges.empty()) {
    throw ValidationError("mean_rbew: zero usable edges");
  }
  double sum = 0.0;
  for (const auto& te : rep.test_edges) {
    if (!(te.fit.converged && te.width > 0.0)) {
      ++rep.excluded;
      continue;
    }
    // Nearest reference edge by cyclic angle.
    const EdgeMeasurement* best = nullptr;
    double best_d = 1e300;
    for (const auto& re : rep.ref_edges) {
      double d = std::abs(te.theta_center - re.theta_center);
      d = std::min(d, kTwoPi - d);
      if (d < best_d) {
        best_d = d;
        best = &re;
      }
    }
    if (!best || !(best->fit.converged && best->width > 0.0)) {
      ++rep.excluded;
      continue;
    }
    rep.rbews.push_back(te.width / best->width);
    sum += rep.rbews.back();
  }
  if (rep.rbews.empty()) throw ValidationError("mean_rbew: zero usable edges");
  rep.mean_rbew = sum / static_cast<double>(rep.rbews.size());
  return rep;
}

}  // namespace cvsdeblur::metrics
