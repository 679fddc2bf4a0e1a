#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "cvsdeblur/disk.hpp"
#include "cvsdeblur/errors.hpp"
#include "cvsdeblur/frame.hpp"
#include "cvsdeblur/metrics.hpp"
#include "cvsdeblur/sensor.hpp"

using namespace cvsdeblur;
using namespace cvsdeblur::metrics;

namespace {

Frame random_frame(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  Frame f(h, w, c);
  for (float& v : f.data) v = dist(rng);
  return f;
}

constexpr double kTau = 2.0 * std::numbers::pi;

double logistic_model(double a, double b, double delta, double g, double t) {
  return delta / (1.0 + std::exp(-(a * t + b))) + g;
}

std::vector<ProfilePoint> synth_segment(double a, double b, double delta, double g, double lo, double hi, int n) {
  std::vector<ProfilePoint> seg;
  for (int i = 0; i < n; ++i) {
    const double t = lo + (hi - lo) * i / (n - 1);
    seg.push_back({t, logistic_model(a, b, delta, g, t)});
  }
  return seg;
}

}  // namespace

TEST_CASE("psnr") {
  Frame a = random_frame(8, 8, 3, 1);
  for (float& v : a.data) v *= 0.9f;
  CHECK(psnr(a, a) == 100.0);

  // Uniform offset keeps every value in range; compare to the closed form
  // computed from the actually stored floats.
  Frame b = a;
  for (float& v : b.data) v += 0.05f;
  double sse = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(b.data[i]) - static_cast<double>(a.data[i]);
    sse += d * d;
  }
  const double want = -10.0 * std::log10(sse / static_cast<double>(a.size()));
  CHECK(psnr(a, b) == doctest::Approx(want).epsilon(1e-12));
  CHECK(psnr(a, b) == psnr(b, a));
  CHECK_THROWS_AS(psnr(a, Frame(8, 9, 3)), ValidationError);
}

TEST_CASE("ssim") {
  const Frame a = random_frame(16, 16, 3, 2);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-9));

  // Constant frames have zero variance, so only the luminance term is left:
  // ssim = (2 mx my + C1) / (mx^2 + my^2 + C1).
  Frame cx(16, 16, 1), cy(16, 16, 1);
  for (float& v : cx.data) v = 0.3f;
  for (float& v : cy.data) v = 0.6f;
  const double c1 = 0.01 * 0.01;
  const double want = (2.0 * 0.3 * 0.6 + c1) / (0.3 * 0.3 + 0.6 * 0.6 + c1);
  CHECK(ssim(cx, cy) == doctest::Approx(want).epsilon(1e-5));

  // Distortion moves the index strictly below one.
  const Frame noisy = random_frame(16, 16, 3, 3);
  CHECK(ssim(a, noisy) < 0.9);
  CHECK(ssim(a, noisy) == doctest::Approx(ssim(noisy, a)).epsilon(1e-12));
  CHECK_THROWS_AS(ssim(Frame(8, 8, 1), Frame(8, 8, 1)), ValidationError);  // below the window size
}

TEST_CASE("circle sampling") {
  Frame flat(32, 32, 3);
  for (float& v : flat.data) v = 0.7f;
  CHECK(sample_circle(flat, 16, 16, 8, 1.3) == doctest::Approx(0.7).epsilon(1e-6));

  // Bilinear interpolation of a linear ramp is exact: f(x) = x / 64.
  Frame ramp(32, 32, 1);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) ramp.at(y, x, 0) = static_cast<float>(x) / 64.0f;
  for (double theta : {0.0, 0.7, 2.0, 4.1}) {
    const double px = 16.0 + 10.0 * std::cos(theta);
    CHECK(sample_circle(ramp, 16, 16, 10, theta) == doctest::Approx((px - 0.5) / 64.0).epsilon(1e-5));
  }
  CHECK_THROWS_AS(sample_circle(flat, 16, 16, 40, 0.0), ValidationError);

  const auto prof = angular_profile(flat, 16, 16, 8, 90);
  REQUIRE(prof.size() == 90);
  CHECK(prof[0].theta == 0.0);
  CHECK(prof[45].theta == doctest::Approx(kTau / 2).epsilon(1e-12));
  for (const auto& p : prof) CHECK(p.value == doctest::Approx(0.7).epsilon(1e-6));
}

TEST_CASE("sigmoid fit recovers exact logistic parameters") {
  // Noiseless synthetic edge: recovery should reach the optimizer's own
  // convergence floor, far below 1e-6.
  const double a = 3.0, b = -2.0, delta = 0.7, g = 0.1;
  const auto seg = synth_segment(a, b, delta, g, -2.0, 3.5, 120);
  const SigmoidFit fit = fit_sigmoid(seg);
  CHECK(fit.converged);
  CHECK(fit.a == doctest::Approx(a).epsilon(1e-6));
  CHECK(fit.b == doctest::Approx(b).epsilon(1e-6));
  CHECK(fit.delta == doctest::Approx(delta).epsilon(1e-6));
  CHECK(fit.g_min == doctest::Approx(g).epsilon(1e-6));
  CHECK(fit.rmse < 1e-9);
  CHECK(fit.iterations <= 100);
}

TEST_CASE("sigmoid fit tolerates noise and varied shapes") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.004);
  for (auto [a, b, delta, g] : std::vector<std::array<double, 4>>{
           {2.0, 0.5, 0.9, 0.05}, {8.0, -4.0, 0.5, 0.2}, {0.8, 0.0, 1.0, 0.0}}) {
    auto seg = synth_segment(a, b, delta, g, -3.0, 3.0, 90);
    for (auto& p : seg) p.value += noise(rng);
    const SigmoidFit fit = fit_sigmoid(seg);
    CAPTURE(a);
    CHECK(fit.converged);
    CHECK(fit.a == doctest::Approx(a).epsilon(0.08));
    CHECK(bew(fit.a) == doctest::Approx(bew(a)).epsilon(0.08));
  }
  CHECK_THROWS_AS(fit_sigmoid(std::vector<ProfilePoint>(4)), ValidationError);
}

TEST_CASE("edge width closed form") {
  for (double a : {0.5, 2.0, 10.0}) {
    CHECK(bew(a) == doctest::Approx(2.0 * std::log(9.0) / a).epsilon(1e-15));
    CHECK(bew(-a) == bew(a));
  }
  // The 10%-90% interval of the fitted model really is that wide: at
  // t = b/a +- ln(9)/a the logistic sits at 0.1 and 0.9 of its swing.
  const double a = 2.0;
  const double t10 = (-std::log(9.0) - 0.0) / a, t90 = (std::log(9.0) - 0.0) / a;
  CHECK(logistic_model(a, 0.0, 1.0, 0.0, t10) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(logistic_model(a, 0.0, 1.0, 0.0, t90) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(t90 - t10 == doctest::Approx(bew(a)).epsilon(1e-12));
  CHECK_THROWS_AS(bew(0.0), ValidationError);
}

TEST_CASE("edge measurement on a synthetic wheel profile") {
  // Four logistic transitions around the circle, alternating rising/falling,
  // all with slope magnitude 12 against theta. High sectors are logistic
  // pulses summed over period replicas so the profile is smooth across the
  // wrap and every transition is locally an exact logistic.
  const double a = 12.0;
  const int n = 720;
  std::vector<ProfilePoint> prof;
  const double centers[4] = {kTau * 0.125, kTau * 0.375, kTau * 0.625, kTau * 0.875};
  auto sigma = [&](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  for (int i = 0; i < n; ++i) {
    const double theta = kTau * i / n;
    double pulses = 0.0;
    for (int j = -1; j <= 1; ++j) {
      const double t = theta + kTau * j;
      // High between c1 and c2, and between c3 and c0 of the next period.
      pulses += sigma(a * (t - centers[1])) - sigma(a * (t - centers[2]));
      pulses += sigma(a * (t - centers[3])) - sigma(a * (t - (centers[0] + kTau)));
    }
    prof.push_back({theta, 0.5 + 0.3 * pulses});
  }
  const auto edges = measure_edges(prof);
  REQUIRE(edges.size() == 4);
  int rising = 0;
  for (const auto& e : edges) {
    CHECK(e.fit.converged);
    CHECK(e.width == doctest::Approx(bew(a)).epsilon(0.05));
    rising += e.rising ? 1 : 0;
  }
  CHECK(rising == 2);
  // Centers match the construction.
  for (int i = 0; i < 4; ++i) {
    double best = 1e9;
    for (const auto& e : edges) best = std::min(best, std::abs(e.theta_center - centers[i]));
    CHECK(best < 0.01);
  }
}

TEST_CASE("flat profiles yield no edges") {
  std::vector<ProfilePoint> flat;
  for (int i = 0; i < 64; ++i) flat.push_back({kTau * i / 64, 0.5});
  CHECK(measure_edges(flat).empty());
}

TEST_CASE("relative edge width of the sector disk") {
  DiskSpec spec;
  spec.rpm = 0.0;
  spec.n_frames = 1;
  const Frame ref = render_disk_frames(spec)[0];
  const DiskGeometry geom = disk_geometry(spec);

  SUBCASE("a static disk against itself sits at one") {
    const RBewReport rep = mean_rbew(ref, ref, geom);
    CHECK(rep.test_edges.size() == 8);
    CHECK(rep.ref_edges.size() == 8);
    CHECK(rep.mean_rbew == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("exposure-averaged rotation widens the edges") {
    DiskSpec moving = spec;
    moving.rpm = 300.0;
    moving.n_frames = 5;
    const Frame blurred = synthesize_blur(render_disk_frames(moving));
    const RBewReport rep = mean_rbew(blurred, ref, geom);
    CHECK(rep.mean_rbew > 1.2);
    CHECK(rep.rbews.size() + static_cast<size_t>(rep.excluded) == rep.test_edges.size());
  }

  SUBCASE("mismatched flat input throws") {
    Frame flat(128, 128, 3);
    for (float& v : flat.data) v = 0.5f;
    CHECK_THROWS_AS(mean_rbew(flat, ref, geom), ValidationError);
  }
}
