#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cvsdeblur/errors.hpp"
#include "cvsdeblur/grad_check.hpp"
#include "cvsdeblur/ops.hpp"
#include "cvsdeblur/tensor.hpp"

using namespace cvsdeblur;
using nn::Shape;

namespace {

std::vector<double> random_values(size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

template <typename T>
nn::TensorT<T> constant(const Shape& shape, const std::vector<double>& vals) {
  std::vector<T> cast(vals.size());
  for (size_t i = 0; i < vals.size(); ++i) cast[i] = static_cast<T>(vals[i]);
  return nn::TensorT<T>::from_vector(shape, std::move(cast));
}

size_t numel(const Shape& s) {
  size_t n = 1;
  for (int d : s) n *= static_cast<size_t>(d);
  return n;
}

}  // namespace

TEST_CASE("autograd engine basics") {
  SUBCASE("mean of squares has gradient 2x/n") {
    auto x = nn::Tensor::from_vector({4}, {1.0f, -2.0f, 3.0f, 0.5f}).set_requires_grad(true);
    auto loss = nn::mean_all(nn::mul(x, x));
    nn::backward(loss);
    for (int i = 0; i < 4; ++i) {
      CHECK(x.grad()[static_cast<size_t>(i)] ==
            doctest::Approx(2.0f * x.value()[static_cast<size_t>(i)] / 4.0f));
    }
  }

  SUBCASE("a node used twice accumulates both paths") {
    auto x = nn::Tensor::from_vector({1}, {3.0f}).set_requires_grad(true);
    auto y = nn::add(x, x);  // dy/dx = 2
    auto loss = nn::mean_all(nn::mul(y, y));  // d/dx (2x)^2 = 8x
    nn::backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(24.0f));
  }

  SUBCASE("backward demands a scalar root") {
    auto x = nn::Tensor::from_vector({2}, {1.0f, 2.0f}).set_requires_grad(true);
    auto y = nn::add(x, x);
    CHECK_THROWS_AS(nn::backward(y), ValidationError);
  }

  SUBCASE("grad access without requires_grad throws") {
    auto x = nn::Tensor::zeros({2});
    CHECK_THROWS_AS((void)x.grad(), ValidationError);
  }

  SUBCASE("constants do not propagate gradients") {
    auto x = nn::Tensor::from_vector({2}, {1.0f, 2.0f}).set_requires_grad(true);
    auto c = nn::Tensor::from_vector({2}, {5.0f, 5.0f});
    auto loss = nn::mean_all(nn::mul(x, c));
    nn::backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(2.5f));
    CHECK_FALSE(c.node()->requires_grad);
  }
}

TEST_CASE("elementwise and reduction forward values") {
  auto a = nn::Tensor::from_vector({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
  auto b = nn::Tensor::from_vector({2, 2}, {0.5f, -1.0f, 2.0f, 0.0f});

  CHECK(nn::add(a, b).value() == std::vector<float>{1.5f, 1.0f, 5.0f, 4.0f});
  CHECK(nn::sub(a, b).value() == std::vector<float>{0.5f, 3.0f, 1.0f, 4.0f});
  CHECK(nn::mul(a, b).value() == std::vector<float>{0.5f, -2.0f, 6.0f, 0.0f});
  CHECK(nn::add_scalar(a, 1.5f).value() == std::vector<float>{2.5f, 3.5f, 4.5f, 5.5f});
  CHECK(nn::scale(a, -2.0f).value() == std::vector<float>{-2.0f, -4.0f, -6.0f, -8.0f});
  CHECK(nn::mean_all(a).value()[0] == doctest::Approx(2.5f));
  CHECK(nn::log_e(a).value()[1] == doctest::Approx(std::log(2.0f)));
  CHECK_THROWS_AS(nn::add(a, nn::Tensor::zeros({3})), ValidationError);
  CHECK_THROWS_AS(nn::log_e(nn::Tensor::from_vector({1}, {0.0f})), NumericError);
  CHECK_THROWS_AS(nn::log_e(nn::Tensor::from_vector({1}, {-1.0f})), NumericError);
}

TEST_CASE("activation forward values") {
  auto x = nn::Tensor::from_vector({4}, {-2.0f, -0.5f, 0.0f, 3.0f});
  auto lr = nn::leaky_relu(x, 0.1f);
  CHECK(lr.value() == std::vector<float>{-0.2f, -0.05f, 0.0f, 3.0f});
  auto sg = nn::sigmoid(x);
  for (int i = 0; i < 4; ++i) {
    const double z = x.value()[static_cast<size_t>(i)];
    CHECK(sg.value()[static_cast<size_t>(i)] == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-6));
  }
}

TEST_CASE("conv2d matches a direct sliding-window oracle") {
  // Independent oracle: naive loop with explicit zero padding, no im2col.
  auto oracle = [](const std::vector<double>& x, const std::vector<double>& w, const std::vector<double>& b,
                   int B, int Cin, int H, int W, int Cout, int k, int s) {
    const int pad = k / 2;
    const int Ho = (H + 2 * pad - k) / s + 1;
    const int Wo = (W + 2 * pad - k) / s + 1;
    std::vector<double> y(static_cast<size_t>(B) * Cout * Ho * Wo, 0.0);
    for (int n = 0; n < B; ++n)
      for (int co = 0; co < Cout; ++co)
        for (int yo = 0; yo < Ho; ++yo)
          for (int xo = 0; xo < Wo; ++xo) {
            double acc = b[static_cast<size_t>(co)];
            for (int ci = 0; ci < Cin; ++ci)
              for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                  const int yi = yo * s - pad + ky, xi = xo * s - pad + kx;
                  if (yi < 0 || yi >= H || xi < 0 || xi >= W) continue;
                  acc += x[((static_cast<size_t>(n) * Cin + ci) * H + yi) * W + xi] *
                         w[((static_cast<size_t>(co) * Cin + ci) * k + ky) * k + kx];
                }
            y[((static_cast<size_t>(n) * Cout + co) * Ho + yo) * Wo + xo] = acc;
          }
    return y;
  };

  std::uint64_t seed = 50;
  for (int k : {1, 3}) {
    for (int s : {1, 2}) {
      if (k == 1 && s == 2) continue;  // unused in the network
      const int B = 2, Cin = 3, H = 7, W = 6, Cout = 4;
      const auto xv = random_values(static_cast<size_t>(B) * Cin * H * W, seed++);
      const auto wv = random_values(static_cast<size_t>(Cout) * Cin * k * k, seed++);
      const auto bv = random_values(static_cast<size_t>(Cout), seed++);
      auto y = nn::conv2d(constant<float>({B, Cin, H, W}, xv), constant<float>({Cout, Cin, k, k}, wv),
                          constant<float>({Cout}, bv), s);
      const auto want = oracle(xv, wv, bv, B, Cin, H, W, Cout, k, s);
      REQUIRE(y.value().size() == want.size());
      CAPTURE(k); CAPTURE(s);
      const int pad = k / 2;
      CHECK(y.dim(2) == (H + 2 * pad - k) / s + 1);
      CHECK(y.dim(3) == (W + 2 * pad - k) / s + 1);
      for (size_t i = 0; i < want.size(); ++i) CHECK(y.value()[i] == doctest::Approx(want[i]).epsilon(1e-4));
    }
  }

  CHECK_THROWS_AS(nn::conv2d(nn::Tensor::zeros({1, 2, 4, 4}), nn::Tensor::zeros({3, 2, 5, 5}),
                             nn::Tensor::zeros({3}), 1),
                  ValidationError);
  CHECK_THROWS_AS(nn::conv2d(nn::Tensor::zeros({1, 2, 4, 4}), nn::Tensor::zeros({3, 4, 3, 3}),
                             nn::Tensor::zeros({3}), 1),
                  ValidationError);
}

TEST_CASE("attention matches a naive softmax oracle") {
  const int B = 2, Lq = 5, Lk = 7, D = 3, Dv = 4;
  const auto qv = random_values(static_cast<size_t>(B) * Lq * D, 11);
  const auto kv = random_values(static_cast<size_t>(B) * Lk * D, 12);
  const auto vv = random_values(static_cast<size_t>(B) * Lk * Dv, 13);

  std::vector<double> want(static_cast<size_t>(B) * Lq * Dv, 0.0);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));
  for (int n = 0; n < B; ++n)
    for (int i = 0; i < Lq; ++i) {
      std::vector<double> logits(static_cast<size_t>(Lk));
      double mx = -1e300;
      for (int j = 0; j < Lk; ++j) {
        double dot = 0.0;
        for (int d = 0; d < D; ++d)
          dot += qv[(static_cast<size_t>(n) * Lq + i) * D + d] * kv[(static_cast<size_t>(n) * Lk + j) * D + d];
        logits[static_cast<size_t>(j)] = dot * inv_sqrt_d;
        mx = std::max(mx, logits[static_cast<size_t>(j)]);
      }
      double z = 0.0;
      for (double& l : logits) {
        l = std::exp(l - mx);
        z += l;
      }
      for (int j = 0; j < Lk; ++j)
        for (int d = 0; d < Dv; ++d)
          want[(static_cast<size_t>(n) * Lq + i) * Dv + d] +=
              logits[static_cast<size_t>(j)] / z * vv[(static_cast<size_t>(n) * Lk + j) * Dv + d];
    }

  auto out = nn::attention(constant<float>({B, Lq, D}, qv), constant<float>({B, Lk, D}, kv),
                           constant<float>({B, Lk, Dv}, vv));
  REQUIRE(out.shape() == Shape{B, Lq, Dv});
  for (size_t i = 0; i < want.size(); ++i) CHECK(out.value()[i] == doctest::Approx(want[i]).epsilon(1e-4));

  // Softmax rows sum to one even under large logits (max subtraction).
  auto big = nn::attention(constant<float>({1, 2, 1}, {100.0, -100.0}), constant<float>({1, 2, 1}, {100.0, 50.0}),
                           constant<float>({1, 2, 1}, {1.0, 2.0}));
  CHECK(std::isfinite(big.value()[0]));
  CHECK(big.value()[0] == doctest::Approx(1.0));  // saturated softmax picks v[0]
}

TEST_CASE("layout ops are exact permutations") {
  SUBCASE("upsample_nearest2x replicates each pixel") {
    auto x = nn::Tensor::from_vector({1, 1, 2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
    auto y = nn::upsample_nearest2x(x);
    REQUIRE(y.shape() == Shape{1, 1, 4, 4});
    const std::vector<float> want = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    CHECK(y.value() == want);
  }

  SUBCASE("concat and slice are inverses") {
    auto a = nn::Tensor::from_vector({1, 2, 1, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
    auto b = nn::Tensor::from_vector({1, 1, 1, 2}, {5.0f, 6.0f});
    auto c = nn::concat_channels(std::vector<nn::Tensor>{a, b});
    REQUIRE(c.shape() == Shape{1, 3, 1, 2});
    CHECK(c.value() == std::vector<float>{1, 2, 3, 4, 5, 6});
    CHECK(nn::slice_channels(c, 0, 2).value() == a.value());
    CHECK(nn::slice_channels(c, 2, 1).value() == b.value());
  }

  SUBCASE("pad_reflect mirrors without repeating the border") {
    auto x = nn::Tensor::from_vector({1, 1, 2, 3}, {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f});
    auto y = nn::pad_reflect(x, 0, 1, 0, 1);
    REQUIRE(y.shape() == Shape{1, 1, 3, 4});
    const std::vector<float> want = {1, 2, 3, 2, 4, 5, 6, 5, 1, 2, 3, 2};
    CHECK(y.value() == want);
    CHECK_THROWS_AS(nn::pad_reflect(x, 2, 0, 0, 0), ValidationError);  // pad must stay below extent
  }

  SUBCASE("crop extracts the window") {
    auto x = nn::Tensor::from_vector({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    auto y = nn::crop(x, 1, 0, 2, 2);
    CHECK(y.value() == std::vector<float>{4, 5, 7, 8});
  }

  SUBCASE("token round trip restores the map") {
    const auto xv = random_values(2 * 3 * 4 * 5, 77);
    auto x = constant<float>({2, 3, 4, 5}, xv);
    auto t = nn::bchw_to_tokens(x);
    REQUIRE(t.shape() == Shape{2, 20, 3});
    auto back = nn::tokens_to_bchw(t, 4, 5);
    CHECK(back.value() == x.value());
  }
}

TEST_CASE("per-op gradients agree with finite differences in double") {
  // Rel err budget 1e-4; f64 graphs land far below it.
  nn::GradCheckOptions opt;
  opt.max_coords_per_param = 12;

  auto check = [&](const char* label, auto&& builder,
                   const std::vector<std::pair<Shape, std::vector<double>>>& init, std::uint64_t seed) {
    opt.seed = seed;
    auto res = nn::grad_check<double>(builder, init, opt);
    CAPTURE(label);
    CAPTURE(seed);
    CHECK(res.max_rel_err < 1e-4);
    CHECK(res.coords_checked > 0);
  };

  for (std::uint64_t s = 1; s <= 5; ++s) {
    for (int c = 1; c <= 4; ++c) {
      const Shape img{1, c, 16, 16};
      const auto xv = random_values(numel(img), 100 * s + static_cast<std::uint64_t>(c));

      {
        const Shape wsh{3, c, 3, 3};
        check("conv k3 s1",
              [&](const auto& p) {
                return nn::mean_all(nn::mul(nn::conv2d(p[0], p[1], p[2], 1), nn::conv2d(p[0], p[1], p[2], 1)));
              },
              {{img, xv}, {wsh, random_values(numel(wsh), s + 20)}, {{3}, random_values(3, s + 21)}}, s);
      }
      {
        const Shape wsh{2, c, 3, 3};
        check("conv k3 s2",
              [&](const auto& p) {
                return nn::mean_all(nn::mul(nn::conv2d(p[0], p[1], p[2], 2), nn::conv2d(p[0], p[1], p[2], 2)));
              },
              {{img, xv}, {wsh, random_values(numel(wsh), s + 30)}, {{2}, random_values(2, s + 31)}}, s);
      }
      {
        const Shape wsh{3, c, 1, 1};
        check("conv k1 s1",
              [&](const auto& p) {
                return nn::mean_all(nn::mul(nn::conv2d(p[0], p[1], p[2], 1), nn::conv2d(p[0], p[1], p[2], 1)));
              },
              {{img, xv}, {wsh, random_values(numel(wsh), s + 40)}, {{3}, random_values(3, s + 41)}}, s);
      }
      check("leaky_relu",
            [&](const auto& p) {
              using U = typename std::decay_t<decltype(p[0])>::value_type;
              return nn::mean_all(nn::mul(nn::leaky_relu(p[0], static_cast<U>(0.1)), p[0]));
            },
            {{img, xv}}, s);
      check("sigmoid",
            [&](const auto& p) { return nn::mean_all(nn::mul(nn::sigmoid(p[0]), p[0])); }, {{img, xv}}, s);
      {
        const auto yv = random_values(numel(img), 500 * s + static_cast<std::uint64_t>(c));
        check("pad/crop/upsample/tokens pipeline",
              [&](const auto& p) {
                using U = typename std::decay_t<decltype(p[0])>::value_type;
                auto m = nn::mul(nn::add(p[0], p[1]), nn::sub(p[0], nn::scale(p[1], static_cast<U>(0.5))));
                auto padded = nn::pad_reflect(m, 1, 2, 2, 1);
                auto up = nn::upsample_nearest2x(nn::crop(padded, 1, 1, 16, 16));
                auto tok = nn::tokens_to_bchw(nn::bchw_to_tokens(up), 32, 32);
                return nn::mean_all(nn::mul(tok, tok));
              },
              {{img, xv}, {img, yv}}, s);
        check("concat and slice",
              [&](const auto& p) {
                using TT = typename std::decay_t<decltype(p[0])>;
                auto cat = nn::concat_channels(std::vector<TT>{p[0], p[1]});
                auto left = nn::slice_channels(cat, 0, c);
                auto right = nn::slice_channels(cat, c, c);
                return nn::mean_all(nn::mul(left, right));
              },
              {{img, xv}, {img, yv}}, s);
      }
      check("log_e over shifted square",
            [&](const auto& p) {
              using U = typename std::decay_t<decltype(p[0])>::value_type;
              auto sq = nn::add_scalar(nn::mul(p[0], p[0]), static_cast<U>(0.5));
              return nn::mean_all(nn::log_e(sq));
            },
            {{img, xv}}, s);
    }
    {
      const Shape qs{1, 6, 4}, ks{1, 9, 4}, vs{1, 9, 3};
      check("attention",
            [&](const auto& p) {
              auto o = nn::attention(p[0], p[1], p[2]);
              return nn::mean_all(nn::mul(o, o));
            },
            {{qs, random_values(numel(qs), s + 70)},
             {ks, random_values(numel(ks), s + 71)},
             {vs, random_values(numel(vs), s + 72)}},
            s);
    }
  }
}
