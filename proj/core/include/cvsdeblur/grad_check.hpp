#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "cvsdeblur/errors.hpp"
#include "cvsdeblur/tensor.hpp"

namespace cvsdeblur::nn {

struct GradCheckOptions {
  // Base central-difference step. Deep graphs with piecewise-linear
  // activations scatter kinks densely along any parameter axis; the step must
  // be small enough that stencil windows rarely contain one. The numeric side
  // always evaluates in double, so truncation still dominates rounding here.
  double h = 1e-6;
  double denom_floor_frac = 1e-2;  // denominator floor as a fraction of the largest analytic grad
  int max_coords_per_param = 0;    // 0 checks every coordinate
  std::uint64_t seed = 7;          // coordinate subsampling
  double nonsmooth_tol = 1e-3;  // two-step disagreement that marks a kink crossing
  // Forward/backward disagreement that marks a straddled kink. The blend
  // error of the central estimate is about half the forward/backward gap, so
  // this bounds undetected contamination at roughly onesided_tol / 2.
  double onesided_tol = 1e-4;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  int coords_checked = 0;
  int coords_skipped_nonsmooth = 0;
};

// Compares reverse-mode gradients against central differences.
//
// The analytic side runs the builder at precision T; the numeric side always
// runs it at double so the oracle does not inherit float rounding. Two step
// sizes (h and h/2) are combined by Richardson extrapolation; coordinates
// where the two estimates disagree land inside a non-differentiable kink and
// are skipped rather than scored. A kink sitting almost exactly at the
// evaluation point leaves the central estimates consistent with each other
// but slope-blended; that case is caught by comparing the forward and
// backward one-sided differences, which then disagree by the slope ratio.
//
// Builder must be callable as build(params) -> scalar tensor for parameter
// vectors of both TensorT<T> and TensorT<double>, and must be a pure function
// of the parameter values.
template <typename T, typename Builder>
GradCheckResult grad_check(Builder&& build, const std::vector<std::pair<Shape, std::vector<double>>>& init,
                           const GradCheckOptions& opt = {}) {
  if (init.empty()) throw ValidationError("grad_check: no parameters");

  // Analytic gradients at precision T.
  std::vector<std::vector<double>> analytic;
  {
    std::vector<TensorT<T>> params;
    params.reserve(init.size());
    for (const auto& [shape, vals] : init) {
      std::vector<T> cast(vals.size());
      for (size_t i = 0; i < vals.size(); ++i) cast[i] = static_cast<T>(vals[i]);
      params.push_back(TensorT<T>::from_vector(shape, std::move(cast)).set_requires_grad(true));
    }
    TensorT<T> loss = build(params);
    if (loss.numel() != 1) throw ValidationError("grad_check: builder must return a scalar");
    if (!std::isfinite(static_cast<double>(loss.value()[0]))) throw NumericError("grad_check: non-finite loss");
    backward(loss);
    for (auto& p : params) {
      std::vector<double> g(p.grad().size());
      for (size_t i = 0; i < g.size(); ++i) g[i] = static_cast<double>(p.grad()[i]);
      analytic.push_back(std::move(g));
    }
  }

  double gmax = 0.0;
  for (const auto& g : analytic) {
    for (double v : g) gmax = std::max(gmax, std::abs(v));
  }

  // Forward-only double evaluation of the loss at the given parameter values.
  std::vector<std::vector<double>> master;
  for (const auto& [shape, vals] : init) master.push_back(vals);
  auto eval = [&](const std::vector<std::vector<double>>& vals) -> double {
    std::vector<TensorT<double>> params;
    params.reserve(init.size());
    for (size_t i = 0; i < init.size(); ++i) {
      params.push_back(TensorT<double>::from_vector(init[i].first, vals[i]));
    }
    TensorT<double> loss = build(params);
    return loss.value()[0];
  };

  std::mt19937_64 rng(opt.seed);
  GradCheckResult res;
  const double floor = std::max(1e-12, opt.denom_floor_frac * gmax);
  for (size_t pi = 0; pi < init.size(); ++pi) {
    const size_t n = init[pi].second.size();
    std::vector<size_t> coords(n);
    for (size_t i = 0; i < n; ++i) coords[i] = i;
    if (opt.max_coords_per_param > 0 && n > static_cast<size_t>(opt.max_coords_per_param)) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<size_t>(opt.max_coords_per_param));
    }
    for (size_t ci : coords) {
      const double x0 = master[pi][ci];
      auto at = [&](double dx) {
        master[pi][ci] = x0 + dx;
        const double f = eval(master);
        master[pi][ci] = x0;
        return f;
      };
      const double hh = opt.h / 2.0;
      const double fp1 = at(opt.h), fm1 = at(-opt.h);
      const double fp2 = at(hh), fm2 = at(-hh);
      const double f0 = at(0.0);
      const double g1 = (fp1 - fm1) / (2.0 * opt.h);
      const double g2 = (fp2 - fm2) / (2.0 * hh);
      if (std::abs(g1 - g2) > opt.nonsmooth_tol * std::max({std::abs(g1), std::abs(g2), floor})) {
        ++res.coords_skipped_nonsmooth;
        continue;
      }
      const double fwd = (fp2 - f0) / hh;
      const double bwd = (f0 - fm2) / hh;
      if (std::abs(fwd - bwd) > opt.onesided_tol * std::max({std::abs(fwd), std::abs(bwd), floor})) {
        ++res.coords_skipped_nonsmooth;
        continue;
      }
      const double gn = (4.0 * g2 - g1) / 3.0;
      const double ga = analytic[pi][ci];
      const double rel = std::abs(ga - gn) / std::max({std::abs(ga), std::abs(gn), floor});
      res.max_rel_err = std::max(res.max_rel_err, rel);
      ++res.coords_checked;
    }
  }
  if (res.coords_checked == 0) throw NumericError("grad_check: every sampled coordinate hit a kink");
  return res;
}

}  // namespace cvsdeblur::nn
