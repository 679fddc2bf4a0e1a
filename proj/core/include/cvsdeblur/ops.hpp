#pragma once

#include "cvsdeblur/tensor.hpp"

namespace cvsdeblur::nn {

// Differentiable ops over [B, C, H, W] maps and [B, L, D] token tensors.
// Every op validates shapes up front and attaches an analytic backward.

// 2-D convolution, kernel k in {1, 3}, stride in {1, 2}, zero padding k/2.
// x: [B, Cin, H, W], w: [Cout, Cin, k, k], bias: [Cout].
// Output extents are ceil(H/stride) x ceil(W/stride).
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& bias, int stride = 1);

template <typename T>
TensorT<T> leaky_relu(const TensorT<T>& x, T negative_slope);

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x);

// Scaled dot-product attention. q: [B, Lq, D], k: [B, Lk, D], v: [B, Lk, Dv];
// logits are scaled by 1/sqrt(D) before the row softmax. The softmax matrix
// is not retained; backward recomputes it from the saved q and k values.
template <typename T>
TensorT<T> attention(const TensorT<T>& q, const TensorT<T>& k, const TensorT<T>& v);

template <typename T>
TensorT<T> upsample_nearest2x(const TensorT<T>& x);

template <typename T>
TensorT<T> concat_channels(const std::vector<TensorT<T>>& xs);

template <typename T>
TensorT<T> slice_channels(const TensorT<T>& x, int from, int count);

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b);

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b);

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b);

template <typename T>
TensorT<T> add_scalar(const TensorT<T>& x, T c);

template <typename T>
TensorT<T> scale(const TensorT<T>& x, T c);

// Natural log; throws NumericError on non-positive input values.
template <typename T>
TensorT<T> log_e(const TensorT<T>& x);

template <typename T>
TensorT<T> mean_all(const TensorT<T>& x);

// Mirror padding about the edge pixel (the edge itself is not repeated).
// Each pad must be strictly smaller than the padded extent.
template <typename T>
TensorT<T> pad_reflect(const TensorT<T>& x, int top, int bottom, int left, int right);

template <typename T>
TensorT<T> crop(const TensorT<T>& x, int top, int left, int h, int w);

// [B, C, H, W] -> [B, H*W, C] and back; the pair composes to the identity.
template <typename T>
TensorT<T> bchw_to_tokens(const TensorT<T>& x);

template <typename T>
TensorT<T> tokens_to_bchw(const TensorT<T>& x, int h, int w);

namespace detail {
// In-place row softmax with per-row max subtraction; shared by attention
// forward and its recomputing backward.
template <typename T>
void softmax_rows(T* data, int rows, int cols);
}  // namespace detail

}  // namespace cvsdeblur::nn
