#include "cvsdeblur/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cvsdeblur/errors.hpp"
#include "cvsdeblur/gemm.hpp"

namespace cvsdeblur::nn {

namespace {

template <typename T>
void check_rank(const TensorT<T>& t, int rank, const char* op, const char* arg) {
  if (!t.defined()) throw ValidationError(std::string(op) + ": " + arg + " is undefined");
  if (t.rank() != rank) {
    throw ValidationError(std::string(op) + ": " + arg + " must have rank " + std::to_string(rank) +
                          ", shape is " + shape_str(t.shape()));
  }
}

template <typename T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ValidationError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
  }
}

// Unpacks x[b] into column matrix col[Cin*k*k, P] for zero padding k/2.
template <typename T>
void im2col(const T* x, int C, int H, int W, int k, int stride, T* col) {
  const int pad = k / 2;
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  const int P = Ho * Wo;
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + (static_cast<long>(c) * k * k + ky * k + kx) * P;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= H) {
            std::fill_n(dst + static_cast<long>(oy) * Wo, Wo, T(0));
            continue;
          }
          const T* src_row = x + (static_cast<long>(c) * H + iy) * W;
          T* dst_row = dst + static_cast<long>(oy) * Wo;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            dst_row[ox] = (ix < 0 || ix >= W) ? T(0) : src_row[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int C, int H, int W, int k, int stride, T* dx) {
  const int pad = k / 2;
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  const int P = Ho * Wo;
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col + (static_cast<long>(c) * k * k + ky * k + kx) * P;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= H) continue;
          T* dst_row = dx + (static_cast<long>(c) * H + iy) * W;
          const T* src_row = src + static_cast<long>(oy) * Wo;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < W) dst_row[ix] += src_row[ox];
          }
        }
      }
    }
  }
}

}  // namespace

namespace detail {
template <typename T>
void softmax_rows(T* data, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    T* row = data + static_cast<long>(r) * cols;
    T m = row[0];
    for (int c = 1; c < cols; ++c) m = std::max(m, row[c]);
    T sum = T(0);
    for (int c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - m);
      sum += row[c];
    }
    const T inv = T(1) / sum;
    for (int c = 0; c < cols; ++c) row[c] *= inv;
  }
}

template void softmax_rows<float>(float*, int, int);
template void softmax_rows<double>(double*, int, int);
}  // namespace detail

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& bias, int stride) {
  check_rank(x, 4, "conv2d", "input");
  check_rank(w, 4, "conv2d", "weight");
  check_rank(bias, 1, "conv2d", "bias");
  const int B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = w.dim(0), k = w.dim(2);
  if (w.dim(2) != w.dim(3) || (k != 1 && k != 3)) {
    throw ValidationError("conv2d: unsupported kernel size " + shape_str(w.shape()));
  }
  if (w.dim(1) != Cin) {
    throw ValidationError("conv2d: weight expects " + std::to_string(w.dim(1)) + " input channels, input has " +
                          std::to_string(Cin));
  }
  if (bias.dim(0) != Cout) throw ValidationError("conv2d: bias size does not match output channels");
  if (stride != 1 && stride != 2) throw ValidationError("conv2d: unsupported stride " + std::to_string(stride));

  const int pad = k / 2;
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  const int P = Ho * Wo;
  const int K = Cin * k * k;
  const bool direct = (k == 1 && stride == 1);

  TensorT<T> out = detail::make_op<T>({B, Cout, Ho, Wo}, {x, w, bias});
  {
    std::vector<T> col;
    if (!direct) col.resize(static_cast<size_t>(K) * P);
    for (int b = 0; b < B; ++b) {
      const T* xb = x.value().data() + static_cast<long>(b) * Cin * H * W;
      const T* cb = xb;
      if (!direct) {
        im2col(xb, Cin, H, W, k, stride, col.data());
        cb = col.data();
      }
      T* ob = out.value().data() + static_cast<long>(b) * Cout * P;
      gemm_nn(Cout, P, K, w.value().data(), K, cb, P, ob, P, false);
      for (int c = 0; c < Cout; ++c) {
        const T bv = bias.value()[static_cast<size_t>(c)];
        T* row = ob + static_cast<long>(c) * P;
        for (int p = 0; p < P; ++p) row[p] += bv;
      }
    }
  }

  if (out.requires_grad()) {
    auto xn = x.node();
    auto wn = w.node();
    auto bn = bias.node();
    out.node()->backward_fn = [=](TensorNode<T>& n) {
      const std::vector<T>& g = n.grad;
      std::vector<T> col;
      std::vector<T> dcol;
      std::vector<T> wt;
      if (!direct && (wn->requires_grad || xn->requires_grad)) col.resize(static_cast<size_t>(K) * P);
      if (xn->requires_grad) {
        wt.resize(static_cast<size_t>(K) * Cout);
        transpose(Cout, K, wn->value.data(), K, wt.data(), Cout);
        if (!direct) dcol.resize(static_cast<size_t>(K) * P);
      }
      for (int b = 0; b < B; ++b) {
        const T* gb = g.data() + static_cast<long>(b) * Cout * P;
        const T* xb = xn->value.data() + static_cast<long>(b) * Cin * H * W;
        if (bn->requires_grad) {
          for (int c = 0; c < Cout; ++c) {
            T s = T(0);
            const T* row = gb + static_cast<long>(c) * P;
            for (int p = 0; p < P; ++p) s += row[p];
            bn->grad[static_cast<size_t>(c)] += s;
          }
        }
        const T* cb = xb;
        if (!direct && (wn->requires_grad || xn->requires_grad)) {
          im2col(xb, Cin, H, W, k, stride, col.data());
          cb = col.data();
        }
        if (wn->requires_grad) {
          gemm_nt(Cout, K, P, gb, P, cb, P, wn->grad.data(), K, true);
        }
        if (xn->requires_grad) {
          T* dxb = xn->grad.data() + static_cast<long>(b) * Cin * H * W;
          if (direct) {
            gemm_nn(K, P, Cout, wt.data(), Cout, gb, P, dxb, P, true);
          } else {
            gemm_nn(K, P, Cout, wt.data(), Cout, gb, P, dcol.data(), P, false);
            col2im_add(dcol.data(), Cin, H, W, k, stride, dxb);
          }
        }
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> leaky_relu(const TensorT<T>& x, T negative_slope) {
  if (!x.defined()) throw ValidationError("leaky_relu: undefined input");
  TensorT<T> out = detail::make_op<T>(x.shape(), {x});
  const size_t n = x.value().size();
  for (size_t i = 0; i < n; ++i) {
    const T v = x.value()[i];
    out.value()[i] = v >= T(0) ? v : negative_slope * v;
  }
  if (out.requires_grad()) {
    auto xn = x.node();
    out.node()->backward_fn = [xn, negative_slope, n](TensorNode<T>& node) {
      for (size_t i = 0; i < n; ++i) {
        xn->grad[i] += node.grad[i] * (xn->value[i] >= T(0) ? T(1) : negative_slope);
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
  if (!x.defined()) throw ValidationError("sigmoid: undefined input");
  TensorT<T> out = detail::make_op<T>(x.shape(), {x});
  const size_t n = x.value().size();
  for (size_t i = 0; i < n; ++i) {
    const T v = x.value()[i];
    // Both branches keep the exp argument non-positive.
    if (v >= T(0)) {
      out.value()[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out.value()[i] = e / (T(1) + e);
    }
  }
  if (out.requires_grad()) {
    auto xn = x.node();
    // The callback receives the output node; capturing out.node() here would
    // make the node own itself through the closure and leak its upstream graph.
    out.node()->backward_fn = [xn, n](TensorNode<T>& node) {
      for (size_t i = 0; i < n; ++i) {
        const T y = node.value[i];
        xn->grad[i] += node.grad[i] * y * (T(1) - y);
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> attention(const TensorT<T>& q, const TensorT<T>& k, const TensorT<T>& v) {
  check_rank(q, 3, "attention", "q");
  check_rank(k, 3, "attention", "k");
  check_rank(v, 3, "attention", "v");
  const int B = q.dim(0), Lq = q.dim(1), D = q.dim(2);
  const int Lk = k.dim(1), Dv = v.dim(2);
  if (k.dim(0) != B || v.dim(0) != B) throw ValidationError("attention: batch mismatch");
  if (k.dim(2) != D) {
    throw ValidationError("attention: key dim " + std::to_string(k.dim(2)) + " does not match query dim " +
                          std::to_string(D));
  }
  if (v.dim(1) != Lk) throw ValidationError("attention: value length does not match key length");
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(D));

  TensorT<T> out = detail::make_op<T>({B, Lq, Dv}, {q, k, v});
  {
    std::vector<T> kt(static_cast<size_t>(D) * Lk);
    std::vector<T> s(static_cast<size_t>(Lq) * Lk);
    for (int b = 0; b < B; ++b) {
      const T* qb = q.value().data() + static_cast<long>(b) * Lq * D;
      const T* kb = k.value().data() + static_cast<long>(b) * Lk * D;
      const T* vb = v.value().data() + static_cast<long>(b) * Lk * Dv;
      transpose(Lk, D, kb, D, kt.data(), Lk);
      gemm_nn(Lq, Lk, D, qb, D, kt.data(), Lk, s.data(), Lk, false);
      for (T& e : s) e *= inv_sqrt_d;
      detail::softmax_rows(s.data(), Lq, Lk);
      gemm_nn(Lq, Dv, Lk, s.data(), Lk, vb, Dv, out.value().data() + static_cast<long>(b) * Lq * Dv, Dv, false);
    }
  }

  if (out.requires_grad()) {
    auto qn = q.node();
    auto kn = k.node();
    auto vn = v.node();
    out.node()->backward_fn = [=](TensorNode<T>& node) {
      std::vector<T> kt(static_cast<size_t>(D) * Lk);
      std::vector<T> p(static_cast<size_t>(Lq) * Lk);
      std::vector<T> dp(static_cast<size_t>(Lq) * Lk);
      std::vector<T> vt(static_cast<size_t>(Dv) * Lk);
      for (int b = 0; b < B; ++b) {
        const T* qb = qn->value.data() + static_cast<long>(b) * Lq * D;
        const T* kb = kn->value.data() + static_cast<long>(b) * Lk * D;
        const T* vb = vn->value.data() + static_cast<long>(b) * Lk * Dv;
        const T* gb = node.grad.data() + static_cast<long>(b) * Lq * Dv;
        transpose(Lk, D, kb, D, kt.data(), Lk);
        gemm_nn(Lq, Lk, D, qb, D, kt.data(), Lk, p.data(), Lk, false);
        for (T& e : p) e *= inv_sqrt_d;
        detail::softmax_rows(p.data(), Lq, Lk);
        if (vn->requires_grad) {
          gemm_tn(Lk, Dv, Lq, p.data(), Lk, gb, Dv, vn->grad.data() + static_cast<long>(b) * Lk * Dv, Dv, true);
        }
        if (!qn->requires_grad && !kn->requires_grad) continue;
        transpose(Lk, Dv, vb, Dv, vt.data(), Lk);
        gemm_nn(Lq, Lk, Dv, gb, Dv, vt.data(), Lk, dp.data(), Lk, false);
        // dS = P o (dP - rowsum(dP o P)), then fold in the logit scale.
        for (int r = 0; r < Lq; ++r) {
          T* prow = p.data() + static_cast<long>(r) * Lk;
          T* dprow = dp.data() + static_cast<long>(r) * Lk;
          T dot = T(0);
          for (int c = 0; c < Lk; ++c) dot += prow[c] * dprow[c];
          for (int c = 0; c < Lk; ++c) dprow[c] = prow[c] * (dprow[c] - dot) * inv_sqrt_d;
        }
        if (qn->requires_grad) {
          gemm_nn(Lq, D, Lk, dp.data(), Lk, kb, D, qn->grad.data() + static_cast<long>(b) * Lq * D, D, true);
        }
        if (kn->requires_grad) {
          gemm_tn(Lk, D, Lq, dp.data(), Lk, qb, D, kn->grad.data() + static_cast<long>(b) * Lk * D, D, true);
        }
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> upsample_nearest2x(const TensorT<T>& x) {
  check_rank(x, 4, "upsample_nearest2x", "input");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  TensorT<T> out = detail::make_op<T>({B, C, 2 * H, 2 * W}, {x});
  const long planes = static_cast<long>(B) * C;
  for (long pl = 0; pl < planes; ++pl) {
    const T* src = x.value().data() + pl * H * W;
    T* dst = out.value().data() + pl * 4 * H * W;
    for (int y = 0; y < H; ++y) {
      for (int x2 = 0; x2 < W; ++x2) {
        const T v = src[static_cast<long>(y) * W + x2];
        T* d0 = dst + (static_cast<long>(2 * y) * 2 * W + 2 * x2);
        d0[0] = v;
        d0[1] = v;
        d0[2 * W] = v;
        d0[2 * W + 1] = v;
      }
    }
  }
  if (out.requires_grad()) {
    auto xn = x.node();
    out.node()->backward_fn = [xn, planes, H, W](TensorNode<T>& node) {
      for (long pl = 0; pl < planes; ++pl) {
        T* dx = xn->grad.data() + pl * H * W;
        const T* g = node.grad.data() + pl * 4 * H * W;
        for (int y = 0; y < H; ++y) {
          for (int x2 = 0; x2 < W; ++x2) {
            const T* g0 = g + (static_cast<long>(2 * y) * 2 * W + 2 * x2);
            dx[static_cast<long>(y) * W + x2] += g0[0] + g0[1] + g0[2 * W] + g0[2 * W + 1];
          }
        }
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> concat_channels(const std::vector<TensorT<T>>& xs) {
  if (xs.empty()) throw ValidationError("concat_channels: empty input list");
  check_rank(xs[0], 4, "concat_channels", "input");
  const int B = xs[0].dim(0), H = xs[0].dim(2), W = xs[0].dim(3);
  int Ctot = 0;
  for (const auto& x : xs) {
    check_rank(x, 4, "concat_channels", "input");
    if (x.dim(0) != B || x.dim(2) != H || x.dim(3) != W) {
      throw ValidationError("concat_channels: incompatible shape " + shape_str(x.shape()));
    }
    Ctot += x.dim(1);
  }
  TensorT<T> out = detail::make_op<T>({B, Ctot, H, W}, xs);
  const long hw = static_cast<long>(H) * W;
  for (int b = 0; b < B; ++b) {
    long coff = 0;
    for (const auto& x : xs) {
      const int c = x.dim(1);
      std::copy_n(x.value().data() + static_cast<long>(b) * c * hw, static_cast<long>(c) * hw,
                  out.value().data() + (static_cast<long>(b) * Ctot + coff) * hw);
      coff += c;
    }
  }
  if (out.requires_grad()) {
    std::vector<std::shared_ptr<TensorNode<T>>> nodes;
    for (const auto& x : xs) nodes.push_back(x.node());
    out.node()->backward_fn = [nodes, B, Ctot, hw](TensorNode<T>& node) {
      for (int b = 0; b < B; ++b) {
        long coff = 0;
        for (const auto& xn : nodes) {
          const int c = static_cast<int>(xn->shape[1]);
          if (xn->requires_grad) {
            const T* g = node.grad.data() + (static_cast<long>(b) * Ctot + coff) * hw;
            T* dx = xn->grad.data() + static_cast<long>(b) * c * hw;
            for (long i = 0; i < static_cast<long>(c) * hw; ++i) dx[i] += g[i];
          }
          coff += c;
        }
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> slice_channels(const TensorT<T>& x, int from, int count) {
  check_rank(x, 4, "slice_channels", "input");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (from < 0 || count <= 0 || from + count > C) {
    throw ValidationError("slice_channels: range [" + std::to_string(from) + ", " + std::to_string(from + count) +
                          ") outside " + std::to_string(C) + " channels");
  }
  TensorT<T> out = detail::make_op<T>({B, count, H, W}, {x});
  const long hw = static_cast<long>(H) * W;
  for (int b = 0; b < B; ++b) {
    std::copy_n(x.value().data() + (static_cast<long>(b) * C + from) * hw, static_cast<long>(count) * hw,
                out.value().data() + static_cast<long>(b) * count * hw);
  }
  if (out.requires_grad()) {
    auto xn = x.node();
    out.node()->backward_fn = [xn, B, C, from, count, hw](TensorNode<T>& node) {
      for (int b = 0; b < B; ++b) {
        const T* g = node.grad.data() + static_cast<long>(b) * count * hw;
        T* dx = xn->grad.data() + (static_cast<long>(b) * C + from) * hw;
        for (long i = 0; i < static_cast<long>(count) * hw; ++i) dx[i] += g[i];
      }
    };
  }
  return out;
}

namespace {
template <typename T, typename FwdFn, typename BwdA, typename BwdB>
TensorT<T> binary_elementwise(const TensorT<T>& a, const TensorT<T>& b, const char* op, FwdFn fwd, BwdA ga,
                              BwdB gb) {
  if (!a.defined() || !b.defined()) throw ValidationError(std::string(op) + ": undefined input");
  check_same_shape(a, b, op);
  TensorT<T> out = detail::make_op<T>(a.shape(), {a, b});
  const size_t n = a.value().size();
  for (size_t i = 0; i < n; ++i) out.value()[i] = fwd(a.value()[i], b.value()[i]);
  if (out.requires_grad()) {
    auto an = a.node();
    auto bn = b.node();
    out.node()->backward_fn = [an, bn, n, ga, gb](TensorNode<T>& node) {
      if (an->requires_grad) {
        for (size_t i = 0; i < n; ++i) an->grad[i] += node.grad[i] * ga(an->value[i], bn->value[i]);
      }
      if (bn->requires_grad) {
        for (size_t i = 0; i < n; ++i) bn->grad[i] += node.grad[i] * gb(an->value[i], bn->value[i]);
      }
    };
  }
  return out;
}
}  // namespace

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  return binary_elementwise(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); });
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  return binary_elementwise(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  return binary_elementwise(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <typename T>
TensorT<T> add_scalar(const TensorT<T>& x, T c) {
  if (!x.defined()) throw ValidationError("add_scalar: undefined input");
  TensorT<T> out = detail::make_op<T>(x.shape(), {x});
  const size_t n = x.value().size();
  for (size_t i = 0; i < n; ++i) out.value()[i] = x.value()[i] + c;
  if (out.requires_grad()) {
    auto xn = x.node();
    out.node()->backward_fn = [xn, n](TensorNode<T>& node) {
      for (size_t i = 0; i < n; ++i) xn->grad[i] += node.grad[i];
    };
  }
  return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& x, T c) {
  if (!x.defined()) throw ValidationError("scale: undefined input");
  TensorT<T> out = detail::make_op<T>(x.shape(), {x});
  const size_t n = x.value().size();
  for (size_t i = 0; i < n; ++i) out.value()[i] = x.value()[i] * c;
  if (out.requires_grad()) {
    auto xn = x.node();
    out.node()->backward_fn = [xn, n, c](TensorNode<T>& node) {
      for (size_t i = 0; i < n; ++i) xn->grad[i] += node.grad[i] * c;
    };
  }
  return out;
}

template <typename T>
TensorT<T> log_e(const TensorT<T>& x) {
  if (!x.defined()) throw ValidationError("log_e: undefined input");
  TensorT<T> out = detail::make_op<T>(x.shape(), {x});
  const size_t n = x.value().size();
  for (size_t i = 0; i < n; ++i) {
    const T v = x.value()[i];
    if (!(v > T(0))) throw NumericError("log_e: non-positive value " + std::to_string(v));
    out.value()[i] = std::log(v);
  }
  if (out.requires_grad()) {
    auto xn = x.node();
    out.node()->backward_fn = [xn, n](TensorNode<T>& node) {
      for (size_t i = 0; i < n; ++i) xn->grad[i] += node.grad[i] / xn->value[i];
    };
  }
  return out;
}

template <typename T>
TensorT<T> mean_all(const TensorT<T>& x) {
  if (!x.defined()) throw ValidationError("mean_all: undefined input");
  TensorT<T> out = detail::make_op<T>({1}, {x});
  const size_t n = x.value().size();
  T s = T(0);
  for (size_t i = 0; i < n; ++i) s += x.value()[i];
  out.value()[0] = s / static_cast<T>(n);
  if (out.requires_grad()) {
    auto xn = x.node();
    out.node()->backward_fn = [xn, n](TensorNode<T>& node) {
      const T g = node.grad[0] / static_cast<T>(n);
      for (size_t i = 0; i < n; ++i) xn->grad[i] += g;
    };
  }
  return out;
}

namespace {
// Mirror index about the first/last element without repeating the edge.
inline int reflect_index(int i, int extent) { return i < 0 ? -i : (i >= extent ? 2 * extent - 2 - i : i); }
}  // namespace

template <typename T>
TensorT<T> pad_reflect(const TensorT<T>& x, int top, int bottom, int left, int right) {
  check_rank(x, 4, "pad_reflect", "input");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (top < 0 || bottom < 0 || left < 0 || right < 0) throw ValidationError("pad_reflect: negative pad");
  if (top >= H || bottom >= H || left >= W || right >= W) {
    throw ValidationError("pad_reflect: pad must be smaller than the padded extent");
  }
  const int Ho = H + top + bottom, Wo = W + left + right;
  TensorT<T> out = detail::make_op<T>({B, C, Ho, Wo}, {x});
  const long planes = static_cast<long>(B) * C;
  for (long pl = 0; pl < planes; ++pl) {
    const T* src = x.value().data() + pl * H * W;
    T* dst = out.value().data() + pl * Ho * Wo;
    for (int oy = 0; oy < Ho; ++oy) {
      const int iy = reflect_index(oy - top, H);
      for (int ox = 0; ox < Wo; ++ox) {
        dst[static_cast<long>(oy) * Wo + ox] = src[static_cast<long>(iy) * W + reflect_index(ox - left, W)];
      }
    }
  }
  if (out.requires_grad()) {
    auto xn = x.node();
    out.node()->backward_fn = [xn, planes, H, W, Ho, Wo, top, left](TensorNode<T>& node) {
      for (long pl = 0; pl < planes; ++pl) {
        T* dx = xn->grad.data() + pl * H * W;
        const T* g = node.grad.data() + pl * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = reflect_index(oy - top, H);
          for (int ox = 0; ox < Wo; ++ox) {
            dx[static_cast<long>(iy) * W + reflect_index(ox - left, W)] += g[static_cast<long>(oy) * Wo + ox];
          }
        }
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> crop(const TensorT<T>& x, int top, int left, int h, int w) {
  check_rank(x, 4, "crop", "input");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (top < 0 || left < 0 || h <= 0 || w <= 0 || top + h > H || left + w > W) {
    throw ValidationError("crop: window outside input extents");
  }
  TensorT<T> out = detail::make_op<T>({B, C, h, w}, {x});
  const long planes = static_cast<long>(B) * C;
  for (long pl = 0; pl < planes; ++pl) {
    const T* src = x.value().data() + pl * H * W;
    T* dst = out.value().data() + pl * h * w;
    for (int y = 0; y < h; ++y) {
      std::copy_n(src + (static_cast<long>(top) + y) * W + left, w, dst + static_cast<long>(y) * w);
    }
  }
  if (out.requires_grad()) {
    auto xn = x.node();
    out.node()->backward_fn = [xn, planes, H, W, h, w, top, left](TensorNode<T>& node) {
      for (long pl = 0; pl < planes; ++pl) {
        T* dx = xn->grad.data() + pl * H * W;
        const T* g = node.grad.data() + pl * h * w;
        for (int y = 0; y < h; ++y) {
          const T* grow = g + static_cast<long>(y) * w;
          T* dxrow = dx + (static_cast<long>(top) + y) * W + left;
          for (int x2 = 0; x2 < w; ++x2) dxrow[x2] += grow[x2];
        }
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> bchw_to_tokens(const TensorT<T>& x) {
  check_rank(x, 4, "bchw_to_tokens", "input");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const long L = static_cast<long>(H) * W;
  TensorT<T> out = detail::make_op<T>({B, static_cast<int>(L), C}, {x});
  for (int b = 0; b < B; ++b) {
    const T* src = x.value().data() + static_cast<long>(b) * C * L;
    T* dst = out.value().data() + static_cast<long>(b) * L * C;
    for (int c = 0; c < C; ++c) {
      for (long l = 0; l < L; ++l) dst[l * C + c] = src[static_cast<long>(c) * L + l];
    }
  }
  if (out.requires_grad()) {
    auto xn = x.node();
    out.node()->backward_fn = [xn, B, C, L](TensorNode<T>& node) {
      for (int b = 0; b < B; ++b) {
        T* dx = xn->grad.data() + static_cast<long>(b) * C * L;
        const T* g = node.grad.data() + static_cast<long>(b) * L * C;
        for (int c = 0; c < C; ++c) {
          for (long l = 0; l < L; ++l) dx[static_cast<long>(c) * L + l] += g[l * C + c];
        }
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> tokens_to_bchw(const TensorT<T>& x, int h, int w) {
  check_rank(x, 3, "tokens_to_bchw", "input");
  const int B = x.dim(0), L = x.dim(1), C = x.dim(2);
  if (static_cast<long>(h) * w != L) {
    throw ValidationError("tokens_to_bchw: " + std::to_string(L) + " tokens cannot fill " + std::to_string(h) +
                          "x" + std::to_string(w));
  }
  TensorT<T> out = detail::make_op<T>({B, C, h, w}, {x});
  const long Ll = L;
  for (int b = 0; b < B; ++b) {
    const T* src = x.value().data() + static_cast<long>(b) * Ll * C;
    T* dst = out.value().data() + static_cast<long>(b) * C * Ll;
    for (int c = 0; c < C; ++c) {
      for (long l = 0; l < Ll; ++l) dst[static_cast<long>(c) * Ll + l] = src[l * C + c];
    }
  }
  if (out.requires_grad()) {
    auto xn = x.node();
    out.node()->backward_fn = [xn, B, C, Ll](TensorNode<T>& node) {
      for (int b = 0; b < B; ++b) {
        T* dx = xn->grad.data() + static_cast<long>(b) * Ll * C;
        const T* g = node.grad.data() + static_cast<long>(b) * C * Ll;
        for (int c = 0; c < C; ++c) {
          for (long l = 0; l < Ll; ++l) dx[l * C + c] += g[static_cast<long>(c) * Ll + l];
        }
      }
    };
  }
  return out;
}

#define CVSDEBLUR_INSTANTIATE_OPS(T)                                                                      \
  template TensorT<T> conv2d<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&, int);            \
  template TensorT<T> leaky_relu<T>(const TensorT<T>&, T);                                                \
  template TensorT<T> sigmoid<T>(const TensorT<T>&);                                                      \
  template TensorT<T> attention<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&);              \
  template TensorT<T> upsample_nearest2x<T>(const TensorT<T>&);                                           \
  template TensorT<T> concat_channels<T>(const std::vector<TensorT<T>>&);                                 \
  template TensorT<T> slice_channels<T>(const TensorT<T>&, int, int);                                     \
  template TensorT<T> add<T>(const TensorT<T>&, const TensorT<T>&);                                       \
  template TensorT<T> sub<T>(const TensorT<T>&, const TensorT<T>&);                                       \
  template TensorT<T> mul<T>(const TensorT<T>&, const TensorT<T>&);                                       \
  template TensorT<T> add_scalar<T>(const TensorT<T>&, T);                                                \
  template TensorT<T> scale<T>(const TensorT<T>&, T);                                                     \
  template TensorT<T> log_e<T>(const TensorT<T>&);                                                        \
  template TensorT<T> mean_all<T>(const TensorT<T>&);                                                     \
  template TensorT<T> pad_reflect<T>(const TensorT<T>&, int, int, int, int);                              \
  template TensorT<T> crop<T>(const TensorT<T>&, int, int, int, int);                                     \
  template TensorT<T> bchw_to_tokens<T>(const TensorT<T>&);                                               \
  template TensorT<T> tokens_to_bchw<T>(const TensorT<T>&, int, int);

CVSDEBLUR_INSTANTIATE_OPS(float)
CVSDEBLUR_INSTANTIATE_OPS(double)
#undef CVSDEBLUR_INSTANTIATE_OPS

}  // namespace cvsdeblur::nn
