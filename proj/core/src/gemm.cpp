#include "cvsdeblur/gemm.hpp"

#include <algorithm>
#include <cstring>

#include "cvsdeblur/parallel.hpp"

namespace cvsdeblur::nn {

namespace {

// K below this uses the single-row kernel: with a short inner product the
// 4-row block spends its time on C traffic instead of FMAs.
constexpr int kSmallK = 32;

template <typename T>
void nn_rows_small_k(int m_begin, int m_end, int N, int K, const T* A, int lda, const T* B, int ldb, T* C,
                     int ldc, bool accumulate) {
  constexpr int NB = 16;
  for (int m = m_begin; m < m_end; ++m) {
    const T* a_row = A + static_cast<long>(m) * lda;
    T* c_row = C + static_cast<long>(m) * ldc;
    for (int n0 = 0; n0 < N; n0 += NB) {
      const int nb = std::min(NB, N - n0);
      if (nb == NB) {
        T acc[NB];
        if (accumulate) {
          for (int j = 0; j < NB; ++j) acc[j] = c_row[n0 + j];
        } else {
          for (int j = 0; j < NB; ++j) acc[j] = T(0);
        }
        for (int k = 0; k < K; ++k) {
          const T a = a_row[k];
          const T* b_row = B + static_cast<long>(k) * ldb + n0;
          for (int j = 0; j < NB; ++j) acc[j] += a * b_row[j];
        }
        for (int j = 0; j < NB; ++j) c_row[n0 + j] = acc[j];
      } else {
        for (int j = 0; j < nb; ++j) {
          T acc = accumulate ? c_row[n0 + j] : T(0);
          for (int k = 0; k < K; ++k) acc += a_row[k] * B[static_cast<long>(k) * ldb + n0 + j];
          c_row[n0 + j] = acc;
        }
      }
    }
  }
}

template <typename T>
void nn_rows_blocked(int m_begin, int m_end, int N, int K, const T* A, int lda, const T* B, int ldb, T* C,
                     int ldc, bool accumulate) {
  constexpr int MB = 4;
  constexpr int NB = 16;
  int m0 = m_begin;
  for (; m0 + MB <= m_end; m0 += MB) {
    for (int n0 = 0; n0 < N; n0 += NB) {
      const int nb = std::min(NB, N - n0);
      if (nb == NB) {
        T acc[MB][NB];
        for (int i = 0; i < MB; ++i) {
          T* c_row = C + static_cast<long>(m0 + i) * ldc + n0;
          if (accumulate) {
            for (int j = 0; j < NB; ++j) acc[i][j] = c_row[j];
          } else {
            for (int j = 0; j < NB; ++j) acc[i][j] = T(0);
          }
        }
        for (int k = 0; k < K; ++k) {
          const T* b_row = B + static_cast<long>(k) * ldb + n0;
          for (int i = 0; i < MB; ++i) {
            const T a = A[static_cast<long>(m0 + i) * lda + k];
            for (int j = 0; j < NB; ++j) acc[i][j] += a * b_row[j];
          }
        }
        for (int i = 0; i < MB; ++i) {
          T* c_row = C + static_cast<long>(m0 + i) * ldc + n0;
          for (int j = 0; j < NB; ++j) c_row[j] = acc[i][j];
        }
      } else {
        for (int i = 0; i < MB; ++i) {
          T* c_row = C + static_cast<long>(m0 + i) * ldc;
          const T* a_row = A + static_cast<long>(m0 + i) * lda;
          for (int j = 0; j < nb; ++j) {
            T acc = accumulate ? c_row[n0 + j] : T(0);
            for (int k = 0; k < K; ++k) acc += a_row[k] * B[static_cast<long>(k) * ldb + n0 + j];
            c_row[n0 + j] = acc;
          }
        }
      }
    }
  }
  if (m0 < m_end) nn_rows_small_k(m0, m_end, N, K, A, lda, B, ldb, C, ldc, accumulate);
}

}  // namespace

template <typename T>
void gemm_nn(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C, int ldc, bool accumulate) {
  if (M <= 0 || N <= 0) return;
  if (K <= 0) {
    if (!accumulate) {
      for (int m = 0; m < M; ++m) std::fill_n(C + static_cast<long>(m) * ldc, N, T(0));
    }
    return;
  }
  const bool small_k = K < kSmallK;
  parallel_for(M, [&](std::int64_t b, std::int64_t e) {
    if (small_k) {
      nn_rows_small_k(static_cast<int>(b), static_cast<int>(e), N, K, A, lda, B, ldb, C, ldc, accumulate);
    } else {
      nn_rows_blocked(static_cast<int>(b), static_cast<int>(e), N, K, A, lda, B, ldb, C, ldc, accumulate);
    }
  });
}

template <typename T>
void gemm_nt(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C, int ldc, bool accumulate) {
  if (M <= 0 || N <= 0) return;
  if (K <= 0) {
    if (!accumulate) {
      for (int m = 0; m < M; ++m) std::fill_n(C + static_cast<long>(m) * ldc, N, T(0));
    }
    return;
  }
  constexpr int NB = 4;
  parallel_for(M, [&](std::int64_t mb, std::int64_t me) {
    for (int m = static_cast<int>(mb); m < me; ++m) {
      const T* a_row = A + static_cast<long>(m) * lda;
      T* c_row = C + static_cast<long>(m) * ldc;
      int n0 = 0;
      for (; n0 + NB <= N; n0 += NB) {
        T acc[NB] = {T(0), T(0), T(0), T(0)};
        const T* b0 = B + static_cast<long>(n0) * ldb;
        const T* b1 = b0 + ldb;
        const T* b2 = b1 + ldb;
        const T* b3 = b2 + ldb;
        for (int k = 0; k < K; ++k) {
          const T a = a_row[k];
          acc[0] += a * b0[k];
          acc[1] += a * b1[k];
          acc[2] += a * b2[k];
          acc[3] += a * b3[k];
        }
        for (int j = 0; j < NB; ++j) {
          c_row[n0 + j] = accumulate ? c_row[n0 + j] + acc[j] : acc[j];
        }
      }
      for (; n0 < N; ++n0) {
        const T* b_row = B + static_cast<long>(n0) * ldb;
        T acc = T(0);
        for (int k = 0; k < K; ++k) acc += a_row[k] * b_row[k];
        c_row[n0] = accumulate ? c_row[n0] + acc : acc;
      }
    }
  });
}

template <typename T>
void gemm_tn(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C, int ldc, bool accumulate) {
  if (M <= 0 || N <= 0) return;
  // Workers own disjoint column ranges of C, so accumulation order per cell
  // is the plain k order regardless of worker count.
  parallel_for(N, [&](std::int64_t nb, std::int64_t ne) {
    const int n_begin = static_cast<int>(nb);
    const int n_count = static_cast<int>(ne - nb);
    if (!accumulate) {
      for (int m = 0; m < M; ++m) std::fill_n(C + static_cast<long>(m) * ldc + n_begin, n_count, T(0));
    }
    for (int k = 0; k < K; ++k) {
      const T* a_row = A + static_cast<long>(k) * lda;
      const T* b_row = B + static_cast<long>(k) * ldb + n_begin;
      for (int m = 0; m < M; ++m) {
        const T a = a_row[m];
        T* c_row = C + static_cast<long>(m) * ldc + n_begin;
        for (int j = 0; j < n_count; ++j) c_row[j] += a * b_row[j];
      }
    }
  });
}

template <typename T>
void transpose(int rows, int cols, const T* src, int lds, T* dst, int ldd) {
  constexpr int TB = 32;
  for (int r0 = 0; r0 < rows; r0 += TB) {
    const int re = std::min(rows, r0 + TB);
    for (int c0 = 0; c0 < cols; c0 += TB) {
      const int ce = std::min(cols, c0 + TB);
      for (int r = r0; r < re; ++r) {
        for (int c = c0; c < ce; ++c) {
          dst[static_cast<long>(c) * ldd + r] = src[static_cast<long>(r) * lds + c];
        }
      }
    }
  }
}

template void gemm_nn<float>(int, int, int, const float*, int, const float*, int, float*, int, bool);
template void gemm_nn<double>(int, int, int, const double*, int, const double*, int, double*, int, bool);
template void gemm_nt<float>(int, int, int, const float*, int, const float*, int, float*, int, bool);
template void gemm_nt<double>(int, int, int, const double*, int, const double*, int, double*, int, bool);
template void gemm_tn<float>(int, int, int, const float*, int, const float*, int, float*, int, bool);
template void gemm_tn<double>(int, int, int, const double*, int, const double*, int, double*, int, bool);
template void transpose<float>(int, int, const float*, int, float*, int);
template void transpose<double>(int, int, const double*, int, double*, int);

}  // namespace cvsdeblur::nn
