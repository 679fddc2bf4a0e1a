#pragma once

namespace cvsdeblur::nn {

// Row-major matrix kernels used by the tensor ops. All take explicit leading
// dimensions and either overwrite C or accumulate into it.
//
// Layout conventions: nn multiplies A[M,K] * B[K,N]; nt multiplies
// A[M,K] * B'[K,N] where B is stored [N,K] (contiguous dot products, good for
// large K); tn multiplies A'[M,K] * B[K,N] where A is stored [K,M] (k-outer
// saxpy, C must stay cache resident).

template <typename T>
void gemm_nn(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C, int ldc, bool accumulate);

template <typename T>
void gemm_nt(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C, int ldc, bool accumulate);

template <typename T>
void gemm_tn(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C, int ldc, bool accumulate);

// dst[c, r] = src[r, c] for a rows x cols source.
template <typename T>
void transpose(int rows, int cols, const T* src, int lds, T* dst, int ldd);

}  // namespace cvsdeblur::nn
