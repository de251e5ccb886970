#pragma once

// Data-parallel dense kernels. Each kernel has a serial reference and an
// OpenMP version. The OpenMP versions partition output rows across threads and
// keep the per-element accumulation order of the reference, so both produce
// bitwise identical results for any thread count.

#include <cstddef>
#include <span>

namespace kda::kernels {

// Number of threads used by the dispatching wrappers in matrix.hpp.
// Defaults to 1 (deterministic test mode); values < 1 are clamped to 1.
void set_num_threads(int n);
int num_threads();

namespace serial {

// C[m x n] = A[m x k] B[k x n]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
// C[m x n] = A[k x m]^T B[k x n]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
// C[m x n] = A[m x k] B[n x k]^T
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
// G[n x n] = X[d x n]^T X, filled symmetrically.
void gram(std::span<const double> x, std::span<double> g, std::size_t d, std::size_t n);

}  // namespace serial

namespace omp {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, int threads);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, int threads);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, int threads);
void gram(std::span<const double> x, std::span<double> g, std::size_t d, std::size_t n,
          int threads);

}  // namespace omp

}  // namespace kda::kernels
