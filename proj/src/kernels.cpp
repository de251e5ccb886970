#include "kda/kernels.hpp"

#include <algorithm>
#include <atomic>

#include <omp.h>

namespace kda::kernels {

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int n) { g_threads.store(std::max(1, n)); }
int num_threads() { return g_threads.load(); }

// Row kernels shared by both paths. The accumulation order over the inner
// dimension is fixed here, which is what makes the two paths agree bitwise.
namespace {

inline void row_nn(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                   std::size_t n) {
    double* ci = c + i * n;
    std::fill(ci, ci + n, 0.0);
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
        const double aip = ai[p];
        if (aip == 0.0) continue;
        const double* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
}

inline void row_tn(const double* a, const double* b, double* c, std::size_t i, std::size_t m,
                   std::size_t k, std::size_t n) {
    double* ci = c + i * n;
    std::fill(ci, ci + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
        const double api = a[p * m + i];
        if (api == 0.0) continue;
        const double* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
}

inline void row_nt(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                   std::size_t n) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
        const double* bj = b + j * k;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
        c[i * n + j] = s;
    }
}

// Upper triangle of row i of X^T X.
inline void row_gram(const double* x, double* g, std::size_t i, std::size_t d, std::size_t n) {
    double* gi = g + i * n;
    std::fill(gi + i, gi + n, 0.0);
    for (std::size_t p = 0; p < d; ++p) {
        const double* xp = x + p * n;
        const double xpi = xp[i];
        if (xpi == 0.0) continue;
        for (std::size_t j = i; j < n; ++j) gi[j] += xpi * xp[j];
    }
}

inline void mirror_upper(double* g, std::size_t n) {
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) g[i * n + j] = g[j * n + i];
}

}  // namespace

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) row_nn(a.data(), b.data(), c.data(), i, k, n);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) row_tn(a.data(), b.data(), c.data(), i, m, k, n);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) row_nt(a.data(), b.data(), c.data(), i, k, n);
}

void gram(std::span<const double> x, std::span<double> g, std::size_t d, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) row_gram(x.data(), g.data(), i, d, n);
    mirror_upper(g.data(), n);
}

}  // namespace serial

namespace omp {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, int threads) {
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < rows; ++i)
        row_nn(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), k, n);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, int threads) {
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < rows; ++i)
        row_tn(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), m, k, n);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, int threads) {
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < rows; ++i)
        row_nt(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), k, n);
}

void gram(std::span<const double> x, std::span<double> g, std::size_t d, std::size_t n,
          int threads) {
    const auto rows = static_cast<std::ptrdiff_t>(n);
    // triangular work: dynamic scheduling keeps threads balanced
#pragma omp parallel num_threads(threads)
    {
#pragma omp for schedule(dynamic, 16)
        for (std::ptrdiff_t i = 0; i < rows; ++i)
            row_gram(x.data(), g.data(), static_cast<std::size_t>(i), d, n);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 1; i < rows; ++i)
            for (std::ptrdiff_t j = 0; j < i; ++j) g[i * rows + j] = g[j * rows + i];
    }
}

}  // namespace omp

}  // namespace kda::kernels
