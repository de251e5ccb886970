#include <random>
#include <vector>

#include <doctest.h>

#include "kda/gram.hpp"
#include "kda/kernels.hpp"
#include "kda/matrix.hpp"
#include "oracles.hpp"

using namespace kda;

namespace {

std::vector<double> buffer(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    std::vector<double> v(n);
    for (double& x : v) x = g(rng);
    return v;
}

struct ThreadGuard {
    int saved = kernels::num_threads();
    ~ThreadGuard() { kernels::set_num_threads(saved); }
};

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("omp kernels are bitwise identical to the serial reference") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::size_t> dim(1, 40);
    for (int t = 0; t < 30; ++t) {
        const std::size_t m = dim(rng), k = dim(rng), n = dim(rng);
        for (int threads : {1, 2, 3, 8}) {
            {
                const auto a = buffer(m * k, rng), b = buffer(k * n, rng);
                std::vector<double> s(m * n), p(m * n);
                kernels::serial::gemm_nn(a, b, s, m, k, n);
                kernels::omp::gemm_nn(a, b, p, m, k, n, threads);
                CHECK(s == p);
            }
            {
                const auto a = buffer(k * m, rng), b = buffer(k * n, rng);
                std::vector<double> s(m * n), p(m * n);
                kernels::serial::gemm_tn(a, b, s, m, k, n);
                kernels::omp::gemm_tn(a, b, p, m, k, n, threads);
                CHECK(s == p);
            }
            {
                const auto a = buffer(m * k, rng), b = buffer(n * k, rng);
                std::vector<double> s(m * n), p(m * n);
                kernels::serial::gemm_nt(a, b, s, m, k, n);
                kernels::omp::gemm_nt(a, b, p, m, k, n, threads);
                CHECK(s == p);
            }
            {
                const auto x = buffer(k * n, rng);
                std::vector<double> s(n * n), p(n * n);
                kernels::serial::gram(x, s, k, n);
                kernels::omp::gram(x, p, k, n, threads);
                CHECK(s == p);
            }
        }
    }
}

TEST_CASE("serial gemm agrees with the naive oracle") {
    std::mt19937_64 rng(7);
    const Matrix a = oracle::random_matrix(9, 4, rng), b = oracle::random_matrix(4, 6, rng);
    std::vector<double> c(9 * 6);
    kernels::serial::gemm_nn(a.data(), b.data(), c, 9, 4, 6);
    CHECK(oracle::rel_diff(Matrix(9, 6, c), oracle::naive_matmul(a, b)) < 1e-14);
}

TEST_CASE("matrix dispatch is thread-count invariant") {
    ThreadGuard guard;
    std::mt19937_64 rng(17);
    const Matrix x = oracle::random_matrix(12, 70, rng), d = oracle::random_matrix(12, 9, rng);
    kernels::set_num_threads(1);
    const Matrix g1 = gram(x), c1 = partial_gram(x, d), p1 = matmul_nt(x, x);
    kernels::set_num_threads(4);
    CHECK(kernels::num_threads() == 4);
    CHECK(gram(x) == g1);
    CHECK(partial_gram(x, d) == c1);
    CHECK(matmul_nt(x, x) == p1);
}

TEST_CASE("thread count is clamped") {
    ThreadGuard guard;
    kernels::set_num_threads(0);
    CHECK(kernels::num_threads() == 1);
    kernels::set_num_threads(-5);
    CHECK(kernels::num_threads() == 1);
}

}  // TEST_SUITE
