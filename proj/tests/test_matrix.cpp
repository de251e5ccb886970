#include <cmath>
#include <random>

#include <doctest.h>

#include "kda/errors.hpp"
#include "kda/matrix.hpp"
#include "oracles.hpp"

using namespace kda;

TEST_SUITE("matrix") {

TEST_CASE("construction rejects zero dimensions") {
    CHECK_THROWS_AS(Matrix(0, 3), ArgumentError);
    CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST_CASE("frobenius norm examples") {
    CHECK(frobenius_norm(Matrix::identity(2)) == doctest::Approx(1.41421356).epsilon(1e-8));
    CHECK(frobenius_norm(Matrix(3, 3)) == 0.0);
    CHECK(frobenius_norm(Matrix::from_rows({{3, 4}, {0, 0}})) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("frobenius norm triangle inequality") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> dim(1, 6);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t r = dim(rng), c = dim(rng);
        const Matrix a = oracle::random_matrix(r, c, rng), b = oracle::random_matrix(r, c, rng);
        const Matrix cc = oracle::random_matrix(r, c, rng);
        CHECK(frobenius_norm(a - cc) <= frobenius_norm(a - b) + frobenius_norm(b - cc) + 1e-9);
    }
}

TEST_CASE("frobenius norm survives extreme magnitudes") {
    Matrix big(2, 2, 1e200);
    CHECK(frobenius_norm(big) == doctest::Approx(2e200));
    Matrix tiny(2, 2, 1e-200);
    CHECK(frobenius_norm(tiny) == doctest::Approx(2e-200));
}

TEST_CASE("products match the naive oracle") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
        const Matrix a = oracle::random_matrix(5, 7, rng), b = oracle::random_matrix(7, 4, rng);
        const Matrix c = oracle::random_matrix(5, 4, rng);
        CHECK(oracle::rel_diff(matmul(a, b), oracle::naive_matmul(a, b)) < 1e-14);
        CHECK(oracle::rel_diff(matmul_tn(c, a), oracle::naive_matmul(oracle::naive_transpose(c), a)) < 1e-14);
        CHECK(oracle::rel_diff(matmul_nt(a, a), oracle::naive_matmul(a, oracle::naive_transpose(a))) < 1e-14);
    }
    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), DimensionError);
}

TEST_CASE("sym_eig examples") {
    SymEig e = sym_eig(Matrix::diagonal(std::vector<double>{1, 2}));
    CHECK(e.values[0] == doctest::Approx(2.0));
    CHECK(e.values[1] == doctest::Approx(1.0));
    CHECK(std::abs(e.vectors(1, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(e.vectors(0, 1)) == doctest::Approx(1.0));

    e = sym_eig(Matrix::from_rows({{0, 1}, {1, 0}}));
    CHECK(e.values[0] == doctest::Approx(1.0));
    CHECK(e.values[1] == doctest::Approx(-1.0));

    e = sym_eig(Matrix::identity(4));
    for (double v : e.values) CHECK(v == doctest::Approx(1.0));

    CHECK_THROWS_AS(sym_eig(Matrix(2, 3)), DimensionError);
}

TEST_CASE("sym_eig invariants on random symmetric matrices") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> dim(1, 12);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = dim(rng);
        const Matrix r = oracle::random_matrix(n, n, rng);
        const Matrix a = 0.5 * (r + oracle::naive_transpose(r));
        const SymEig e = sym_eig(a);
        for (std::size_t i = 1; i < n; ++i) CHECK(e.values[i - 1] >= e.values[i]);
        const Matrix vtv = oracle::naive_matmul(oracle::naive_transpose(e.vectors), e.vectors);
        CHECK(oracle::naive_fro(oracle::naive_sub(vtv, Matrix::identity(n))) < 1e-9);
        const Matrix rec = spectral_map(e, [](double l) { return l; });
        CHECK(oracle::rel_diff(rec, a) < 1e-8);
    }
}

TEST_CASE("sym_eig recovers a planted spectrum") {
    std::mt19937_64 rng(8);
    const std::vector<double> spectrum{9.5, 4.0, 4.0, 1e-3, -2.0, -7.25};
    const SymEig e = sym_eig(oracle::with_spectrum(spectrum, rng));
    for (std::size_t i = 0; i < spectrum.size(); ++i) CHECK(e.values[i] == doctest::Approx(spectrum[i]).epsilon(1e-10));
}

TEST_CASE("pseudo_inverse examples") {
    const Matrix p = pseudo_inverse(Matrix::diagonal(std::vector<double>{2, 0}), 1e-12);
    CHECK(p(0, 0) == doctest::Approx(0.5));
    CHECK(p(1, 1) == 0.0);
    CHECK(oracle::rel_diff(pseudo_inverse(Matrix::identity(3)), Matrix::identity(3)) < 1e-14);
    const Matrix q = pseudo_inverse(Matrix::diagonal(std::vector<double>{4, 2, 1}));
    CHECK(q(0, 0) == doctest::Approx(0.25));
    CHECK(q(1, 1) == doctest::Approx(0.5));
    CHECK(q(2, 2) == doctest::Approx(1.0));
    CHECK_THROWS_AS(pseudo_inverse(Matrix(2, 3)), DimensionError);
}

TEST_CASE("pseudo_inverse properties") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (int t = 0; t < 100; ++t) {
        // PD: A^+ A = I
        std::vector<double> spec(6);
        for (double& v : spec) v = u(rng);
        const Matrix a = oracle::with_spectrum(spec, rng);
        const Matrix pa = pseudo_inverse(a);
        CHECK(oracle::naive_fro(oracle::naive_sub(oracle::naive_matmul(pa, a), Matrix::identity(6))) < 1e-8);

        // singular PSD: A A^+ A = A and (A^+)^+ = A
        spec[4] = spec[5] = 0.0;
        const Matrix s = oracle::with_spectrum(spec, rng);
        const Matrix ps = pseudo_inverse(s);
        CHECK(oracle::rel_diff(oracle::naive_matmul(oracle::naive_matmul(s, ps), s), s) < 1e-8);
        CHECK(oracle::rel_diff(pseudo_inverse(ps), s) < 1e-8);
    }
}

TEST_CASE("pseudo_inverse clamps negative noise") {
    const Matrix p = pseudo_inverse(Matrix::diagonal(std::vector<double>{3, -1e-13}));
    CHECK(p(1, 1) == 0.0);
}

TEST_CASE("pinv_sqrt squares to the pseudo-inverse") {
    std::mt19937_64 rng(21);
    const Matrix a = oracle::with_spectrum({5, 2, 0.5, 0}, rng);
    const Matrix r = pinv_sqrt(a);
    CHECK(oracle::rel_diff(oracle::naive_matmul(r, r), pseudo_inverse(a)) < 1e-9);
}

TEST_CASE("rank_k_truncate examples and properties") {
    Matrix t = rank_k_truncate(Matrix::diagonal(std::vector<double>{3, 1}), 1);
    CHECK(t(0, 0) == doctest::Approx(3.0));
    CHECK(std::abs(t(1, 1)) < 1e-14);
    t = rank_k_truncate(Matrix::diagonal(std::vector<double>{5, 4, 0.1}), 2);
    CHECK(t(0, 0) == doctest::Approx(5.0));
    CHECK(t(1, 1) == doctest::Approx(4.0));
    CHECK(std::abs(t(2, 2)) < 1e-14);
    CHECK_THROWS_AS(rank_k_truncate(Matrix::identity(3), 0), ArgumentError);
    CHECK_THROWS_AS(rank_k_truncate(Matrix::identity(3), 4), ArgumentError);

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix r = oracle::random_matrix(7, 7, rng);
        const Matrix a = 0.5 * (r + oracle::naive_transpose(r));
        CHECK(oracle::rel_diff(rank_k_truncate(a, 7), a) < 1e-8);
        for (std::size_t k = 1; k < 7; ++k) {
            const SymEig e = sym_eig(rank_k_truncate(a, k));
            double lmax = 0.0;
            for (double v : e.values) lmax = std::max(lmax, std::abs(v));
            std::vector<double> mags;
            for (double v : e.values) mags.push_back(std::abs(v));
            std::sort(mags.begin(), mags.end(), std::greater<>());
            for (std::size_t j = k; j < mags.size(); ++j) CHECK(mags[j] < 1e-8 * lmax);
        }
    }
}

TEST_CASE("non-finite input is rejected") {
    Matrix a = Matrix::identity(2);
    a(0, 1) = a(1, 0) = NAN;
    CHECK_THROWS_AS(sym_eig(a), NumericError);
}

}  // TEST_SUITE
