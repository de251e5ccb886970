#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace kda {

// Dense row-major matrix of doubles. A default-constructed Matrix is empty
// (0 x 0) and only serves as a placeholder; every constructed shape has
// rows, cols >= 1.
class Matrix {
 public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> values);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::vector<double> col(std::size_t j) const;
    void set_col(std::size_t j, std::span<const double> values);

    bool operator==(const Matrix&) const = default;

 private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Symmetric eigendecomposition: eigenvalues descending, column j of
// `vectors` paired with values[j].
struct SymEig {
    std::vector<double> values;
    Matrix vectors;
};

Matrix transpose(const Matrix& a);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

// Products. Dispatch to the OpenMP kernels when more than one kernel thread is
// configured; results are bitwise identical to the serial path either way.
Matrix matmul(const Matrix& a, const Matrix& b);     // A B
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // A^T B
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // A B^T

double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
bool all_finite(const Matrix& a);
bool is_symmetric(const Matrix& a, double tol);

// Cyclic Jacobi. The input is symmetrized as (A + A^T) / 2.
SymEig sym_eig(const Matrix& a);

// Rebuilds V diag(f(lambda)) V^T from an eigendecomposition.
template <class F>
Matrix spectral_map(const SymEig& eig, F&& f);

inline constexpr double kDefaultPinvTol = 1e-10;

// Eigenvalues <= tol * lambda_max (and all negative noise) are treated as zero.
Matrix pseudo_inverse(const Matrix& a, double tol = kDefaultPinvTol);
// (A^+)^{1/2} for symmetric PSD A, same zeroing rule as pseudo_inverse.
Matrix pinv_sqrt(const Matrix& a, double tol = kDefaultPinvTol);
// Best rank-k approximation: sum of the top-k eigenpairs.
Matrix rank_k_truncate(const Matrix& a, std::size_t k);

template <class F>
Matrix spectral_map(const SymEig& eig, F&& f) {
    const std::size_t n = eig.values.size();
    Matrix out(n, n);
    for (std::size_t p = 0; p < n; ++p) {
        const double w = f(eig.values[p]);
        if (w == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const double vi = w * eig.vectors(i, p);
            for (std::size_t j = 0; j < n; ++j) out(i, j) += vi * eig.vectors(j, p);
        }
    }
    return out;
}

}  // namespace kda
