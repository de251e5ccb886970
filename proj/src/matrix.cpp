#include "kda/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "kda/errors.hpp"
#include "kda/kernels.hpp"

namespace kda {

namespace {

std::string shape(const Matrix& a) {
    return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(what) + ": shape mismatch " + shape(a) + " vs " + shape(b));
}

void require_square(const Matrix& a, const char* what) {
    if (a.rows() != a.cols() || a.empty())
        throw DimensionError(std::string(what) + ": expected a square matrix, got " + shape(a));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw ArgumentError("Matrix: zero dimension");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0) throw ArgumentError("Matrix: zero dimension");
    if (data_.size() != rows * cols)
        throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
    Matrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("Matrix::from_rows: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

std::vector<double> Matrix::col(std::size_t j) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
}

void Matrix::set_col(std::size_t j, std::span<const double> values) {
    if (values.size() != rows_) throw DimensionError("Matrix::set_col: length mismatch");
    for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator+");
    Matrix out = a;
    auto o = out.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
    return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator-");
    Matrix out = a;
    auto o = out.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
    return out;
}

Matrix operator*(double s, const Matrix& a) {
    Matrix out = a;
    for (double& v : out.data()) v *= s;
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions differ " + shape(a) + " * " + shape(b));
    Matrix c(a.rows(), b.cols());
    const int t = kernels::num_threads();
    if (t > 1)
        kernels::omp::gemm_nn(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols(), t);
    else
        kernels::serial::gemm_nn(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw DimensionError("matmul_tn: row counts differ " + shape(a) + " vs " + shape(b));
    Matrix c(a.cols(), b.cols());
    const int t = kernels::num_threads();
    if (t > 1)
        kernels::omp::gemm_tn(a.data(), b.data(), c.data(), a.cols(), a.rows(), b.cols(), t);
    else
        kernels::serial::gemm_tn(a.data(), b.data(), c.data(), a.cols(), a.rows(), b.cols());
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw DimensionError("matmul_nt: column counts differ " + shape(a) + " vs " + shape(b));
    Matrix c(a.rows(), b.rows());
    const int t = kernels::num_threads();
    if (t > 1)
        kernels::omp::gemm_nt(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows(), t);
    else
        kernels::serial::gemm_nt(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows());
    return c;
}

double frobenius_norm(const Matrix& a) {
    // scaled accumulation avoids overflow for large entries
    const double scale = max_abs(a);
    if (scale == 0.0) return 0.0;
    double s = 0.0;
    for (double v : a.data()) {
        const double r = v / scale;
        s += r * r;
    }
    return scale * std::sqrt(s);
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

bool all_finite(const Matrix& a) {
    return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

bool is_symmetric(const Matrix& a, double tol) {
    if (a.rows() != a.cols()) return false;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j) - a(j, i)) > tol) return false;
    return true;
}

SymEig sym_eig(const Matrix& input) {
    require_square(input, "sym_eig");
    if (!all_finite(input)) throw NumericError("sym_eig: non-finite input");
    const std::size_t n = input.rows();

    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (input(i, j) + input(j, i));
    Matrix v = Matrix::identity(n);

    const double target = 1e-12 * frobenius_norm(a);
    constexpr int kMaxSweeps = 100;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) off += a(i, j) * a(i, j);
        if (std::sqrt(off) <= target) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e150)
                    t = 0.5 / theta;
                else
                    t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                a(p, p) -= t * apq;
                a(q, q) += t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    const double arp = a(r, p);
                    const double arq = a(r, q);
                    a(r, p) = a(p, r) = c * arp - s * arq;
                    a(r, q) = a(q, r) = s * arp + c * arq;
                }
                for (std::size_t r = 0; r < n; ++r) {
                    const double vrp = v(r, p);
                    const double vrq = v(r, q);
                    v(r, p) = c * vrp - s * vrq;
                    v(r, q) = s * vrp + c * vrq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    SymEig out{std::vector<double>(n), Matrix(n, n)};
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

namespace {

// Reciprocal map shared by pseudo_inverse and pinv_sqrt. Negative eigenvalues
// are noise on PSD inputs and map to zero.
double cutoff(const SymEig& eig, double tol) {
    const double top = eig.values.empty() ? 0.0 : std::max(eig.values.front(), 0.0);
    return tol * top;
}

}  // namespace

Matrix pseudo_inverse(const Matrix& a, double tol) {
    require_square(a, "pseudo_inverse");
    if (tol < 0.0) throw ArgumentError("pseudo_inverse: negative tolerance");
    const SymEig eig = sym_eig(a);
    const double cut = cutoff(eig, tol);
    return spectral_map(eig, [cut](double l) { return (l > cut && l > 0.0) ? 1.0 / l : 0.0; });
}

Matrix pinv_sqrt(const Matrix& a, double tol) {
    require_square(a, "pinv_sqrt");
    if (tol < 0.0) throw ArgumentError("pinv_sqrt: negative tolerance");
    const SymEig eig = sym_eig(a);
    const double cut = cutoff(eig, tol);
    return spectral_map(eig,
                        [cut](double l) { return (l > cut && l > 0.0) ? 1.0 / std::sqrt(l) : 0.0; });
}

Matrix rank_k_truncate(const Matrix& a, std::size_t k) {
    require_square(a, "rank_k_truncate");
    if (k < 1 || k > a.rows())
        throw ArgumentError("rank_k_truncate: k=" + std::to_string(k) + " outside [1, " +
                            std::to_string(a.rows()) + "]");
    SymEig eig = sym_eig(a);
    for (std::size_t j = k; j < eig.values.size(); ++j) eig.values[j] = 0.0;
    return spectral_map(eig, [](double l) { return l; });
}

}  // namespace kda
