#include "kda/gram.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kda/errors.hpp"
#include "kda/kernels.hpp"

namespace kda {

Matrix gram(const Matrix& x) {
    const std::size_t d = x.rows();
    const std::size_t n = x.cols();
    Matrix k(n, n);
    const int t = kernels::num_threads();
    if (t > 1)
        kernels::omp::gram(x.data(), k.data(), d, n, t);
    else
        kernels::serial::gram(x.data(), k.data(), d, n);
    return k;
}

Matrix partial_gram(const Matrix& x, const Matrix& landmarks) {
    if (x.rows() != landmarks.rows())
        throw DimensionError("partial_gram: feature dim " + std::to_string(x.rows()) +
                             " != landmark dim " + std::to_string(landmarks.rows()));
    return matmul_tn(x, landmarks);
}

NystromApprox build_nystrom(const Matrix& x, const Matrix& landmarks, std::size_t k) {
    if (x.rows() != landmarks.rows())
        throw DimensionError("build_nystrom: feature dim " + std::to_string(x.rows()) +
                             " != landmark dim " + std::to_string(landmarks.rows()));
    const std::size_t m = landmarks.cols();
    if (k < 1 || k > m)
        throw ArgumentError("build_nystrom: rank k=" + std::to_string(k) + " outside [1, " +
                            std::to_string(m) + "]");
    NystromApprox out;
    out.C = matmul_tn(x, landmarks);
    out.W = gram(landmarks);
    out.k = k;
    out.W_k_pinv = pseudo_inverse(k == m ? out.W : rank_k_truncate(out.W, k));
    return out;
}

Matrix reconstruct(const NystromApprox& approx) {
    const Matrix cw = matmul(approx.C, approx.W_k_pinv);
    Matrix k = matmul_nt(cw, approx.C);
    // C A C^T with symmetric A is symmetric up to rounding; make it exact
    for (std::size_t i = 0; i < k.rows(); ++i)
        for (std::size_t j = i + 1; j < k.cols(); ++j) {
            const double s = 0.5 * (k(i, j) + k(j, i));
            k(i, j) = s;
            k(j, i) = s;
        }
    return k;
}

double relative_transfer_loss(const Matrix& k_s, const Matrix& k_t) {
    if (k_s.rows() != k_t.rows() || k_s.cols() != k_t.cols())
        throw DimensionError("relative_transfer_loss: shape mismatch");
    const double denom = frobenius_norm(k_t);
    if (denom == 0.0) throw DivisionByZeroError("relative_transfer_loss: ||K_T||_F is zero");
    return frobenius_norm(k_s - k_t) / denom;
}

namespace {
double sum_squares(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return s;
}
}  // namespace

double gram_norm(const Matrix& x) { return std::sqrt(sum_squares(matmul_nt(x, x))); }

double gram_difference_norm(const Matrix& x_s, const Matrix& x_t) {
    if (x_s.cols() != x_t.cols())
        throw DimensionError("gram_difference_norm: example counts differ");
    const double ss = sum_squares(matmul_nt(x_s, x_s));
    const double tt = sum_squares(matmul_nt(x_t, x_t));
    const double st = sum_squares(matmul_nt(x_s, x_t));
    return std::sqrt(std::max(0.0, ss + tt - 2.0 * st));
}

double relative_transfer_loss_features(const Matrix& x_s, const Matrix& x_t) {
    const double denom = gram_norm(x_t);
    if (denom == 0.0) throw DivisionByZeroError("relative_transfer_loss: ||K_T||_F is zero");
    return gram_difference_norm(x_s, x_t) / denom;
}

}  // namespace kda
