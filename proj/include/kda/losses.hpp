#pragma once

#include <span>

#include "kda/matrix.hpp"

namespace kda {

struct LossValueGrad {
    double value = 0.0;
    Matrix grad;  // same shape as the differentiated input
};

struct LossWeights {
    double lambda_kda_before_fc = 0.0;
    double lambda_kda_after_fc = 0.0;
    double lambda_kd = 0.0;
    double lambda_rkd = 0.0;
    double kd_temperature = 4.0;

    bool any_kda() const { return lambda_kda_before_fc > 0.0 || lambda_kda_after_fc > 0.0; }
    void validate() const;
};

struct SmoothL1 {
    double value;
    double derivative;
};

// l(z) = |z| - 0.5 for |z| > 1, 0.5 z^2 otherwise. Knee fixed at 1.
inline SmoothL1 smoothed_l1(double z) {
    if (z > 1.0) return {z - 0.5, 1.0};
    if (z < -1.0) return {-z - 0.5, -1.0};
    return {0.5 * z * z, z};
}

// Smoothed L1 on the entries of C_S - C_T, C = X^T D, averaged over the n*m
// entries. Gradient is w.r.t. x_s (d_S x n); landmarks are constants.
LossValueGrad kda_loss(const Matrix& x_s, const Matrix& x_t, const Matrix& d_s, const Matrix& d_t);

// Same with the residual right-multiplied by a fixed m x m weighting, e.g. W_T^{+1/2}.
LossValueGrad kda_loss_weighted(const Matrix& x_s, const Matrix& x_t, const Matrix& d_s,
                                const Matrix& d_t, const Matrix& weighting);

// Mean over examples of T^2 KL(softmax(z_T/T) || softmax(z_S/T)); logits are L x n.
LossValueGrad kd_loss(const Matrix& logits_s, const Matrix& logits_t, double temperature);

// sum_i ||x_S^i - x_T^i||^2, the squared-logit view of KD.
LossValueGrad kd_squared_logit_loss(const Matrix& logits_s, const Matrix& logits_t);

// ||X_S^T D_S - X_T^T D_T||_F^2. With one-hot landmarks this is the squared-logit KD loss.
double squared_partial_residual(const Matrix& x_s, const Matrix& x_t, const Matrix& d_s,
                                const Matrix& d_t);

// Smoothed L1 on gram(X_S) - gram(X_T) over one mini-batch, averaged over r^2 entries.
LossValueGrad rkd_batch_loss(const Matrix& x_s, const Matrix& x_t);

// Mean negative log-likelihood of the true class; logits L x n.
LossValueGrad cross_entropy_loss(const Matrix& logits, std::span<const int> labels);

// Column-wise softmax of logits / temperature.
Matrix softmax_columns(const Matrix& logits, double temperature = 1.0);

}  // namespace kda
