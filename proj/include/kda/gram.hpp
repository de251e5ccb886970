#pragma once

#include <cstddef>
#include <string>

#include "kda/matrix.hpp"

namespace kda {

// Features from one network layer: d x n, column i is example i.
struct FeatureBlock {
    Matrix features;
    std::string layer_tag;

    std::size_t dim() const { return features.rows(); }
    std::size_t count() const { return features.cols(); }
};

// Rank-k Nystrom approximation C W_k^+ C^T built from landmark points D:
// C = X^T D (n x m), W = D^T D (m x m).
struct NystromApprox {
    Matrix C;
    Matrix W;
    std::size_t k = 0;
    Matrix W_k_pinv;
};

// K = X^T X
Matrix gram(const Matrix& x);
inline Matrix gram(const FeatureBlock& x) { return gram(x.features); }

// C = X^T D, the partial Gram matrix against landmarks.
Matrix partial_gram(const Matrix& x, const Matrix& landmarks);

NystromApprox build_nystrom(const Matrix& x, const Matrix& landmarks, std::size_t k);
inline NystromApprox build_nystrom(const FeatureBlock& x, const Matrix& landmarks, std::size_t k) {
    return build_nystrom(x.features, landmarks, k);
}

Matrix reconstruct(const NystromApprox& approx);

// ||K_S - K_T||_F / ||K_T||_F
double relative_transfer_loss(const Matrix& k_s, const Matrix& k_t);

// ||X_S^T X_S - X_T^T X_T||_F without forming either n x n Gram matrix:
// ||A - B||_F^2 = ||X_S X_S^T||^2 + ||X_T X_T^T||^2 - 2 ||X_S X_T^T||^2.
// Costs O(n d^2) instead of O(n^2 d).
double gram_difference_norm(const Matrix& x_s, const Matrix& x_t);
// ||X^T X||_F via the d x d product.
double gram_norm(const Matrix& x);
// relative_transfer_loss(gram(x_s), gram(x_t)) computed through the identity above.
double relative_transfer_loss_features(const Matrix& x_s, const Matrix& x_t);

}  // namespace kda
