#include "kda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kda/errors.hpp"
#include "kda/gram.hpp"

namespace kda {

void LossWeights::validate() const {
    for (double v : {lambda_kda_before_fc, lambda_kda_after_fc, lambda_kd, lambda_rkd})
        if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and >= 0");
    if (!std::isfinite(kd_temperature) || kd_temperature <= 0.0)
        throw ConfigError("kd_temperature must be > 0");
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(what) + ": shape mismatch");
}

void check_kda_shapes(const Matrix& x_s, const Matrix& x_t, const Matrix& d_s, const Matrix& d_t) {
    if (x_s.cols() != x_t.cols()) throw DimensionError("kda_loss: student/teacher example counts differ");
    if (d_s.cols() != d_t.cols()) throw DimensionError("kda_loss: landmark counts differ");
    if (x_s.rows() != d_s.rows()) throw DimensionError("kda_loss: student feature/landmark dims differ");
    if (x_t.rows() != d_t.rows()) throw DimensionError("kda_loss: teacher feature/landmark dims differ");
}

// Applies smoothed L1 to every entry of r in place (r becomes l'(r)) and
// returns the mean value.
double smooth_in_place(Matrix& r) {
    double total = 0.0;
    for (double& v : r.data()) {
        const SmoothL1 s = smoothed_l1(v);
        total += s.value;
        v = s.derivative;
    }
    return total / static_cast<double>(r.size());
}

}  // namespace

LossValueGrad kda_loss(const Matrix& x_s, const Matrix& x_t, const Matrix& d_s, const Matrix& d_t) {
    check_kda_shapes(x_s, x_t, d_s, d_t);
    Matrix g = partial_gram(x_s, d_s) - partial_gram(x_t, d_t);  // n x m
    const double scale = 1.0 / static_cast<double>(g.size());
    const double value = smooth_in_place(g);
    // dL/dX_S = D_S G^T / (n m)
    return {value, scale * matmul_nt(d_s, g)};
}

LossValueGrad kda_loss_weighted(const Matrix& x_s, const Matrix& x_t, const Matrix& d_s,
                                const Matrix& d_t, const Matrix& weighting) {
    check_kda_shapes(x_s, x_t, d_s, d_t);
    const std::size_t m = d_s.cols();
    if (weighting.rows() != m || weighting.cols() != m)
        throw DimensionError("kda_loss_weighted: weighting must be m x m");
    Matrix g = matmul(partial_gram(x_s, d_s) - partial_gram(x_t, d_t), weighting);
    const double scale = 1.0 / static_cast<double>(g.size());
    const double value = smooth_in_place(g);
    // R = (C_S - C_T) P  =>  dL/dX_S = D_S P G^T / (n m)
    return {value, scale * matmul_nt(matmul(d_s, weighting), g)};
}

Matrix softmax_columns(const Matrix& logits, double temperature) {
    Matrix p(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.cols(); ++i) {
        double top = -INFINITY;
        for (std::size_t c = 0; c < logits.rows(); ++c) top = std::max(top, logits(c, i) / temperature);
        double z = 0.0;
        for (std::size_t c = 0; c < logits.rows(); ++c) {
            p(c, i) = std::exp(logits(c, i) / temperature - top);
            z += p(c, i);
        }
        for (std::size_t c = 0; c < logits.rows(); ++c) p(c, i) /= z;
    }
    return p;
}

namespace {

// log softmax of column i of logits / temperature
std::vector<double> log_softmax_col(const Matrix& logits, std::size_t i, double temperature) {
    std::vector<double> out(logits.rows());
    double top = -INFINITY;
    for (std::size_t c = 0; c < logits.rows(); ++c) top = std::max(top, logits(c, i) / temperature);
    double z = 0.0;
    for (std::size_t c = 0; c < logits.rows(); ++c) z += std::exp(logits(c, i) / temperature - top);
    const double lse = top + std::log(z);
    for (std::size_t c = 0; c < logits.rows(); ++c) out[c] = logits(c, i) / temperature - lse;
    return out;
}

}  // namespace

LossValueGrad kd_loss(const Matrix& logits_s, const Matrix& logits_t, double temperature) {
    require_same_shape(logits_s, logits_t, "kd_loss");
    if (!(temperature > 0.0)) throw ArgumentError("kd_loss: temperature must be > 0");
    const std::size_t n = logits_s.cols();
    const double t2 = temperature * temperature;
    LossValueGrad out{0.0, Matrix(logits_s.rows(), n)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto ls = log_softmax_col(logits_s, i, temperature);
        const auto lt = log_softmax_col(logits_t, i, temperature);
        double kl = 0.0;
        for (std::size_t c = 0; c < ls.size(); ++c) {
            const double pt = std::exp(lt[c]);
            if (pt > 0.0) kl += pt * (lt[c] - ls[c]);
            // d/dz_S of T^2 KL = T (p_S - p_T)
            out.grad(c, i) = temperature * (std::exp(ls[c]) - pt) / static_cast<double>(n);
        }
        out.value += t2 * kl;
    }
    out.value /= static_cast<double>(n);
    return out;
}

LossValueGrad kd_squared_logit_loss(const Matrix& logits_s, const Matrix& logits_t) {
    require_same_shape(logits_s, logits_t, "kd_squared_logit_loss");
    Matrix diff = logits_s - logits_t;
    long double value = 0.0L;
    for (double v : diff.data()) value += v * v;
    return {static_cast<double>(value), 2.0 * diff};
}

double squared_partial_residual(const Matrix& x_s, const Matrix& x_t, const Matrix& d_s,
                                const Matrix& d_t) {
    check_kda_shapes(x_s, x_t, d_s, d_t);
    const Matrix r = partial_gram(x_s, d_s) - partial_gram(x_t, d_t);
    long double s = 0.0L;
    for (double v : r.data()) s += v * v;
    return static_cast<double>(s);
}

LossValueGrad rkd_batch_loss(const Matrix& x_s, const Matrix& x_t) {
    if (x_s.cols() != x_t.cols()) throw DimensionError("rkd_batch_loss: batch sizes differ");
    Matrix g = gram(x_s) - gram(x_t);  // r x r
    const double scale = 1.0 / static_cast<double>(g.size());
    const double value = smooth_in_place(g);
    // z_ij = x_i . x_j - t_ij  =>  dL/dx_k = sum_j (G_kj + G_jk) x_j / r^2
    Matrix sym = g + transpose(g);
    return {value, scale * matmul(x_s, sym)};
}

LossValueGrad cross_entropy_loss(const Matrix& logits, std::span<const int> labels) {
    const std::size_t n = logits.cols();
    if (labels.size() != n) throw DimensionError("cross_entropy_loss: label count mismatch");
    LossValueGrad out{0.0, Matrix(logits.rows(), n)};
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= logits.rows())
            throw ArgumentError("cross_entropy_loss: label " + std::to_string(y) + " out of range");
        const auto lp = log_softmax_col(logits, i, 1.0);
        out.value -= lp[static_cast<std::size_t>(y)];
        for (std::size_t c = 0; c < lp.size(); ++c)
            out.grad(c, i) = (std::exp(lp[c]) - (c == static_cast<std::size_t>(y) ? 1.0 : 0.0)) * inv_n;
    }
    out.value *= inv_n;
    return out;
}

}  // namespace kda
