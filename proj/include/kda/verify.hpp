#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kda/landmarks.hpp"
#include "kda/matrix.hpp"
#include "kda/train.hpp"

namespace kda {

inline constexpr double kBoundTol = 1e-9;

enum class BoundStatus { Checked, NotApplicable };

// One checked inequality lhs <= rhs.
struct BoundReport {
    std::string context;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;  // rhs - lhs
    bool satisfied = true;
    BoundStatus status = BoundStatus::Checked;
    std::string note;

    static BoundReport make(std::string context, double lhs, double rhs);
    static BoundReport not_applicable(std::string context, std::string note);
};

// ||W_S^+ - W_T^+||_F <= ||W_S - W_T||_F; requires both spectra > 1.
BoundReport check_pinv_contraction(const Matrix& w_s, const Matrix& w_t);

// The deterministic links behind the C-vs-K bound:
//  (a) ||W_S - W_T||_F <= ||C_S - C_T||_F, only when both landmark sets are
//      dataset columns (W is then a row block of C); otherwise NotApplicable;
//  (b) pseudo-inverse contraction of W_S, W_T;
//  (c) ||K_S - K_T|| <= ||K_S - K~_S|| + ||K_T - K~_T|| + ||K~_S - K~_T||.
// Throws PreconditionError unless both W have smallest eigenvalue > 1.
std::vector<BoundReport> check_thm3_chain(const Matrix& x_s, const Matrix& x_t, const LandmarkSet& d_s,
                                          const LandmarkSet& d_t);

// M_ij = (mu_i . nu_j)^2 over the top-k eigenvectors; lhs is the largest row
// or column sum, rhs is 1.
BoundReport check_doubly_stochastic_M(const Matrix& w_s, const Matrix& w_t, std::size_t k);
Matrix eigenbasis_overlap(const Matrix& w_s, const Matrix& w_t, std::size_t k);

// ||K_S - K_T||_F <= A + B with
//   A = n e sum_i ||x_S^i - d_S^{a(i)}|| + n e sum_i ||x_T^i - d_T^{a(i)}||
//   B = sum_{i,j} |d_S^{a(i)} . x_S^j - d_T^{a(i)} . x_T^j|
// where e bounds every feature norm and a maps examples to landmarks.
BoundReport check_thm5_decomposition(const Matrix& x_s, const Matrix& x_t, const LandmarkSet& d_s,
                                     const LandmarkSet& d_t, std::span<const std::size_t> assignment);

// Pearson correlation of partial_loss against transfer_loss_before_fc across epochs.
double track_correlation(const MetricLog& log);
double pearson(std::span<const double> a, std::span<const double> b);

double min_eigenvalue(const Matrix& w);

// One line per report: tab-separated key=value fields.
void write_bound_reports(std::span<const BoundReport> reports, std::ostream& out);
std::string to_line(const BoundReport& r);

}  // namespace kda

namespace kda {

// Randomised sweep over every checker; instance sizes are fixed inside.
struct BoundSuiteConfig {
    int pinv_trials = 500;       // symmetric PD pairs, dim 8, spectra in (1, 100]
    int overlap_trials = 500;    // doubly stochastic M, k = dim
    int decomposition_trials = 200;  // n <= 50, d <= 8, class-center assignment
    int triangle_trials = 200;   // Nystrom triangle form, arbitrary landmarks and k
    int chain_trials = 200;      // dataset-column landmarks with W spectra > 1
    std::uint64_t seed = 0;
};

struct BoundTally {
    std::string name;
    int trials = 0;
    int violations = 0;
    double min_slack = 0.0;
};

struct BoundSuiteResult {
    std::vector<BoundTally> tallies;
    std::vector<BoundReport> failures;
    bool ok() const;
};

BoundSuiteResult run_bound_suite(const BoundSuiteConfig& config);

}  // namespace kda
