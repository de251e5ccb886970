#include "kda/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "kda/dataset.hpp"
#include "kda/errors.hpp"
#include "kda/gram.hpp"

namespace kda {

BoundReport BoundReport::make(std::string context, double lhs, double rhs) {
    BoundReport r;
    r.context = std::move(context);
    r.lhs = lhs;
    r.rhs = rhs;
    r.slack = rhs - lhs;
    r.satisfied = lhs <= rhs + kBoundTol;
    return r;
}

BoundReport BoundReport::not_applicable(std::string context, std::string note) {
    BoundReport r;
    r.context = std::move(context);
    r.status = BoundStatus::NotApplicable;
    r.note = std::move(note);
    return r;
}

double min_eigenvalue(const Matrix& w) { return sym_eig(w).values.back(); }

namespace {

void require_spectrum_above_one(const Matrix& w_s, const Matrix& w_t) {
    const double ls = min_eigenvalue(w_s);
    const double lt = min_eigenvalue(w_t);
    if (!(ls > 1.0) || !(lt > 1.0))
        throw PreconditionError("smallest eigenvalues must exceed 1 (W_S: " + format_double(ls) +
                                ", W_T: " + format_double(lt) + ")");
}

}  // namespace

BoundReport check_pinv_contraction(const Matrix& w_s, const Matrix& w_t) {
    if (w_s.rows() != w_t.rows() || w_s.cols() != w_t.cols())
        throw DimensionError("check_pinv_contraction: shape mismatch");
    require_spectrum_above_one(w_s, w_t);
    const double lhs = frobenius_norm(pseudo_inverse(w_s) - pseudo_inverse(w_t));
    const double rhs = frobenius_norm(w_s - w_t);
    return BoundReport::make("pinv_contraction", lhs, rhs);
}

std::vector<BoundReport> check_thm3_chain(const Matrix& x_s, const Matrix& x_t, const LandmarkSet& d_s,
                                          const LandmarkSet& d_t) {
    if (x_s.cols() != x_t.cols()) throw DimensionError("check_thm3_chain: example counts differ");
    if (d_s.size() != d_t.size()) throw DimensionError("check_thm3_chain: landmark counts differ");
    const std::size_t m = d_s.size();
    const NystromApprox ns = build_nystrom(x_s, d_s.points, m);
    const NystromApprox nt = build_nystrom(x_t, d_t.points, m);
    require_spectrum_above_one(ns.W, nt.W);

    std::vector<BoundReport> out;
    const bool columns = !d_s.source_columns.empty() && d_s.source_columns == d_t.source_columns;
    if (columns)
        out.push_back(BoundReport::make("w_le_c", frobenius_norm(ns.W - nt.W), frobenius_norm(ns.C - nt.C)));
    else
        out.push_back(BoundReport::not_applicable("w_le_c", "not-a-submatrix"));

    out.push_back(check_pinv_contraction(ns.W, nt.W));

    const Matrix k_s = gram(x_s);
    const Matrix k_t = gram(x_t);
    const Matrix kt_s = reconstruct(ns);
    const Matrix kt_t = reconstruct(nt);
    const double lhs = frobenius_norm(k_s - k_t);
    const double rhs = frobenius_norm(k_s - kt_s) + frobenius_norm(k_t - kt_t) + frobenius_norm(kt_s - kt_t);
    out.push_back(BoundReport::make("nystrom_triangle", lhs, rhs));
    return out;
}

Matrix eigenbasis_overlap(const Matrix& w_s, const Matrix& w_t, std::size_t k) {
    if (w_s.rows() != w_t.rows() || w_s.cols() != w_t.cols())
        throw DimensionError("eigenbasis_overlap: shape mismatch");
    if (k < 1 || k > w_s.rows()) throw ArgumentError("eigenbasis_overlap: k out of range");
    const SymEig es = sym_eig(w_s);
    const SymEig et = sym_eig(w_t);
    Matrix m(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            double dot = 0.0;
            for (std::size_t p = 0; p < w_s.rows(); ++p) dot += es.vectors(p, i) * et.vectors(p, j);
            m(i, j) = dot * dot;
        }
    return m;
}

BoundReport check_doubly_stochastic_M(const Matrix& w_s, const Matrix& w_t, std::size_t k) {
    const Matrix m = eigenbasis_overlap(w_s, w_t, k);
    double worst = 0.0;
    double min_entry = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double row = 0.0;
        double col = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            row += m(i, j);
            col += m(j, i);
            min_entry = std::min(min_entry, m(i, j));
        }
        worst = std::max({worst, row, col});
    }
    BoundReport r = BoundReport::make("doubly_stochastic_M", worst, 1.0);
    if (min_entry < -1e-12) {
        r.satisfied = false;
        r.note = "negative entry";
    }
    return r;
}

BoundReport check_thm5_decomposition(const Matrix& x_s, const Matrix& x_t, const LandmarkSet& d_s,
                                     const LandmarkSet& d_t, std::span<const std::size_t> assignment) {
    const std::size_t n = x_s.cols();
    if (x_t.cols() != n || assignment.size() != n)
        throw DimensionError("check_thm5_decomposition: example counts differ");
    if (d_s.size() != d_t.size()) throw DimensionError("check_thm5_decomposition: landmark counts differ");
    if (d_s.dim() != x_s.rows() || d_t.dim() != x_t.rows())
        throw DimensionError("check_thm5_decomposition: landmark dims differ from features");
    const std::size_t m = d_s.size();

    auto col_norm = [](const Matrix& x, std::size_t i) {
        double s = 0.0;
        for (std::size_t p = 0; p < x.rows(); ++p) s += x(p, i) * x(p, i);
        return std::sqrt(s);
    };
    auto dist_to = [](const Matrix& x, std::size_t i, const Matrix& d, std::size_t l) {
        double s = 0.0;
        for (std::size_t p = 0; p < x.rows(); ++p) {
            const double v = x(p, i) - d(p, l);
            s += v * v;
        }
        return std::sqrt(s);
    };

    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) e = std::max({e, col_norm(x_s, i), col_norm(x_t, i)});

    double sum_s = 0.0;
    double sum_t = 0.0;
    std::vector<std::size_t> uses(m, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t l = assignment[i];
        if (l >= m) throw ArgumentError("check_thm5_decomposition: assignment out of range");
        ++uses[l];
        sum_s += dist_to(x_s, i, d_s.points, l);
        sum_t += dist_to(x_t, i, d_t.points, l);
    }
    const double nd = static_cast<double>(n);
    const double a_term = nd * e * sum_s + nd * e * sum_t;

    // B groups pairs by the landmark of i: sum_l uses(l) * sum_j |C_S(j,l) - C_T(j,l)|
    const Matrix diff = partial_gram(x_s, d_s.points) - partial_gram(x_t, d_t.points);
    double b_term = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
        if (uses[l] == 0) continue;
        double col = 0.0;
        for (std::size_t j = 0; j < n; ++j) col += std::abs(diff(j, l));
        b_term += static_cast<double>(uses[l]) * col;
    }
    const double lhs = frobenius_norm(gram(x_s) - gram(x_t));
    return BoundReport::make("kernel_decomposition", lhs, a_term + b_term);
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("pearson: series lengths differ");
    if (a.size() < 2) throw ArgumentError("pearson: need at least two points");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) throw NumericError("pearson: constant series, correlation undefined");
    return sab / std::sqrt(saa * sbb);
}

double track_correlation(const MetricLog& log) {
    if (log.records.size() < 3) throw ArgumentError("track_correlation: need at least 3 epochs");
    std::vector<double> partial, transfer;
    for (const EpochMetrics& m : log.records) {
        partial.push_back(m.partial_loss);
        transfer.push_back(m.transfer_loss_before_fc);
    }
    return pearson(partial, transfer);
}

std::string to_line(const BoundReport& r) {
    std::string s = "context=" + r.context;
    if (r.status == BoundStatus::NotApplicable) {
        s += "\tstatus=not-applicable\tnote=" + r.note;
        return s;
    }
    s += "\tlhs=" + format_double(r.lhs) + "\trhs=" + format_double(r.rhs) + "\tslack=" +
         format_double(r.slack) + "\tsatisfied=" + (r.satisfied ? "true" : "false");
    if (!r.note.empty()) s += "\tnote=" + r.note;
    return s;
}

void write_bound_reports(std::span<const BoundReport> reports, std::ostream& out) {
    for (const BoundReport& r : reports) out << to_line(r) << '\n';
}

// randomised bound suite

bool BoundSuiteResult::ok() const {
    return std::all_of(tallies.begin(), tallies.end(), [](const BoundTally& t) { return t.violations == 0; });
}

namespace {

Matrix gaussian(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Matrix m(r, c);
    for (double& v : m.data()) v = g(rng);
    return m;
}

// Q diag(lambda) Q^T with a random orthonormal Q and lambda uniform in (lo, hi].
Matrix random_spd(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
    const Matrix a = gaussian(n, n, rng);
    const SymEig basis = sym_eig(a + transpose(a));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SymEig e{std::vector<double>(n), basis.vectors};
    for (double& l : e.values) l = hi - u(rng) * (hi - lo);
    return spectral_map(e, [](double l) { return l; });
}

struct Tallier {
    BoundTally tally;
    std::vector<BoundReport>* failures;
    void add(const BoundReport& r) {
        if (r.status == BoundStatus::NotApplicable) return;
        ++tally.trials;
        tally.min_slack = tally.trials == 1 ? r.slack : std::min(tally.min_slack, r.slack);
        if (!r.satisfied) {
            ++tally.violations;
            failures->push_back(r);
        }
    }
};

}  // namespace

BoundSuiteResult run_bound_suite(const BoundSuiteConfig& cfg) {
    BoundSuiteResult out;
    std::mt19937_64 rng(cfg.seed);

    Tallier pinv{{"pinv_contraction"}, &out.failures};
    for (int t = 0; t < cfg.pinv_trials; ++t)
        pinv.add(check_pinv_contraction(random_spd(8, 1.0, 100.0, rng), random_spd(8, 1.0, 100.0, rng)));
    out.tallies.push_back(pinv.tally);

    Tallier overlap{{"doubly_stochastic_M"}, &out.failures};
    for (int t = 0; t < cfg.overlap_trials; ++t)
        overlap.add(check_doubly_stochastic_M(random_spd(8, 1.0, 100.0, rng), random_spd(8, 1.0, 100.0, rng), 8));
    out.tallies.push_back(overlap.tally);

    Tallier decomposition{{"kernel_decomposition"}, &out.failures};
    std::uniform_int_distribution<int> n_dist(2, 50), d_dist(1, 8);
    for (int t = 0; t < cfg.decomposition_trials; ++t) {
        const auto n = static_cast<std::size_t>(n_dist(rng));
        const int L = std::uniform_int_distribution<int>(1, static_cast<int>(std::min<std::size_t>(5, n)))(rng);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i)
            y[i] = i < static_cast<std::size_t>(L) ? static_cast<int>(i)
                                                   : std::uniform_int_distribution<int>(0, L - 1)(rng);
        const Matrix xs = gaussian(static_cast<std::size_t>(d_dist(rng)), n, rng);
        const Matrix xt = gaussian(static_cast<std::size_t>(d_dist(rng)), n, rng);
        const LandmarkSet ds = class_centers(xs, y, L);
        const LandmarkSet dt = class_centers(xt, y, L);
        decomposition.add(check_thm5_decomposition(xs, xt, ds, dt, assign_by_class(ds, y)));
    }
    out.tallies.push_back(decomposition.tally);

    Tallier triangle{{"nystrom_triangle"}, &out.failures};
    for (int t = 0; t < cfg.triangle_trials; ++t) {
        const auto n = static_cast<std::size_t>(n_dist(rng));
        const auto m = static_cast<std::size_t>(std::uniform_int_distribution<int>(1, 8)(rng));
        const auto k = static_cast<std::size_t>(std::uniform_int_distribution<int>(1, static_cast<int>(m))(rng));
        const Matrix xs = gaussian(static_cast<std::size_t>(d_dist(rng)), n, rng);
        const Matrix xt = gaussian(static_cast<std::size_t>(d_dist(rng)), n, rng);
        const NystromApprox ns = build_nystrom(xs, gaussian(xs.rows(), m, rng), k);
        const NystromApprox nt = build_nystrom(xt, gaussian(xt.rows(), m, rng), k);
        const Matrix ks = gram(xs), kt = gram(xt), as = reconstruct(ns), at = reconstruct(nt);
        triangle.add(BoundReport::make(
            "nystrom_triangle", frobenius_norm(ks - kt),
            frobenius_norm(ks - as) + frobenius_norm(kt - at) + frobenius_norm(as - at)));
    }
    out.tallies.push_back(triangle.tally);

    Tallier chain_w{{"w_le_c"}, &out.failures};
    Tallier chain_pinv{{"chain_pinv_contraction"}, &out.failures};
    Tallier chain_tri{{"chain_nystrom_triangle"}, &out.failures};
    for (int t = 0; t < cfg.chain_trials; ++t) {
        // rejection-sample until both landmark Grams have spectra above 1
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const auto n = static_cast<std::size_t>(std::uniform_int_distribution<int>(10, 50)(rng));
            const auto m = static_cast<std::size_t>(std::uniform_int_distribution<int>(1, 6)(rng));
            const auto ds_dim = static_cast<std::size_t>(std::uniform_int_distribution<int>(static_cast<int>(m), 8)(rng));
            const auto dt_dim = static_cast<std::size_t>(std::uniform_int_distribution<int>(static_cast<int>(m), 8)(rng));
            const Matrix xs = gaussian(ds_dim, n, rng, 3.0);
            const Matrix xt = gaussian(dt_dim, n, rng, 3.0);
            const LandmarkSet ls = random_landmarks(xs, m, rng());
            const LandmarkSet lt = landmarks_from_columns(xt, ls.source_columns);
            if (min_eigenvalue(gram(ls.points)) <= 1.0 || min_eigenvalue(gram(lt.points)) <= 1.0) continue;
            const auto reports = check_thm3_chain(xs, xt, ls, lt);
            chain_w.add(reports[0]);
            chain_pinv.add(reports[1]);
            chain_tri.add(reports[2]);
            break;
        }
    }
    out.tallies.push_back(chain_w.tally);
    out.tallies.push_back(chain_pinv.tally);
    out.tallies.push_back(chain_tri.tally);
    return out;
}

}  // namespace kda
