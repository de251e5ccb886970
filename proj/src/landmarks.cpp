#include "kda/landmarks.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "kda/errors.hpp"

namespace kda {

std::string_view to_string(LandmarkStrategy s) {
    switch (s) {
        case LandmarkStrategy::ClassCenters: return "class_centers";
        case LandmarkStrategy::KMeansPerClass: return "kmeans";
        case LandmarkStrategy::Random: return "random";
        case LandmarkStrategy::OneHot: return "onehot";
    }
    return "unknown";
}

LandmarkStrategy parse_landmark_strategy(std::string_view name) {
    if (name == "class_centers" || name == "centers") return LandmarkStrategy::ClassCenters;
    if (name == "kmeans") return LandmarkStrategy::KMeansPerClass;
    if (name == "random") return LandmarkStrategy::Random;
    if (name == "onehot") return LandmarkStrategy::OneHot;
    throw ArgumentError("unknown landmark strategy '" + std::string(name) + "'");
}

int count_classes(std::span<const int> labels) {
    int top = -1;
    for (int y : labels) {
        if (y < 0) throw ArgumentError("negative class label " + std::to_string(y));
        top = std::max(top, y);
    }
    return top + 1;
}

namespace {

void require_labels(const Matrix& x, std::span<const int> labels, const char* what) {
    if (labels.size() != x.cols())
        throw DimensionError(std::string(what) + ": " + std::to_string(labels.size()) +
                             " labels for " + std::to_string(x.cols()) + " examples");
}

double sq_dist(const Matrix& x, std::size_t i, const Matrix& c, std::size_t l) {
    double s = 0.0;
    for (std::size_t p = 0; p < x.rows(); ++p) {
        const double diff = x(p, i) - c(p, l);
        s += diff * diff;
    }
    return s;
}

}  // namespace

LandmarkSet class_centers(const Matrix& x, std::span<const int> labels, int num_classes) {
    require_labels(x, labels, "class_centers");
    if (num_classes < 1) throw ArgumentError("class_centers: no classes");
    const std::size_t d = x.rows();
    const auto L = static_cast<std::size_t>(num_classes);
    Matrix centers(d, L);
    std::vector<std::size_t> counts(L, 0);
    for (std::size_t i = 0; i < x.cols(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= num_classes)
            throw ArgumentError("class_centers: label " + std::to_string(y) + " out of range");
        ++counts[static_cast<std::size_t>(y)];
        for (std::size_t p = 0; p < d; ++p) centers(p, static_cast<std::size_t>(y)) += x(p, i);
    }
    for (std::size_t l = 0; l < L; ++l) {
        if (counts[l] == 0) throw EmptyClassError(static_cast<int>(l));
        const double inv = 1.0 / static_cast<double>(counts[l]);
        for (std::size_t p = 0; p < d; ++p) centers(p, l) *= inv;
    }
    LandmarkSet out;
    out.points = std::move(centers);
    out.strategy = LandmarkStrategy::ClassCenters;
    out.class_of.resize(L);
    std::iota(out.class_of.begin(), out.class_of.end(), 0);
    return out;
}

LandmarkSet class_centers(const Matrix& x, std::span<const int> labels) {
    return class_centers(x, labels, count_classes(labels));
}

namespace {

struct ClusterRun {
    std::vector<std::size_t> assignment;  // local cluster per member
    Matrix centers;
    std::vector<double> inertia;
};

double assign_all(const Matrix& pts, const Matrix& centers, std::vector<std::size_t>& assignment) {
    double total = 0.0;
    for (std::size_t i = 0; i < pts.cols(); ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centers.cols(); ++c) {
            const double dd = sq_dist(pts, i, centers, c);
            if (dd < best_d) {
                best_d = dd;
                best = c;
            }
        }
        assignment[i] = best;
        total += best_d;
    }
    return total;
}

double inertia_of(const Matrix& pts, const Matrix& centers, const std::vector<std::size_t>& a) {
    double total = 0.0;
    for (std::size_t i = 0; i < pts.cols(); ++i) total += sq_dist(pts, i, centers, a[i]);
    return total;
}

// Empty clusters take the point farthest from its center inside the largest cluster.
void repair_empty(const Matrix& pts, const Matrix& centers, std::vector<std::size_t>& a,
                  std::size_t k) {
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t v : a) ++sizes[v];
        if (sizes[c] != 0) continue;
        const std::size_t largest =
            static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < pts.cols(); ++i) {
            if (a[i] != largest) continue;
            const double dd = sq_dist(pts, i, centers, largest);
            if (dd > far_d) {
                far_d = dd;
                far = i;
            }
        }
        a[far] = c;
    }
}

ClusterRun lloyd(const Matrix& pts, std::size_t k, std::mt19937_64& rng) {
    constexpr int kMaxIter = 50;
    constexpr double kMinImprovement = 1e-8;
    const std::size_t n = pts.cols();
    const std::size_t d = pts.rows();

    // farthest-point seeding from a random first pick
    Matrix centers(d, k);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::size_t first = pick(rng);
    for (std::size_t p = 0; p < d; ++p) centers(p, 0) = pts(p, first);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    for (std::size_t c = 1; c < k; ++c) {
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], sq_dist(pts, i, centers, c - 1));
            if (nearest[i] > far_d) {
                far_d = nearest[i];
                far = i;
            }
        }
        for (std::size_t p = 0; p < d; ++p) centers(p, c) = pts(p, far);
    }

    ClusterRun run{std::vector<std::size_t>(n, 0), std::move(centers), {}};
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < kMaxIter; ++it) {
        assign_all(pts, run.centers, run.assignment);
        repair_empty(pts, run.centers, run.assignment, k);

        Matrix next(d, k);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[run.assignment[i]];
            for (std::size_t p = 0; p < d; ++p) next(p, run.assignment[i]) += pts(p, i);
        }
        for (std::size_t c = 0; c < k; ++c)
            for (std::size_t p = 0; p < d; ++p) next(p, c) /= static_cast<double>(counts[c]);
        run.centers = std::move(next);

        const double cur = inertia_of(pts, run.centers, run.assignment);
        run.inertia.push_back(cur);
        if (prev - cur < kMinImprovement * std::max(1.0, prev)) break;
        prev = cur;
    }
    return run;
}

}  // namespace

KMeansResult kmeans_per_class_detailed(const Matrix& x, std::span<const int> labels,
                                       std::size_t centers_per_class, std::uint64_t seed) {
    require_labels(x, labels, "kmeans_per_class");
    if (centers_per_class < 1) throw ArgumentError("kmeans_per_class: centers_per_class must be >= 1");
    const int L = count_classes(labels);
    const std::size_t d = x.rows();
    const std::size_t m = static_cast<std::size_t>(L) * centers_per_class;

    KMeansResult out;
    out.landmarks.points = Matrix(d, m);
    out.landmarks.strategy = LandmarkStrategy::KMeansPerClass;
    out.landmarks.seed = seed;
    out.landmarks.class_of.resize(m);
    out.assignment.assign(x.cols(), 0);
    out.inertia_history.resize(static_cast<std::size_t>(L));

    for (int l = 0; l < L; ++l) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < x.cols(); ++i)
            if (labels[i] == l) members.push_back(i);
        if (members.empty()) throw EmptyClassError(l);
        if (members.size() < centers_per_class)
            throw ArgumentError("kmeans_per_class: class " + std::to_string(l) + " has " +
                                std::to_string(members.size()) + " examples, fewer than " +
                                std::to_string(centers_per_class) + " centers");
        Matrix pts(d, members.size());
        for (std::size_t j = 0; j < members.size(); ++j)
            for (std::size_t p = 0; p < d; ++p) pts(p, j) = x(p, members[j]);

        std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(l + 1)));
        ClusterRun run = lloyd(pts, centers_per_class, rng);

        const std::size_t base = static_cast<std::size_t>(l) * centers_per_class;
        for (std::size_t c = 0; c < centers_per_class; ++c) {
            out.landmarks.class_of[base + c] = l;
            for (std::size_t p = 0; p < d; ++p) out.landmarks.points(p, base + c) = run.centers(p, c);
        }
        for (std::size_t j = 0; j < members.size(); ++j)
            out.assignment[members[j]] = base + run.assignment[j];
        out.inertia_history[static_cast<std::size_t>(l)] = std::move(run.inertia);
    }
    return out;
}

LandmarkSet kmeans_per_class(const Matrix& x, std::span<const int> labels,
                             std::size_t centers_per_class, std::uint64_t seed) {
    return kmeans_per_class_detailed(x, labels, centers_per_class, seed).landmarks;
}

Matrix centers_from_assignment(const Matrix& x, std::span<const std::size_t> assignment,
                               std::size_t m) {
    if (assignment.size() != x.cols())
        throw DimensionError("centers_from_assignment: assignment length mismatch");
    Matrix centers(x.rows(), m);
    std::vector<std::size_t> counts(m, 0);
    for (std::size_t i = 0; i < x.cols(); ++i) {
        const std::size_t l = assignment[i];
        if (l >= m) throw ArgumentError("centers_from_assignment: landmark index out of range");
        ++counts[l];
        for (std::size_t p = 0; p < x.rows(); ++p) centers(p, l) += x(p, i);
    }
    for (std::size_t l = 0; l < m; ++l) {
        if (counts[l] == 0) continue;
        for (std::size_t p = 0; p < x.rows(); ++p) centers(p, l) /= static_cast<double>(counts[l]);
    }
    return centers;
}

LandmarkSet random_landmarks(const Matrix& x, std::size_t m, std::uint64_t seed) {
    const std::size_t n = x.cols();
    if (m < 1 || m > n)
        throw ArgumentError("random_landmarks: m=" + std::to_string(m) + " outside [1, " +
                            std::to_string(n) + "]");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    // partial Fisher-Yates: the first m slots are a uniform sample without replacement
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(m);
    LandmarkSet out = landmarks_from_columns(x, idx);
    out.seed = seed;
    return out;
}

LandmarkSet landmarks_from_columns(const Matrix& x, std::span<const std::size_t> columns) {
    if (columns.empty()) throw ArgumentError("landmarks_from_columns: no columns");
    LandmarkSet out;
    out.points = Matrix(x.rows(), columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j] >= x.cols()) throw ArgumentError("landmarks_from_columns: index out of range");
        for (std::size_t p = 0; p < x.rows(); ++p) out.points(p, j) = x(p, columns[j]);
    }
    out.strategy = LandmarkStrategy::Random;
    out.source_columns.assign(columns.begin(), columns.end());
    return out;
}

LandmarkSet onehot_landmarks(std::size_t num_classes) {
    if (num_classes < 1) throw ArgumentError("onehot_landmarks: need at least one class");
    LandmarkSet out;
    out.points = Matrix::identity(num_classes);
    out.strategy = LandmarkStrategy::OneHot;
    out.class_of.resize(num_classes);
    std::iota(out.class_of.begin(), out.class_of.end(), 0);
    return out;
}

std::vector<std::size_t> assign_by_class(const LandmarkSet& set, std::span<const int> labels) {
    if (set.class_of.empty()) throw ArgumentError("assign_by_class: landmark set carries no classes");
    std::vector<std::size_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto it = std::find(set.class_of.begin(), set.class_of.end(), labels[i]);
        if (it == set.class_of.end())
            throw ArgumentError("assign_by_class: no landmark for label " + std::to_string(labels[i]));
        out[i] = static_cast<std::size_t>(it - set.class_of.begin());
    }
    return out;
}

std::vector<std::size_t> assign_nearest(const Matrix& x, const Matrix& landmarks) {
    if (x.rows() != landmarks.rows()) throw DimensionError("assign_nearest: dimension mismatch");
    std::vector<std::size_t> out(x.cols());
    assign_all(x, landmarks, out);
    return out;
}

}  // namespace kda
