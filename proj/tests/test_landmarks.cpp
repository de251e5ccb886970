#include <algorithm>
#include <random>
#include <set>

#include <doctest.h>

#include "kda/dataset.hpp"
#include "kda/errors.hpp"
#include "kda/landmarks.hpp"
#include "oracles.hpp"

using namespace kda;

namespace {

double column_distance(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
    double s = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) s += (a(r, i) - b(r, j)) * (a(r, i) - b(r, j));
    return std::sqrt(s);
}

double nearest_sum(const Matrix& x, const Matrix& d) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.cols(); ++i) {
        double best = INFINITY;
        for (std::size_t l = 0; l < d.cols(); ++l) best = std::min(best, column_distance(x, i, d, l));
        total += best;
    }
    return total;
}

}  // namespace

TEST_SUITE("landmarks") {

TEST_CASE("class centers examples") {
    const Matrix x = Matrix::from_rows({{0, 2, 0}, {0, 0, 4}});
    const std::vector<int> y{0, 0, 1};
    const LandmarkSet c = class_centers(x, y);
    CHECK(c.points == Matrix::from_rows({{1, 0}, {0, 4}}));
    CHECK(c.strategy == LandmarkStrategy::ClassCenters);
    CHECK(c.class_of == std::vector<int>{0, 1});

    const Matrix single = Matrix::from_rows({{3, -1}, {2, 5}});
    CHECK(class_centers(single, std::vector<int>{0, 1}).points == single);

    const Matrix same(3, 6, 2.5);
    const LandmarkSet s = class_centers(same, std::vector<int>{0, 1, 2, 0, 1, 2});
    for (double v : s.points.data()) CHECK(v == 2.5);
}

TEST_CASE("empty class names the label") {
    const Matrix x(2, 3, 1.0);
    try {
        class_centers(x, std::vector<int>{0, 0, 2}, 3);
        FAIL("expected EmptyClassError");
    } catch (const EmptyClassError& e) {
        CHECK(e.label() == 1);
    }
}

TEST_CASE("class centers mean-residual property") {
    std::mt19937_64 rng(1);
    const Matrix x = oracle::random_matrix(5, 60, rng);
    std::vector<int> y(60);
    for (std::size_t i = 0; i < 60; ++i) y[i] = static_cast<int>(i % 4);
    const LandmarkSet c = class_centers(x, y);
    for (int l = 0; l < 4; ++l)
        for (std::size_t r = 0; r < 5; ++r) {
            double s = 0.0;
            for (std::size_t i = 0; i < 60; ++i)
                if (y[i] == l) s += x(r, i) - c.points(r, static_cast<std::size_t>(l));
            CHECK(std::abs(s) < 1e-9);
        }
}

TEST_CASE("kmeans with one center equals class centers") {
    std::mt19937_64 rng(2);
    const Matrix x = oracle::random_matrix(4, 40, rng);
    std::vector<int> y(40);
    for (std::size_t i = 0; i < 40; ++i) y[i] = static_cast<int>(i % 5);
    CHECK(oracle::rel_diff(kmeans_per_class(x, y, 1, 3).points, class_centers(x, y).points) < 1e-9);
}

TEST_CASE("kmeans splits a symmetric pair") {
    const Matrix x = Matrix::from_rows({{-1, 1}});
    const LandmarkSet k = kmeans_per_class(x, std::vector<int>{0, 0}, 2, 5);
    std::vector<double> got{k.points(0, 0), k.points(0, 1)};
    std::sort(got.begin(), got.end());
    CHECK(got == std::vector<double>{-1, 1});
    CHECK(k.class_of == std::vector<int>{0, 0});
}

TEST_CASE("kmeans matches brute-force optimal 2-clustering on a line") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g;
    for (int t = 0; t < 20; ++t) {
        std::vector<double> pts(9);
        for (double& p : pts) p = g(rng) + (&p - pts.data() < 4 ? -4.0 : 4.0);
        Matrix x(1, 9, pts);
        const KMeansResult km = kmeans_per_class_detailed(x, std::vector<int>(9, 0), 2, 9);
        // brute force over contiguous splits of the sorted points
        std::vector<double> s = pts;
        std::sort(s.begin(), s.end());
        double best = INFINITY;
        for (std::size_t cut = 1; cut < s.size(); ++cut) {
            double total = 0.0;
            for (auto [b, e] : {std::pair{std::size_t{0}, cut}, std::pair{cut, s.size()}}) {
                double mean = 0.0;
                for (std::size_t i = b; i < e; ++i) mean += s[i];
                mean /= static_cast<double>(e - b);
                for (std::size_t i = b; i < e; ++i) total += (s[i] - mean) * (s[i] - mean);
            }
            best = std::min(best, total);
        }
        CHECK(km.inertia_history[0].back() == doctest::Approx(best).epsilon(1e-9));
    }
}

TEST_CASE("kmeans is deterministic and monotone") {
    std::mt19937_64 rng(3);
    const Matrix x = oracle::random_matrix(6, 120, rng);
    std::vector<int> y(120);
    for (std::size_t i = 0; i < 120; ++i) y[i] = static_cast<int>(i % 3);
    const KMeansResult a = kmeans_per_class_detailed(x, y, 4, 42);
    const KMeansResult b = kmeans_per_class_detailed(x, y, 4, 42);
    CHECK(a.landmarks.points == b.landmarks.points);
    CHECK(a.assignment == b.assignment);
    CHECK(a.landmarks.size() == 12);
    for (const auto& hist : a.inertia_history)
        for (std::size_t i = 1; i < hist.size(); ++i) CHECK(hist[i] <= hist[i - 1] + 1e-9);
    // landmark l * cpc + c belongs to class l
    for (std::size_t i = 0; i < 120; ++i) CHECK(a.assignment[i] / 4 == static_cast<std::size_t>(y[i]));
}

TEST_CASE("kmeans argument checks") {
    const Matrix x(2, 4, 1.0);
    CHECK_THROWS_AS(kmeans_per_class(x, std::vector<int>{0, 0, 1, 1}, 0, 1), ArgumentError);
    CHECK_THROWS_AS(kmeans_per_class(x, std::vector<int>{0, 0, 0, 1}, 2, 1), ArgumentError);
}

TEST_CASE("kmeans handles duplicate points") {
    const Matrix x(2, 6, 1.0);
    const KMeansResult km = kmeans_per_class_detailed(x, std::vector<int>(6, 0), 3, 1);
    CHECK(all_finite(km.landmarks.points));
}

TEST_CASE("random landmarks") {
    std::mt19937_64 rng(4);
    const Matrix x = oracle::random_matrix(3, 10, rng);
    const LandmarkSet all = random_landmarks(x, 10, 1);
    std::set<std::size_t> cols(all.source_columns.begin(), all.source_columns.end());
    CHECK(cols.size() == 10);
    for (std::size_t j = 0; j < 10; ++j)
        for (std::size_t r = 0; r < 3; ++r) CHECK(all.points(r, j) == x(r, all.source_columns[j]));

    const Matrix one = Matrix::from_rows({{7}, {8}});
    CHECK(random_landmarks(one, 1, 3).points == one);

    CHECK(random_landmarks(x, 4, 9).source_columns == random_landmarks(x, 4, 9).source_columns);
    CHECK(random_landmarks(x, 4, 9).seed == std::optional<std::uint64_t>(9));
    CHECK_THROWS_AS(random_landmarks(x, 11, 1), ArgumentError);
    CHECK_THROWS_AS(random_landmarks(x, 0, 1), ArgumentError);
}

TEST_CASE("random landmarks are roughly uniform") {
    const Matrix x(1, 5, 1.0);
    std::vector<int> hits(5, 0);
    for (std::uint64_t s = 0; s < 5000; ++s) ++hits[random_landmarks(x, 1, s).source_columns[0]];
    for (int h : hits) CHECK(std::abs(h - 1000) < 150);
}

TEST_CASE("one-hot landmarks") {
    const LandmarkSet d = onehot_landmarks(3);
    CHECK(d.points == Matrix::identity(3));
    CHECK(d.strategy == LandmarkStrategy::OneHot);
    CHECK(sym_eig(gram(d.points)).values.back() == doctest::Approx(1.0));
}

TEST_CASE("class centers beat random landmarks on the nearest-landmark objective") {
    BlobParams p;
    p.classes = 5;
    p.dim = 6;
    p.per_class = 40;
    p.seed = 3;
    const DatasetSplit data = generate_blobs(p);
    const LandmarkSet c = class_centers(data.train.x, data.train.y);
    const double centers = nearest_sum(data.train.x, c.points);
    double random_total = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) random_total += nearest_sum(data.train.x, random_landmarks(data.train.x, 5, s).points);
    CHECK(centers <= random_total / 20.0);
    CHECK(sym_eig(gram(c.points)).values.back() > 0.0);
}

TEST_CASE("assignments") {
    const Matrix x = Matrix::from_rows({{0, 10, 1}});
    const Matrix d = Matrix::from_rows({{0, 9}});
    CHECK(assign_nearest(x, d) == std::vector<std::size_t>{0, 1, 0});
    const LandmarkSet c = class_centers(x, std::vector<int>{1, 0, 1});
    CHECK(assign_by_class(c, std::vector<int>{1, 0, 1}) == std::vector<std::size_t>{1, 0, 1});
    CHECK(centers_from_assignment(x, std::vector<std::size_t>{1, 0, 1}, 2) == Matrix::from_rows({{10, 0.5}}));
}

TEST_CASE("strategy names round-trip") {
    for (LandmarkStrategy s : {LandmarkStrategy::ClassCenters, LandmarkStrategy::KMeansPerClass,
                               LandmarkStrategy::Random, LandmarkStrategy::OneHot})
        CHECK(parse_landmark_strategy(to_string(s)) == s);
    CHECK_THROWS_AS(parse_landmark_strategy("nearest"), ArgumentError);
}

}  // TEST_SUITE
