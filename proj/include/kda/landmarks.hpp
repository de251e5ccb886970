#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "kda/gram.hpp"
#include "kda/matrix.hpp"

namespace kda {

enum class LandmarkStrategy { ClassCenters, KMeansPerClass, Random, OneHot };

std::string_view to_string(LandmarkStrategy s);
LandmarkStrategy parse_landmark_strategy(std::string_view name);

struct LandmarkSet {
    Matrix points;  // d x m
    LandmarkStrategy strategy = LandmarkStrategy::ClassCenters;
    std::vector<int> class_of;  // landmark -> label; empty for Random
    std::optional<std::uint64_t> seed;
    // Dataset columns the landmarks were copied from (Random only).
    std::vector<std::size_t> source_columns;

    std::size_t size() const { return points.cols(); }
    std::size_t dim() const { return points.rows(); }
};

// Number of classes implied by labels (max + 1). Labels must be >= 0.
int count_classes(std::span<const int> labels);

// Column l is the mean of the examples labelled l; labels span 0..num_classes-1.
LandmarkSet class_centers(const Matrix& x, std::span<const int> labels, int num_classes);
LandmarkSet class_centers(const Matrix& x, std::span<const int> labels);

struct KMeansResult {
    LandmarkSet landmarks;
    std::vector<std::size_t> assignment;  // example -> landmark index
    // Total within-cluster inertia after each Lloyd iteration, per class.
    std::vector<std::vector<double>> inertia_history;
};

// Lloyd's k-means inside each class. Landmark l * centers_per_class + c is
// cluster c of class l.
KMeansResult kmeans_per_class_detailed(const Matrix& x, std::span<const int> labels,
                                       std::size_t centers_per_class, std::uint64_t seed);
LandmarkSet kmeans_per_class(const Matrix& x, std::span<const int> labels,
                             std::size_t centers_per_class, std::uint64_t seed);

// Means of x over a fixed example -> landmark assignment. Pairs student
// landmarks with teacher clusters. Empty groups produce a zero column.
Matrix centers_from_assignment(const Matrix& x, std::span<const std::size_t> assignment,
                               std::size_t m);

// m distinct columns sampled uniformly without replacement.
LandmarkSet random_landmarks(const Matrix& x, std::size_t m, std::uint64_t seed);
// The columns of x at the given indices, as a Random-strategy set.
LandmarkSet landmarks_from_columns(const Matrix& x, std::span<const std::size_t> columns);

LandmarkSet onehot_landmarks(std::size_t num_classes);

// Example -> landmark of its own class (first landmark carrying that label).
std::vector<std::size_t> assign_by_class(const LandmarkSet& set, std::span<const int> labels);
// Example -> nearest landmark in Euclidean distance, ties to the lower index.
std::vector<std::size_t> assign_nearest(const Matrix& x, const Matrix& landmarks);

inline NystromApprox build_nystrom(const FeatureBlock& x, const LandmarkSet& d, std::size_t k) {
    return build_nystrom(x.features, d.points, k);
}

}  // namespace kda
