#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kda/dataset.hpp"
#include "kda/landmarks.hpp"
#include "kda/losses.hpp"
#include "kda/mlp.hpp"

namespace kda {

struct TrainConfig {
    int total_epochs = 60;
    int warmup_epochs = 5;
    std::size_t batch_size = 64;
    double lr0 = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::uint64_t seed = 0;
    LossWeights loss_weights;

    // Student runs: 1 <= H < T plus the optimiser ranges.
    void validate() const;
    // Teacher runs ignore the warm-up length.
    void validate_optimizer() const;
};

// How landmarks are produced for the KDA losses of one student run.
struct DistillSetup {
    LandmarkStrategy strategy = LandmarkStrategy::ClassCenters;
    std::size_t centers_per_class = 1;
    std::size_t random_count = 0;  // Random strategy; 0 means one per class
    bool weight_by_w_t = false;    // multiply residuals by W_T^{+1/2}
};

struct EpochMetrics {
    int epoch = 0;
    double loss_ce = 0.0;
    double loss_kda_before_fc = 0.0;
    double loss_kda_after_fc = 0.0;
    double loss_kd = 0.0;
    double loss_rkd = 0.0;
    double loss_total = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double transfer_loss_before_fc = 0.0;  // ||K_S - K_T||_F / ||K_T||_F, before-FC features
    double transfer_loss_after_fc = 0.0;   // same on logits
    double partial_loss = 0.0;             // ||C_S - C_T||_F / ||K_T||_F, class-center landmarks
    double min_eig_ws = 0.0;
    double min_eig_wt = 0.0;

    bool operator==(const EpochMetrics&) const = default;
};

struct MetricLog {
    std::vector<EpochMetrics> records;
    bool operator==(const MetricLog&) const = default;
};

void write_metric_log(const MetricLog& log, std::ostream& out);  // JSON lines
MetricLog read_metric_log(std::istream& in);

// lr0 * 0.5 * (1 + cos(pi * epoch / T)), epoch in [0, T]
double cosine_lr(int epoch, int total_epochs, double lr0);

struct StepLosses {
    double ce = 0.0;
    double kda_before_fc = 0.0;
    double kda_after_fc = 0.0;
    double kd = 0.0;
    double rkd = 0.0;
    double total = 0.0;
};

// Student and teacher landmarks for one tap, held fixed during an epoch.
struct LandmarkPair {
    Matrix student;
    Matrix teacher;
    Matrix weighting;  // empty unless residuals are weighted
};

struct StepInput {
    const Matrix& x;
    std::span<const int> y;
    const Matrix* teacher_hidden = nullptr;
    const Matrix* teacher_logits = nullptr;
    const LandmarkPair* before_fc = nullptr;
    const LandmarkPair* after_fc = nullptr;
    bool kda_active = false;
};

struct StepResult {
    StepLosses losses;
    Matrix hidden;  // student before-FC features seen by this step
    Matrix logits;
};

// One forward/backward pass and SGD-momentum update on a mini-batch.
// Throws StateError if an active KDA term has no landmarks.
StepResult backward_step(Mlp& net, const StepInput& in, const LossWeights& weights,
                         const SgdParams& params, SgdState& state);

double accuracy(const Mlp& net, const LabeledDataset& data);

// Called after landmarks are recomputed at the end of `epoch`.
// capture_epoch[i] is the epoch in which example i's features were captured.
struct LandmarkProbe {
    int epoch;
    std::span<const int> capture_epoch;
    const LandmarkPair* before_fc;
    const LandmarkPair* after_fc;
};

struct TrainObserver {
    std::function<void(int epoch, const StepLosses&)> on_step;
    std::function<void(const LandmarkProbe&)> on_landmarks;
};

struct TeacherRun {
    Mlp net;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
};

// Cross-entropy only.
TeacherRun train_teacher(const TrainConfig& config, const DatasetSplit& data,
                         std::span<const std::size_t> hidden);

struct StudentRun {
    Mlp net;
    MetricLog log;
    std::optional<LandmarkPair> final_before_fc;  // landmarks computed after the last epoch
};

// Cross-entropy only, same initialisation and batch order as a student run.
Mlp train_baseline_student(const TrainConfig& config, const DatasetSplit& data,
                           std::span<const std::size_t> hidden);

// Warm-up for H epochs without KDA, then each epoch optimises KDA on the
// landmarks computed from the previous epoch's accumulated features.
StudentRun train_student_kda(const TrainConfig& config, const DatasetSplit& data, const Mlp& teacher,
                             std::span<const std::size_t> hidden, const DistillSetup& setup,
                             const TrainObserver* observer = nullptr);

// Landmarks for one tap from per-example student/teacher features.
LandmarkPair compute_landmark_pair(const DistillSetup& setup, const Matrix& student,
                                   const Matrix& teacher, std::span<const int> labels,
                                   int num_classes, std::span<const std::size_t> random_columns,
                                   std::uint64_t seed);

}  // namespace kda
