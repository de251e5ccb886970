#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kda/dataset.hpp"
#include "kda/losses.hpp"
#include "kda/mlp.hpp"
#include "kda/train.hpp"

namespace kda {

struct DatasetSpec {
    enum class Kind { Blobs, File };
    Kind kind = Kind::Blobs;
    BlobParams blobs;
    // File mode: either one file split per class, or explicit train/test files.
    std::filesystem::path path;
    std::filesystem::path train_path;
    std::filesystem::path test_path;
    std::optional<DatasetFormat> format;  // inferred from the extension when absent
    double test_fraction = 0.2;
    std::uint64_t split_seed = 0;
};

struct ArmSpec {
    std::string name;
    LossWeights weights;
    DistillSetup setup;
};

struct ExperimentSpec {
    DatasetSpec dataset;
    std::vector<std::size_t> teacher_hidden{128, 128};
    std::vector<std::size_t> student_hidden{32, 32};
    TrainConfig train;       // seed replaced per run
    int teacher_epochs = 30;
    std::vector<ArmSpec> arms;
    std::vector<std::uint64_t> seeds{0};
    std::filesystem::path output_dir = "kda_out";
    int workers = 1;
    bool record_runtime = true;  // false writes runtime_s = 0 for byte-stable output
    bool write_bounds = true;

    void validate() const;
};

ExperimentSpec parse_experiment_spec(const nlohmann::json& j);
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

DatasetSplit materialize_dataset(const DatasetSpec& spec);

struct ResultRow {
    std::string arm;
    std::uint64_t seed = 0;
    double acc = 0.0;
    double transfer_before = 0.0;
    double transfer_after = 0.0;
    std::optional<double> partial_loss;  // absent for arms without landmarks
    std::optional<double> min_eig_ws;
    std::optional<double> min_eig_wt;
    double runtime_s = 0.0;
    std::string status = "ok";
};

struct ArmSummary {
    std::string arm;
    std::size_t seeds = 0;
    double acc_mean = 0.0;
    std::optional<double> acc_std;  // only with >= 2 seeds
    double transfer_before_mean = 0.0;
    std::optional<double> transfer_before_std;
    double transfer_after_mean = 0.0;
    std::optional<double> transfer_after_std;
};

struct TeacherRecord {
    std::uint64_t seed = 0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::uint64_t param_hash = 0;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;  // arm-major, then seed, in spec order
    std::vector<ArmSummary> summary;
    std::vector<TeacherRecord> teachers;
    std::map<std::pair<std::string, std::uint64_t>, MetricLog> logs;
    bool ok() const;
};

inline constexpr const char* kResultsHeader =
    "arm,seed,acc,transfer_before,transfer_after,partial_loss,min_eig_ws,min_eig_wt,runtime_s,status";

// Trains one teacher per seed (shared across arms), then every arm x seed.
// Writes results.csv, summary.csv, teachers.csv, metrics_<arm>_<seed>.jsonl
// and bounds_<arm>_<seed>.txt into spec.output_dir.
ExperimentResult run_experiment(const ExperimentSpec& spec);

TeacherRecord train_teacher_for_seed(const ExperimentSpec& spec, const DatasetSplit& data,
                                     std::uint64_t seed, Mlp* out_net);

std::vector<ArmSummary> summarize(const std::vector<ResultRow>& rows);
void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out);
void write_summary_csv(const std::vector<ArmSummary>& rows, std::ostream& out);

nlohmann::json mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);

// Worker slots: min(requested, KDA_THREADS) when the variable is set.
int effective_workers(int requested);

}  // namespace kda
