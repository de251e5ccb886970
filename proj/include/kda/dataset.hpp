#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kda/matrix.hpp"

namespace kda {

// Feature vectors (d x n, one column per example) and integer labels 0..L-1.
struct LabeledDataset {
    Matrix x;
    std::vector<int> y;

    std::size_t size() const { return y.size(); }
    std::size_t dim() const { return x.rows(); }
    int num_classes() const;
    void validate() const;
};

struct DatasetSplit {
    LabeledDataset train;
    LabeledDataset test;
};

struct BlobParams {
    int classes = 10;
    int dim = 20;
    int per_class = 200;
    double separation = 6.0;
    double sigma = 1.0;
    std::uint64_t seed = 0;
    double test_fraction = 0.2;
};

// Gaussian blobs around class means placed on a sphere of radius
// `separation`, split train/test per class.
DatasetSplit generate_blobs(const BlobParams& params);

// Per class: seeded shuffle, then the first share goes to train and the rest
// to test.
DatasetSplit stratified_split(const LabeledDataset& data, double test_fraction, std::uint64_t seed);

LabeledDataset subset(const LabeledDataset& data, std::span<const std::size_t> indices);

enum class DatasetFormat { Csv, F32Binary };

DatasetFormat format_from_path(const std::filesystem::path& path);
DatasetFormat parse_dataset_format(const std::string& name);

// csv: header f0,...,f{d-1},label then one row per example.
// binary: "KDA1", u32 n, u32 d, n*d little-endian f32 (example-major), n little-endian u32 labels.
LabeledDataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
LabeledDataset read_csv_dataset(std::istream& in);
LabeledDataset read_binary_dataset(std::istream& in);

void save_dataset(const LabeledDataset& data, const std::filesystem::path& path, DatasetFormat format);
void write_csv_dataset(const LabeledDataset& data, std::ostream& out);
void write_binary_dataset(const LabeledDataset& data, std::ostream& out);

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

}  // namespace kda
