#include "kda/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "kda/errors.hpp"

namespace kda {

static_assert(std::endian::native == std::endian::little, "binary dataset I/O assumes little-endian");

int LabeledDataset::num_classes() const {
    int top = -1;
    for (int v : y) top = std::max(top, v);
    return top + 1;
}

void LabeledDataset::validate() const {
    if (x.cols() != y.size()) throw DimensionError("dataset: feature/label count mismatch");
    const int L = num_classes();
    std::vector<bool> seen(static_cast<std::size_t>(std::max(L, 0)), false);
    for (int v : y) {
        if (v < 0) throw FormatError("dataset: negative label " + std::to_string(v));
        seen[static_cast<std::size_t>(v)] = true;
    }
    for (std::size_t l = 0; l < seen.size(); ++l)
        if (!seen[l]) throw FormatError("dataset: label gap, class " + std::to_string(l) + " absent");
    if (!all_finite(x)) throw FormatError("dataset: non-finite feature");
}

DatasetSplit generate_blobs(const BlobParams& p) {
    if (p.classes < 2 || p.dim < 2 || p.per_class < 2 || !(p.separation > 0.0) || !(p.sigma > 0.0))
        throw ArgumentError("generate_blobs: need classes >= 2, dim >= 2, per_class >= 2, "
                            "separation > 0, sigma > 0");
    if (!(p.test_fraction >= 0.0 && p.test_fraction < 1.0))
        throw ArgumentError("generate_blobs: test_fraction must be in [0, 1)");
    std::mt19937_64 rng(p.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto L = static_cast<std::size_t>(p.classes);
    const auto d = static_cast<std::size_t>(p.dim);
    const auto per = static_cast<std::size_t>(p.per_class);

    Matrix means(d, L);
    for (std::size_t l = 0; l < L; ++l) {
        double norm = 0.0;
        std::vector<double> v(d);
        while (norm == 0.0) {
            norm = 0.0;
            for (double& e : v) {
                e = normal(rng);
                norm += e * e;
            }
            norm = std::sqrt(norm);
        }
        for (std::size_t k = 0; k < d; ++k) means(k, l) = p.separation * v[k] / norm;
    }

    LabeledDataset all{Matrix(d, L * per), std::vector<int>(L * per)};
    for (std::size_t l = 0; l < L; ++l)
        for (std::size_t j = 0; j < per; ++j) {
            const std::size_t i = l * per + j;
            all.y[i] = static_cast<int>(l);
            for (std::size_t k = 0; k < d; ++k) all.x(k, i) = means(k, l) + p.sigma * normal(rng);
        }
    return stratified_split(all, p.test_fraction, p.seed ^ 0x5bd1e995ULL);
}

LabeledDataset subset(const LabeledDataset& data, std::span<const std::size_t> indices) {
    LabeledDataset out{Matrix(data.dim(), indices.size()), std::vector<int>(indices.size())};
    for (std::size_t j = 0; j < indices.size(); ++j) {
        out.y[j] = data.y[indices[j]];
        for (std::size_t k = 0; k < data.dim(); ++k) out.x(k, j) = data.x(k, indices[j]);
    }
    return out;
}

DatasetSplit stratified_split(const LabeledDataset& data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
        throw ArgumentError("stratified_split: test_fraction must be in [0, 1)");
    const int L = data.num_classes();
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> train_idx, test_idx;
    for (int l = 0; l < L; ++l) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < data.size(); ++i)
            if (data.y[i] == l) members.push_back(i);
        for (std::size_t i = members.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(members[i - 1], members[pick(rng)]);
        }
        const auto n_test = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(members.size())));
        const std::size_t n_train = members.size() - n_test;
        train_idx.insert(train_idx.end(), members.begin(), members.begin() + n_train);
        test_idx.insert(test_idx.end(), members.begin() + n_train, members.end());
    }
    DatasetSplit out;
    out.train = subset(data, train_idx);
    if (!test_idx.empty()) out.test = subset(data, test_idx);
    return out;
}

DatasetFormat format_from_path(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".csv") return DatasetFormat::Csv;
    if (ext == ".bin" || ext == ".kda") return DatasetFormat::F32Binary;
    throw ArgumentError("cannot infer dataset format from '" + path.string() + "'");
}

DatasetFormat parse_dataset_format(const std::string& name) {
    if (name == "csv") return DatasetFormat::Csv;
    if (name == "f32-binary" || name == "binary" || name == "bin") return DatasetFormat::F32Binary;
    throw ArgumentError("unknown dataset format '" + name + "'");
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

LabeledDataset finish(std::size_t d, std::vector<double>& feats, std::vector<int>& labels) {
    const std::size_t n = labels.size();
    if (n == 0) throw FormatError("dataset: no examples");
    LabeledDataset out{Matrix(d, n), std::move(labels)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) out.x(k, i) = feats[i * d + k];
    out.validate();
    return out;
}

}  // namespace

LabeledDataset read_csv_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("csv: missing header");
    const auto header = split_commas(trim(line));
    if (header.size() < 2 || trim(header.back()) != "label")
        throw FormatError("csv: header must be f0,...,f{d-1},label");
    const std::size_t d = header.size() - 1;
    for (std::size_t k = 0; k < d; ++k)
        if (trim(header[k]) != "f" + std::to_string(k))
            throw FormatError("csv: header column " + std::to_string(k) + " must be f" + std::to_string(k));

    std::vector<double> feats;
    std::vector<int> labels;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const auto t = trim(line);
        if (t.empty()) continue;
        const auto cells = split_commas(t);
        const std::string where = "csv row " + std::to_string(row);
        if (cells.size() != d + 1)
            throw FormatError(where + ": expected " + std::to_string(d + 1) + " fields, got " +
                              std::to_string(cells.size()));
        for (std::size_t k = 0; k < d; ++k) {
            const auto c = trim(cells[k]);
            double v = 0.0;
            const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
            if (res.ec != std::errc() || res.ptr != c.data() + c.size())
                throw FormatError(where + ": cannot parse feature f" + std::to_string(k));
            if (!std::isfinite(v)) throw FormatError(where + ": non-finite feature f" + std::to_string(k));
            feats.push_back(v);
        }
        const auto c = trim(cells[d]);
        int y = -1;
        const auto res = std::from_chars(c.data(), c.data() + c.size(), y);
        if (res.ec != std::errc() || res.ptr != c.data() + c.size() || y < 0)
            throw FormatError(where + ": invalid label");
        labels.push_back(y);
    }
    return finish(d, feats, labels);
}

namespace {

template <class T>
T read_le(std::istream& in, std::uint64_t& offset, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (in.gcount() != static_cast<std::streamsize>(sizeof v))
        throw FormatError(std::string("binary: truncated while reading ") + what + " at byte offset " +
                          std::to_string(offset + static_cast<std::uint64_t>(in.gcount())));
    offset += sizeof v;
    return v;
}

template <class T>
void write_le(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

}  // namespace

LabeledDataset read_binary_dataset(std::istream& in) {
    std::uint64_t offset = 0;
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "KDA1", 4) != 0)
        throw FormatError("binary: bad magic at byte offset 0");
    offset = 4;
    const auto n = read_le<std::uint32_t>(in, offset, "n");
    const auto d = read_le<std::uint32_t>(in, offset, "d");
    if (n == 0 || d == 0) throw FormatError("binary: zero n or d");
    std::vector<double> feats(static_cast<std::size_t>(n) * d);
    for (std::size_t k = 0; k < feats.size(); ++k) {
        const std::uint64_t at = offset;
        const float v = read_le<float>(in, offset, "features");
        if (!std::isfinite(v)) throw FormatError("binary: non-finite feature at byte offset " + std::to_string(at));
        feats[k] = v;
    }
    std::vector<int> labels(n);
    for (auto& y : labels) {
        const auto v = read_le<std::uint32_t>(in, offset, "labels");
        if (v > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
            throw FormatError("binary: label out of range");
        y = static_cast<int>(v);
    }
    return finish(d, feats, labels);
}

LabeledDataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open dataset '" + path.string() + "'");
    return format == DatasetFormat::Csv ? read_csv_dataset(in) : read_binary_dataset(in);
}

void write_csv_dataset(const LabeledDataset& data, std::ostream& out) {
    for (std::size_t k = 0; k < data.dim(); ++k) out << 'f' << k << ',';
    out << "label\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t k = 0; k < data.dim(); ++k) out << format_double(data.x(k, i)) << ',';
        out << data.y[i] << '\n';
    }
}

void write_binary_dataset(const LabeledDataset& data, std::ostream& out) {
    out.write("KDA1", 4);
    write_le(out, static_cast<std::uint32_t>(data.size()));
    write_le(out, static_cast<std::uint32_t>(data.dim()));
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t k = 0; k < data.dim(); ++k) write_le(out, static_cast<float>(data.x(k, i)));
    for (int y : data.y) write_le(out, static_cast<std::uint32_t>(y));
}

void save_dataset(const LabeledDataset& data, const std::filesystem::path& path, DatasetFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write dataset '" + path.string() + "'");
    if (format == DatasetFormat::Csv)
        write_csv_dataset(data, out);
    else
        write_binary_dataset(data, out);
}

}  // namespace kda
