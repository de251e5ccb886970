#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kda/errors.hpp"
#include "kda/experiment.hpp"
#include "kda/kernels.hpp"
#include "kda/verify.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
    auto* opt = cmd->add_option("--config", c.config, "experiment config (JSON)");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "output directory (overrides output_dir)");
    cmd->add_option("--seed", c.seed, "seed override");
}

kda::ExperimentSpec load_spec(const Common& c) {
    kda::ExperimentSpec spec;
    if (!c.config.empty()) {
        spec = kda::load_experiment_spec(c.config);
    } else {
        spec.arms.push_back({"baseline", {}, {}});
    }
    if (!c.out.empty()) spec.output_dir = c.out;
    return spec;
}

int gen_data(const Common& c, const std::string& format) {
    kda::ExperimentSpec spec = load_spec(c);
    if (c.seed) spec.dataset.blobs.seed = *c.seed;
    const kda::DatasetSplit data = kda::materialize_dataset(spec.dataset);
    const kda::DatasetFormat fmt = kda::parse_dataset_format(format);
    const std::string ext = fmt == kda::DatasetFormat::Csv ? ".csv" : ".bin";
    fs::create_directories(spec.output_dir);
    kda::save_dataset(data.train, spec.output_dir / ("train" + ext), fmt);
    kda::save_dataset(data.test, spec.output_dir / ("test" + ext), fmt);
    std::cout << "wrote " << data.train.size() << " train / " << data.test.size() << " test examples to "
              << spec.output_dir.string() << '\n';
    return 0;
}

int train_teachers(const Common& c) {
    kda::ExperimentSpec spec = load_spec(c);
    if (c.seed) spec.seeds = {*c.seed};
    const kda::DatasetSplit data = kda::materialize_dataset(spec.dataset);
    fs::create_directories(spec.output_dir);
    std::ofstream csv(spec.output_dir / "teachers.csv");
    csv << "seed,train_acc,test_acc,param_hash\n";
    for (std::uint64_t seed : spec.seeds) {
        kda::Mlp net;
        const kda::TeacherRecord rec = kda::train_teacher_for_seed(spec, data, seed, &net);
        std::ofstream(spec.output_dir / ("teacher_" + std::to_string(seed) + ".json"))
            << kda::mlp_to_json(net).dump() << '\n';
        csv << seed << ',' << kda::format_double(rec.train_accuracy) << ','
            << kda::format_double(rec.test_accuracy) << ',' << rec.param_hash << '\n';
        std::cout << "teacher seed " << seed << ": test acc " << rec.test_accuracy << '\n';
    }
    return 0;
}

int run(const Common& c) {
    kda::ExperimentSpec spec = load_spec(c);
    if (c.seed) spec.seeds = {*c.seed};
    const kda::ExperimentResult result = kda::run_experiment(spec);
    for (const kda::ArmSummary& s : result.summary) {
        std::cout << s.arm << ": acc " << s.acc_mean;
        if (s.acc_std) std::cout << " +- " << *s.acc_std;
        std::cout << ", transfer_before " << s.transfer_before_mean << '\n';
    }
    return result.ok() ? 0 : 1;
}

int verify_bounds(const Common& c) {
    kda::BoundSuiteConfig cfg;
    if (c.seed) cfg.seed = *c.seed;
    const kda::BoundSuiteResult result = kda::run_bound_suite(cfg);
    for (const kda::BoundTally& t : result.tallies)
        std::cout << t.name << ": " << t.violations << '/' << t.trials << " violations, min slack " << t.min_slack
                  << '\n';
    if (!c.out.empty()) {
        fs::create_directories(c.out);
        std::ofstream out(fs::path(c.out) / "bound_failures.txt");
        kda::write_bound_reports(result.failures, out);
    }
    return result.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel-matrix distillation experiments"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "threads for dense kernels")->check(CLI::PositiveNumber);

    Common gen, teach, exp, bounds;
    std::string format = "csv";
    auto* gen_cmd = app.add_subcommand("gen-data", "write the configured dataset as train/test files");
    add_common(gen_cmd, gen, false);
    gen_cmd->add_option("--format", format, "csv or f32-binary")->check(CLI::IsMember({"csv", "f32-binary", "binary", "bin"}));
    auto* teach_cmd = app.add_subcommand("train-teacher", "train and save one teacher per seed");
    add_common(teach_cmd, teach, true);
    auto* run_cmd = app.add_subcommand("run", "run every arm x seed of an experiment");
    add_common(run_cmd, exp, true);
    auto* bounds_cmd = app.add_subcommand("verify-bounds", "randomised sweep over the bound checkers");
    add_common(bounds_cmd, bounds, false);

    CLI11_PARSE(app, argc, argv);
    kda::kernels::set_num_threads(threads);

    try {
        if (*gen_cmd) return gen_data(gen, format);
        if (*teach_cmd) return train_teachers(teach);
        if (*run_cmd) return run(exp);
        if (*bounds_cmd) return verify_bounds(bounds);
    } catch (const kda::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "fatal: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
