#include "kda/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <iostream>

#include "kda/errors.hpp"
#include "kda/landmarks.hpp"
#include "kda/verify.hpp"

namespace kda {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <class T>
void read_opt(const json& j, const char* key, T& into, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        into = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

DatasetSpec parse_dataset(const json& j) {
    check_keys(j,
               {"type", "classes", "dim", "per_class", "separation", "sigma", "seed", "test_fraction", "path",
                "train_path", "test_path", "format", "split_seed"},
               "dataset");
    DatasetSpec d;
    std::string type = "blobs";
    read_opt(j, "type", type, "dataset");
    read_opt(j, "test_fraction", d.test_fraction, "dataset");
    if (type == "blobs") {
        d.kind = DatasetSpec::Kind::Blobs;
        read_opt(j, "classes", d.blobs.classes, "dataset");
        read_opt(j, "dim", d.blobs.dim, "dataset");
        read_opt(j, "per_class", d.blobs.per_class, "dataset");
        read_opt(j, "separation", d.blobs.separation, "dataset");
        read_opt(j, "sigma", d.blobs.sigma, "dataset");
        read_opt(j, "seed", d.blobs.seed, "dataset");
        d.blobs.test_fraction = d.test_fraction;
    } else if (type == "file") {
        d.kind = DatasetSpec::Kind::File;
        std::string path, train, test, format;
        read_opt(j, "path", path, "dataset");
        read_opt(j, "train_path", train, "dataset");
        read_opt(j, "test_path", test, "dataset");
        read_opt(j, "format", format, "dataset");
        read_opt(j, "split_seed", d.split_seed, "dataset");
        d.path = path;
        d.train_path = train;
        d.test_path = test;
        if (!format.empty()) d.format = parse_dataset_format(format);
        if (path.empty() == (train.empty() || test.empty()))
            throw ConfigError("dataset: give either 'path' or both 'train_path' and 'test_path'");
    } else {
        throw ConfigError("dataset.type must be 'blobs' or 'file'");
    }
    return d;
}

ArmSpec parse_arm(const json& j) {
    check_keys(j,
               {"name", "lambda_kda", "taps", "lambda_kda_before_fc", "lambda_kda_after_fc", "lambda_kd",
                "lambda_rkd", "kd_temperature", "landmarks", "centers_per_class", "random_count",
                "weight_by_w_t"},
               "arm");
    ArmSpec a;
    read_opt(j, "name", a.name, "arm");
    if (a.name.empty()) throw ConfigError("arm: missing name");
    const std::string where = "arm '" + a.name + "'";
    if (j.contains("lambda_kda")) {
        double lambda = 0.0;
        read_opt(j, "lambda_kda", lambda, where);
        std::vector<std::string> taps{"before_fc"};
        read_opt(j, "taps", taps, where);
        for (const auto& t : taps) {
            if (t == "before_fc")
                a.weights.lambda_kda_before_fc = lambda;
            else if (t == "after_fc")
                a.weights.lambda_kda_after_fc = lambda;
            else
                throw ConfigError(where + ": tap must be before_fc or after_fc");
        }
    }
    read_opt(j, "lambda_kda_before_fc", a.weights.lambda_kda_before_fc, where);
    read_opt(j, "lambda_kda_after_fc", a.weights.lambda_kda_after_fc, where);
    read_opt(j, "lambda_kd", a.weights.lambda_kd, where);
    read_opt(j, "lambda_rkd", a.weights.lambda_rkd, where);
    read_opt(j, "kd_temperature", a.weights.kd_temperature, where);
    std::string strategy = "class_centers";
    read_opt(j, "landmarks", strategy, where);
    try {
        a.setup.strategy = parse_landmark_strategy(strategy);
    } catch (const ArgumentError& e) {
        throw ConfigError(where + ": " + e.what());
    }
    read_opt(j, "centers_per_class", a.setup.centers_per_class, where);
    read_opt(j, "random_count", a.setup.random_count, where);
    read_opt(j, "weight_by_w_t", a.setup.weight_by_w_t, where);
    if (a.setup.centers_per_class > 1 && a.setup.strategy == LandmarkStrategy::ClassCenters)
        a.setup.strategy = LandmarkStrategy::KMeansPerClass;
    return a;
}

}  // namespace

void ExperimentSpec::validate() const {
    if (arms.empty()) throw ConfigError("experiment needs at least one arm");
    std::set<std::string> names;
    for (const ArmSpec& a : arms) {
        if (!names.insert(a.name).second) throw ConfigError("duplicate arm name '" + a.name + "'");
        if (a.name.find_first_of(",/\\ \n") != std::string::npos)
            throw ConfigError("arm name '" + a.name + "' must not contain separators or spaces");
        a.weights.validate();
    }
    if (seeds.empty()) throw ConfigError("experiment needs at least one seed");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
        throw ConfigError("seeds must be distinct");
    if (teacher_hidden.empty() || student_hidden.empty()) throw ConfigError("networks need hidden layers");
    if (teacher_epochs < 1) throw ConfigError("teacher epochs must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    train.validate();
}

ExperimentSpec parse_experiment_spec(const json& j) {
    check_keys(j, {"dataset", "teacher", "student", "train", "arms", "seeds", "output_dir", "workers", "timing",
                   "bounds"},
               "experiment");
    ExperimentSpec s;
    if (j.contains("dataset")) s.dataset = parse_dataset(j.at("dataset"));
    if (j.contains("teacher")) {
        const json& t = j.at("teacher");
        check_keys(t, {"hidden", "epochs"}, "teacher");
        read_opt(t, "hidden", s.teacher_hidden, "teacher");
        read_opt(t, "epochs", s.teacher_epochs, "teacher");
    }
    if (j.contains("student")) {
        const json& t = j.at("student");
        check_keys(t, {"hidden"}, "student");
        read_opt(t, "hidden", s.student_hidden, "student");
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, {"epochs", "warmup", "batch_size", "lr", "momentum", "weight_decay"}, "train");
        read_opt(t, "epochs", s.train.total_epochs, "train");
        read_opt(t, "warmup", s.train.warmup_epochs, "train");
        read_opt(t, "batch_size", s.train.batch_size, "train");
        read_opt(t, "lr", s.train.lr0, "train");
        read_opt(t, "momentum", s.train.momentum, "train");
        read_opt(t, "weight_decay", s.train.weight_decay, "train");
    }
    if (j.contains("arms")) {
        if (!j.at("arms").is_array()) throw ConfigError("arms must be a list");
        for (const json& a : j.at("arms")) s.arms.push_back(parse_arm(a));
    }
    read_opt(j, "seeds", s.seeds, "experiment");
    std::string out;
    read_opt(j, "output_dir", out, "experiment");
    if (!out.empty()) s.output_dir = out;
    read_opt(j, "workers", s.workers, "experiment");
    read_opt(j, "timing", s.record_runtime, "experiment");
    read_opt(j, "bounds", s.write_bounds, "experiment");
    s.validate();
    return s;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    return parse_experiment_spec(j);
}

DatasetSplit materialize_dataset(const DatasetSpec& spec) {
    if (spec.kind == DatasetSpec::Kind::Blobs) return generate_blobs(spec.blobs);
    auto fmt = [&](const std::filesystem::path& p) { return spec.format ? *spec.format : format_from_path(p); };
    if (!spec.path.empty()) {
        const LabeledDataset all = load_dataset(spec.path, fmt(spec.path));
        return stratified_split(all, spec.test_fraction, spec.split_seed);
    }
    DatasetSplit split{load_dataset(spec.train_path, fmt(spec.train_path)),
                       load_dataset(spec.test_path, fmt(spec.test_path))};
    if (split.train.dim() != split.test.dim()) throw FormatError("train/test feature dims differ");
    return split;
}

bool ExperimentResult::ok() const {
    return std::all_of(rows.begin(), rows.end(), [](const ResultRow& r) { return r.status == "ok"; });
}

int effective_workers(int requested) {
    int w = std::max(1, requested);
    if (const char* env = std::getenv("KDA_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap >= 1) w = std::min<int>(w, static_cast<int>(cap));
    }
    return w;
}

json mlp_to_json(const Mlp& net) {
    json layers = json::array();
    for (const Layer& l : net.layers) {
        layers.push_back({{"rows", l.weight.rows()},
                          {"cols", l.weight.cols()},
                          {"weight", std::vector<double>(l.weight.data().begin(), l.weight.data().end())},
                          {"bias", l.bias},
                          {"activation", l.activation == Activation::ReLU ? "relu" : "identity"}});
    }
    return json{{"layers", layers}};
}

Mlp mlp_from_json(const json& j) {
    Mlp net;
    try {
        for (const json& l : j.at("layers")) {
            Layer layer{Matrix(l.at("rows").get<std::size_t>(), l.at("cols").get<std::size_t>(),
                               l.at("weight").get<std::vector<double>>()),
                        l.at("bias").get<std::vector<double>>(),
                        l.at("activation").get<std::string>() == "relu" ? Activation::ReLU : Activation::Identity};
            net.layers.push_back(std::move(layer));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("network json: ") + e.what());
    }
    net.validate();
    return net;
}

TeacherRecord train_teacher_for_seed(const ExperimentSpec& spec, const DatasetSplit& data,
                                     std::uint64_t seed, Mlp* out_net) {
    TrainConfig cfg = spec.train;
    cfg.total_epochs = spec.teacher_epochs;
    cfg.seed = seed;
    TeacherRun run = train_teacher(cfg, data, spec.teacher_hidden);
    TeacherRecord rec{seed, run.train_accuracy, run.test_accuracy, parameter_hash(run.net)};
    if (out_net) *out_net = std::move(run.net);
    return rec;
}

namespace {

std::string csv_opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

std::vector<BoundReport> run_bounds(const Mlp& student, const Mlp& teacher, const LabeledDataset& train,
                                    const ArmSpec& arm, std::uint64_t seed) {
    const ForwardResult fs = forward(student, train.x);
    const ForwardResult ft = forward(teacher, train.x);
    const Matrix& xs = fs.taps.at(student.before_fc_tap()).features;
    const Matrix& xt = ft.taps.at(teacher.before_fc_tap()).features;
    const int L = train.num_classes();

    const LandmarkSet cs = class_centers(xs, train.y, L);
    const LandmarkSet ct = class_centers(xt, train.y, L);
    LandmarkSet ls = cs, lt = ct;
    if (arm.setup.strategy == LandmarkStrategy::Random && arm.weights.any_kda()) {
        const std::size_t m = arm.setup.random_count ? arm.setup.random_count : static_cast<std::size_t>(L);
        ls = random_landmarks(xs, m, seed);
        lt = landmarks_from_columns(xt, ls.source_columns);
    }

    std::vector<BoundReport> out;
    try {
        for (BoundReport& r : check_thm3_chain(xs, xt, ls, lt)) out.push_back(std::move(r));
    } catch (const PreconditionError& e) {
        out.push_back(BoundReport::not_applicable("thm3_chain", std::string("precondition-failed: ") + e.what()));
    }
    out.push_back(check_doubly_stochastic_M(gram(ls.points), gram(lt.points), ls.size()));
    out.push_back(check_thm5_decomposition(xs, xt, cs, ct, assign_by_class(cs, train.y)));
    return out;
}

double stddev(const std::vector<double>& v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

void run_pool(std::size_t jobs, int workers, const std::function<void(std::size_t)>& job) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs; i = next++) job(i);
    };
    if (workers <= 1 || jobs <= 1) {
        worker();
        return;
    }
    std::vector<std::thread> threads;
    for (int t = 0; t < std::min<int>(workers, static_cast<int>(jobs)); ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
}

}  // namespace

std::vector<ArmSummary> summarize(const std::vector<ResultRow>& rows) {
    std::vector<ArmSummary> out;
    std::vector<std::string> order;
    for (const ResultRow& r : rows)
        if (std::find(order.begin(), order.end(), r.arm) == order.end()) order.push_back(r.arm);
    for (const std::string& arm : order) {
        std::vector<double> acc, tb, ta;
        for (const ResultRow& r : rows)
            if (r.arm == arm && r.status == "ok") {
                acc.push_back(r.acc);
                tb.push_back(r.transfer_before);
                ta.push_back(r.transfer_after);
            }
        ArmSummary s;
        s.arm = arm;
        s.seeds = acc.size();
        if (acc.empty()) {
            out.push_back(s);
            continue;
        }
        auto mean = [](const std::vector<double>& v) {
            double t = 0.0;
            for (double x : v) t += x;
            return t / static_cast<double>(v.size());
        };
        s.acc_mean = mean(acc);
        s.transfer_before_mean = mean(tb);
        s.transfer_after_mean = mean(ta);
        if (acc.size() >= 2) {
            s.acc_std = stddev(acc, s.acc_mean);
            s.transfer_before_std = stddev(tb, s.transfer_before_mean);
            s.transfer_after_std = stddev(ta, s.transfer_after_mean);
        }
        out.push_back(s);
    }
    return out;
}

void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
    out << kResultsHeader << '\n';
    for (const ResultRow& r : rows) {
        out << r.arm << ',' << r.seed << ',' << format_double(r.acc) << ',' << format_double(r.transfer_before)
            << ',' << format_double(r.transfer_after) << ',' << csv_opt(r.partial_loss) << ','
            << csv_opt(r.min_eig_ws) << ',' << csv_opt(r.min_eig_wt) << ',' << format_double(r.runtime_s) << ','
            << sanitize(r.status) << '\n';
    }
}

void write_summary_csv(const std::vector<ArmSummary>& rows, std::ostream& out) {
    out << "arm,seeds,acc_mean,acc_std,transfer_before_mean,transfer_before_std,transfer_after_mean,"
           "transfer_after_std\n";
    for (const ArmSummary& s : rows) {
        out << s.arm << ',' << s.seeds << ',' << format_double(s.acc_mean) << ',' << csv_opt(s.acc_std) << ','
            << format_double(s.transfer_before_mean) << ',' << csv_opt(s.transfer_before_std) << ','
            << format_double(s.transfer_after_mean) << ',' << csv_opt(s.transfer_after_std) << '\n';
    }
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const DatasetSplit data = materialize_dataset(spec.dataset);
    if (data.test.size() == 0) throw ConfigError("dataset has no test examples");
    std::filesystem::create_directories(spec.output_dir);
    const int workers = effective_workers(spec.workers);

    ExperimentResult result;
    const std::size_t n_seeds = spec.seeds.size();
    std::vector<Mlp> teachers(n_seeds);
    result.teachers.resize(n_seeds);
    std::vector<std::string> teacher_errors(n_seeds);
    run_pool(n_seeds, workers, [&](std::size_t s) {
        try {
            result.teachers[s] = train_teacher_for_seed(spec, data, spec.seeds[s], &teachers[s]);
        } catch (const std::exception& e) {
            teacher_errors[s] = e.what();
        }
    });
    {
        std::ofstream out(spec.output_dir / "teachers.csv");
        out << "seed,train_acc,test_acc,param_hash,status\n";
        for (std::size_t s = 0; s < n_seeds; ++s) {
            const TeacherRecord& t = result.teachers[s];
            out << spec.seeds[s] << ',' << format_double(t.train_accuracy) << ',' << format_double(t.test_accuracy)
                << ',' << t.param_hash << ',' << (teacher_errors[s].empty() ? "ok" : sanitize(teacher_errors[s]))
                << '\n';
        }
    }

    const std::size_t n_arms = spec.arms.size();
    result.rows.resize(n_arms * n_seeds);
    std::vector<MetricLog> logs(n_arms * n_seeds);
    std::mutex io;

    run_pool(n_arms * n_seeds, workers, [&](std::size_t job) {
        const std::size_t a = job / n_seeds;
        const std::size_t s = job % n_seeds;
        const ArmSpec& arm = spec.arms[a];
        const std::uint64_t seed = spec.seeds[s];
        ResultRow& row = result.rows[job];
        row.arm = arm.name;
        row.seed = seed;
        const auto start = std::chrono::steady_clock::now();
        try {
            if (!teacher_errors[s].empty()) throw StateError("teacher failed: " + teacher_errors[s]);
            const Mlp& teacher = teachers[s];
            if (parameter_hash(teacher) != result.teachers[s].param_hash)
                throw StateError("teacher parameters changed before arm " + arm.name);

            TrainConfig cfg = spec.train;
            cfg.seed = seed;
            cfg.loss_weights = arm.weights;
            StudentRun run = train_student_kda(cfg, data, teacher, spec.student_hidden, arm.setup);
            if (parameter_hash(teacher) != result.teachers[s].param_hash)
                throw StateError("teacher parameters changed during arm " + arm.name);

            const EpochMetrics& last = run.log.records.back();
            row.acc = last.test_accuracy;
            row.transfer_before = last.transfer_loss_before_fc;
            row.transfer_after = last.transfer_loss_after_fc;
            if (arm.weights.any_kda()) {
                row.partial_loss = last.partial_loss;
                row.min_eig_ws = last.min_eig_ws;
                row.min_eig_wt = last.min_eig_wt;
            }
            const std::string stem = arm.name + "_" + std::to_string(seed);
            {
                std::ofstream out(spec.output_dir / ("metrics_" + stem + ".jsonl"));
                write_metric_log(run.log, out);
            }
            if (spec.write_bounds) {
                const auto reports = run_bounds(run.net, teacher, data.train, arm, seed);
                std::ofstream out(spec.output_dir / ("bounds_" + stem + ".txt"));
                write_bound_reports(reports, out);
            }
            logs[job] = std::move(run.log);
        } catch (const std::exception& e) {
            row.status = std::string("failed: ") + e.what();
            std::lock_guard lock(io);
            std::cerr << "arm " << arm.name << " seed " << seed << " failed: " << e.what() << '\n';
        }
        if (spec.record_runtime)
            row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });

    for (std::size_t job = 0; job < logs.size(); ++job)
        if (result.rows[job].status == "ok")
            result.logs.emplace(std::make_pair(result.rows[job].arm, result.rows[job].seed), std::move(logs[job]));
    result.summary = summarize(result.rows);
    {
        std::ofstream out(spec.output_dir / "results.csv");
        write_results_csv(result.rows, out);
    }
    {
        std::ofstream out(spec.output_dir / "summary.csv");
        write_summary_csv(result.summary, out);
    }
    return result;
}

}  // namespace kda
