#include "kda/train.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include <json.hpp>

#include "kda/errors.hpp"
#include "kda/gram.hpp"

namespace kda {

void TrainConfig::validate_optimizer() const {
    if (total_epochs < 1) throw ConfigError("total_epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr0 > 0.0)) throw ConfigError("lr0 must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    loss_weights.validate();
}

void TrainConfig::validate() const {
    validate_optimizer();
    if (warmup_epochs < 1 || warmup_epochs >= total_epochs)
        throw ConfigError("warm-up epochs H=" + std::to_string(warmup_epochs) +
                          " must satisfy 1 <= H < T=" + std::to_string(total_epochs));
}

double cosine_lr(int epoch, int total_epochs, double lr0) {
    if (total_epochs < 1 || epoch < 0 || epoch > total_epochs)
        throw ArgumentError("cosine_lr: epoch outside [0, T]");
    return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / total_epochs));
}

namespace {

// Independent random streams per purpose so that, e.g., drawing random
// landmarks never perturbs the batch order.
std::uint64_t stream(std::uint64_t seed, std::uint64_t purpose) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (purpose + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum Stream : std::uint64_t { kTeacherInit = 1, kStudentInit = 2, kShuffle = 3, kLandmarks = 4 };

Matrix gather_columns(const Matrix& x, std::span<const std::size_t> idx) {
    Matrix out(x.rows(), idx.size());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto src = x.row(r);
        auto dst = out.row(r);
        for (std::size_t j = 0; j < idx.size(); ++j) dst[j] = src[idx[j]];
    }
    return out;
}

void scatter_columns(Matrix& dst, const Matrix& src, std::span<const std::size_t> idx) {
    for (std::size_t r = 0; r < src.rows(); ++r) {
        const auto s = src.row(r);
        auto d = dst.row(r);
        for (std::size_t j = 0; j < idx.size(); ++j) d[idx[j]] = s[j];
    }
}

std::size_t argmax_col(const Matrix& m, std::size_t i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < m.rows(); ++c)
        if (m(c, i) > m(best, i)) best = c;
    return best;
}

void add_scaled(Matrix& into, double s, const Matrix& g) {
    auto a = into.data();
    auto b = g.data();
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += s * b[k];
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what);
}

}  // namespace

StepResult backward_step(Mlp& net, const StepInput& in, const LossWeights& w,
                         const SgdParams& params, SgdState& state) {
    if (net.layers.size() < 2) throw ArgumentError("backward_step: network needs a hidden layer");
    ForwardCache cache = forward_cached(net, in.x);
    const std::size_t hidden_tap = net.before_fc_tap();
    const Matrix& hidden = cache.outputs[hidden_tap];
    const Matrix& logits = cache.outputs.back();

    StepResult out;
    LossValueGrad ce = cross_entropy_loss(logits, in.y);
    out.losses.ce = ce.value;
    out.losses.total = ce.value;
    Matrix dlogits = std::move(ce.grad);
    Matrix dhidden;

    auto kda_term = [&](const LandmarkPair* pair, const Matrix& student, const Matrix* teacher,
                        const char* which) {
        if (pair == nullptr) throw StateError(std::string("KDA ") + which + " active without landmarks");
        if (teacher == nullptr) throw StateError(std::string("KDA ") + which + " needs teacher features");
        return pair->weighting.empty()
                   ? kda_loss(student, *teacher, pair->student, pair->teacher)
                   : kda_loss_weighted(student, *teacher, pair->student, pair->teacher, pair->weighting);
    };
    auto add_hidden = [&](double lambda, const Matrix& g) {
        if (dhidden.empty()) dhidden = Matrix(g.rows(), g.cols());
        add_scaled(dhidden, lambda, g);
    };

    if (in.kda_active && w.lambda_kda_before_fc > 0.0) {
        LossValueGrad l = kda_term(in.before_fc, hidden, in.teacher_hidden, "before-FC");
        out.losses.kda_before_fc = l.value;
        out.losses.total += w.lambda_kda_before_fc * l.value;
        add_hidden(w.lambda_kda_before_fc, l.grad);
    }
    if (in.kda_active && w.lambda_kda_after_fc > 0.0) {
        LossValueGrad l = kda_term(in.after_fc, logits, in.teacher_logits, "after-FC");
        out.losses.kda_after_fc = l.value;
        out.losses.total += w.lambda_kda_after_fc * l.value;
        add_scaled(dlogits, w.lambda_kda_after_fc, l.grad);
    }
    if (w.lambda_kd > 0.0) {
        if (in.teacher_logits == nullptr) throw StateError("KD loss needs teacher logits");
        LossValueGrad l = kd_loss(logits, *in.teacher_logits, w.kd_temperature);
        out.losses.kd = l.value;
        out.losses.total += w.lambda_kd * l.value;
        add_scaled(dlogits, w.lambda_kd, l.grad);
    }
    if (w.lambda_rkd > 0.0) {
        if (in.teacher_hidden == nullptr) throw StateError("RKD loss needs teacher features");
        LossValueGrad l = rkd_batch_loss(hidden, *in.teacher_hidden);
        out.losses.rkd = l.value;
        out.losses.total += w.lambda_rkd * l.value;
        add_hidden(w.lambda_rkd, l.grad);
    }
    require_finite(out.losses.total, "training loss");

    std::map<std::size_t, Matrix> taps;
    if (!dhidden.empty()) taps.emplace(hidden_tap, std::move(dhidden));
    const MlpGrads grads = backprop(net, cache, dlogits, taps);
    out.hidden = cache.outputs[hidden_tap];
    out.logits = std::move(cache.outputs.back());
    sgd_update(net, grads, state, params);
    return out;
}

double accuracy(const Mlp& net, const LabeledDataset& data) {
    if (data.size() == 0) return 0.0;
    const ForwardResult f = forward(net, data.x);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (argmax_col(f.logits, i) == static_cast<std::size_t>(data.y[i])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

LandmarkPair compute_landmark_pair(const DistillSetup& setup, const Matrix& student,
                                   const Matrix& teacher, std::span<const int> labels,
                                   int num_classes, std::span<const std::size_t> random_columns,
                                   std::uint64_t seed) {
    LandmarkPair pair;
    switch (setup.strategy) {
        case LandmarkStrategy::ClassCenters:
            pair.student = class_centers(student, labels, num_classes).points;
            pair.teacher = class_centers(teacher, labels, num_classes).points;
            break;
        case LandmarkStrategy::KMeansPerClass: {
            // cluster in teacher space, student landmarks follow the same membership
            KMeansResult km = kmeans_per_class_detailed(teacher, labels, setup.centers_per_class, seed);
            pair.student = centers_from_assignment(student, km.assignment, km.landmarks.size());
            pair.teacher = std::move(km.landmarks.points);
            break;
        }
        case LandmarkStrategy::Random:
            pair.student = landmarks_from_columns(student, random_columns).points;
            pair.teacher = landmarks_from_columns(teacher, random_columns).points;
            break;
        case LandmarkStrategy::OneHot: {
            const auto L = static_cast<std::size_t>(num_classes);
            if (student.rows() != L || teacher.rows() != L)
                throw DimensionError("one-hot landmarks need features of dimension L (logits)");
            pair.student = onehot_landmarks(L).points;
            pair.teacher = pair.student;
            break;
        }
    }
    if (setup.weight_by_w_t) pair.weighting = pinv_sqrt(gram(pair.teacher));
    return pair;
}

namespace {

struct LoopOptions {
    const Mlp* teacher = nullptr;
    const DistillSetup* setup = nullptr;
    const TrainObserver* observer = nullptr;
    MetricLog* log = nullptr;
    std::optional<LandmarkPair>* final_before_fc = nullptr;
};

EpochMetrics evaluate_epoch(const Mlp& student, const DatasetSplit& data, const Matrix& t_hidden,
                            const Matrix& t_logits, int num_classes) {
    EpochMetrics m;
    const ForwardResult f = forward(student, data.train.x);
    const Matrix& s_hidden = f.taps.at(student.before_fc_tap()).features;
    m.transfer_loss_before_fc = relative_transfer_loss_features(s_hidden, t_hidden);
    m.transfer_loss_after_fc = relative_transfer_loss_features(f.logits, t_logits);

    const Matrix d_s = class_centers(s_hidden, data.train.y, num_classes).points;
    const Matrix d_t = class_centers(t_hidden, data.train.y, num_classes).points;
    m.partial_loss = frobenius_norm(partial_gram(s_hidden, d_s) - partial_gram(t_hidden, d_t)) /
                     gram_norm(t_hidden);
    m.min_eig_ws = sym_eig(gram(d_s)).values.back();
    m.min_eig_wt = sym_eig(gram(d_t)).values.back();

    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.train.size(); ++i)
        if (argmax_col(f.logits, i) == static_cast<std::size_t>(data.train.y[i])) ++hits;
    m.train_accuracy = static_cast<double>(hits) / static_cast<double>(data.train.size());
    m.test_accuracy = accuracy(student, data.test);
    return m;
}

void run_loop(const TrainConfig& cfg, const DatasetSplit& data, Mlp& net, const LoopOptions& opt) {
    const LabeledDataset& train = data.train;
    const std::size_t n = train.size();
    const int L = train.num_classes();
    const LossWeights& w = cfg.loss_weights;
    const bool distill = opt.teacher != nullptr;

    Matrix t_hidden, t_logits;
    if (distill) {
        // the teacher is frozen: extract its features once
        const ForwardResult tf = forward(*opt.teacher, train.x);
        t_hidden = tf.taps.at(opt.teacher->before_fc_tap()).features;
        t_logits = tf.logits;
    }
    const bool want_before = distill && w.lambda_kda_before_fc > 0.0;
    const bool want_after = distill && w.lambda_kda_after_fc > 0.0;

    std::vector<std::size_t> random_cols;
    if ((want_before || want_after) && opt.setup->strategy == LandmarkStrategy::Random) {
        const std::size_t m = opt.setup->random_count ? opt.setup->random_count : static_cast<std::size_t>(L);
        random_cols = random_landmarks(train.x, m, stream(cfg.seed, kLandmarks)).source_columns;
    }

    Matrix acc_hidden(net.layers[net.before_fc_tap()].weight.rows(), n);
    Matrix acc_logits(net.output_dim(), n);
    std::vector<int> capture_epoch(n, 0);
    std::optional<LandmarkPair> lm_before, lm_after;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(stream(cfg.seed, kShuffle));
    SgdState state;

    for (int epoch = 1; epoch <= cfg.total_epochs; ++epoch) {
        const SgdParams params{cosine_lr(epoch - 1, cfg.total_epochs, cfg.lr0), cfg.momentum,
                               cfg.weight_decay};
        for (std::size_t i = n; i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(order[i - 1], order[pick(shuffle_rng)]);
        }
        const bool kda_active = distill && epoch > cfg.warmup_epochs;

        StepLosses sum;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, stop - start);
            const Matrix xb = gather_columns(train.x, idx);
            std::vector<int> yb(idx.size());
            for (std::size_t j = 0; j < idx.size(); ++j) yb[j] = train.y[idx[j]];
            Matrix tb_hidden, tb_logits;
            if (distill) {
                tb_hidden = gather_columns(t_hidden, idx);
                tb_logits = gather_columns(t_logits, idx);
            }
            const StepInput in{xb,
                               yb,
                               distill ? &tb_hidden : nullptr,
                               distill ? &tb_logits : nullptr,
                               lm_before ? &*lm_before : nullptr,
                               lm_after ? &*lm_after : nullptr,
                               kda_active};
            StepResult r;
            try {
                r = backward_step(net, in, distill ? w : LossWeights{}, params, state);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                   ", batch starting " + std::to_string(start));
            }
            scatter_columns(acc_hidden, r.hidden, idx);
            scatter_columns(acc_logits, r.logits, idx);
            for (std::size_t i : idx) capture_epoch[i] = epoch;

            const double bw = static_cast<double>(idx.size());
            sum.ce += bw * r.losses.ce;
            sum.kda_before_fc += bw * r.losses.kda_before_fc;
            sum.kda_after_fc += bw * r.losses.kda_after_fc;
            sum.kd += bw * r.losses.kd;
            sum.rkd += bw * r.losses.rkd;
            sum.total += bw * r.losses.total;
            if (opt.observer && opt.observer->on_step) opt.observer->on_step(epoch, r.losses);
        }

        // landmarks for the next epoch from this epoch's accumulated features
        const std::uint64_t lm_seed = stream(cfg.seed, kLandmarks) + static_cast<std::uint64_t>(epoch);
        if (want_before)
            lm_before = compute_landmark_pair(*opt.setup, acc_hidden, t_hidden, train.y, L, random_cols, lm_seed);
        if (want_after)
            lm_after = compute_landmark_pair(*opt.setup, acc_logits, t_logits, train.y, L, random_cols, lm_seed);
        if (opt.observer && opt.observer->on_landmarks)
            opt.observer->on_landmarks(LandmarkProbe{epoch, capture_epoch, lm_before ? &*lm_before : nullptr,
                                                     lm_after ? &*lm_after : nullptr});

        if (opt.log != nullptr && distill) {
            EpochMetrics m = evaluate_epoch(net, data, t_hidden, t_logits, L);
            const double inv = 1.0 / static_cast<double>(n);
            m.epoch = epoch;
            m.loss_ce = sum.ce * inv;
            m.loss_kda_before_fc = sum.kda_before_fc * inv;
            m.loss_kda_after_fc = sum.kda_after_fc * inv;
            m.loss_kd = sum.kd * inv;
            m.loss_rkd = sum.rkd * inv;
            m.loss_total = sum.total * inv;
            opt.log->records.push_back(m);
        }
    }
    if (opt.final_before_fc != nullptr) *opt.final_before_fc = lm_before;
}

}  // namespace

TeacherRun train_teacher(const TrainConfig& config, const DatasetSplit& data,
                         std::span<const std::size_t> hidden) {
    config.validate_optimizer();
    data.train.validate();
    TeacherRun run;
    run.net = make_mlp(data.train.dim(), hidden, static_cast<std::size_t>(data.train.num_classes()),
                       stream(config.seed, kTeacherInit));
    run_loop(config, data, run.net, {});
    run.train_accuracy = accuracy(run.net, data.train);
    run.test_accuracy = accuracy(run.net, data.test);
    return run;
}

Mlp train_baseline_student(const TrainConfig& config, const DatasetSplit& data,
                           std::span<const std::size_t> hidden) {
    config.validate_optimizer();
    data.train.validate();
    Mlp net = make_mlp(data.train.dim(), hidden, static_cast<std::size_t>(data.train.num_classes()),
                       stream(config.seed, kStudentInit));
    run_loop(config, data, net, {});
    return net;
}

StudentRun train_student_kda(const TrainConfig& config, const DatasetSplit& data, const Mlp& teacher,
                             std::span<const std::size_t> hidden, const DistillSetup& setup,
                             const TrainObserver* observer) {
    config.validate();
    data.train.validate();
    teacher.validate();
    if (teacher.input_dim() != data.train.dim())
        throw DimensionError("teacher input dim does not match dataset");
    if (teacher.output_dim() != static_cast<std::size_t>(data.train.num_classes()))
        throw DimensionError("teacher output dim does not match class count");
    StudentRun run;
    run.net = make_mlp(data.train.dim(), hidden, static_cast<std::size_t>(data.train.num_classes()),
                       stream(config.seed, kStudentInit));
    LoopOptions opt{&teacher, &setup, observer, &run.log, &run.final_before_fc};
    run_loop(config, data, run.net, opt);
    return run;
}

namespace {

nlohmann::json to_json(const EpochMetrics& m) {
    return nlohmann::json{{"epoch", m.epoch},
                          {"loss_ce", m.loss_ce},
                          {"loss_kda_before_fc", m.loss_kda_before_fc},
                          {"loss_kda_after_fc", m.loss_kda_after_fc},
                          {"loss_kd", m.loss_kd},
                          {"loss_rkd", m.loss_rkd},
                          {"loss_total", m.loss_total},
                          {"train_accuracy", m.train_accuracy},
                          {"test_accuracy", m.test_accuracy},
                          {"transfer_loss_before_fc", m.transfer_loss_before_fc},
                          {"transfer_loss_after_fc", m.transfer_loss_after_fc},
                          {"partial_loss", m.partial_loss},
                          {"min_eig_ws", m.min_eig_ws},
                          {"min_eig_wt", m.min_eig_wt}};
}

}  // namespace

void write_metric_log(const MetricLog& log, std::ostream& out) {
    for (const EpochMetrics& m : log.records) out << to_json(m).dump() << '\n';
}

MetricLog read_metric_log(std::istream& in) {
    MetricLog log;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            EpochMetrics m;
            m.epoch = j.at("epoch").get<int>();
            m.loss_ce = j.at("loss_ce").get<double>();
            m.loss_kda_before_fc = j.at("loss_kda_before_fc").get<double>();
            m.loss_kda_after_fc = j.at("loss_kda_after_fc").get<double>();
            m.loss_kd = j.at("loss_kd").get<double>();
            m.loss_rkd = j.at("loss_rkd").get<double>();
            m.loss_total = j.at("loss_total").get<double>();
            m.train_accuracy = j.at("train_accuracy").get<double>();
            m.test_accuracy = j.at("test_accuracy").get<double>();
            m.transfer_loss_before_fc = j.at("transfer_loss_before_fc").get<double>();
            m.transfer_loss_after_fc = j.at("transfer_loss_after_fc").get<double>();
            m.partial_loss = j.at("partial_loss").get<double>();
            m.min_eig_ws = j.at("min_eig_ws").get<double>();
            m.min_eig_wt = j.at("min_eig_wt").get<double>();
            if (!log.records.empty() && m.epoch <= log.records.back().epoch)
                throw FormatError("epochs not increasing");
            log.records.push_back(m);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("metrics line " + std::to_string(row) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError("metrics line " + std::to_string(row) + ": " + e.what());
        }
    }
    return log;
}

}  // namespace kda
