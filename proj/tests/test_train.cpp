#include <cmath>
#include <random>
#include <sstream>

#include <doctest.h>

#include "kda/dataset.hpp"
#include "kda/errors.hpp"
#include "kda/losses.hpp"
#include "kda/mlp.hpp"
#include "kda/train.hpp"
#include "oracles.hpp"

using namespace kda;

namespace {

DatasetSplit small_blobs(std::uint64_t seed = 1) {
    BlobParams p;
    p.classes = 3;
    p.dim = 5;
    p.per_class = 30;
    p.separation = 5.0;
    p.seed = seed;
    return generate_blobs(p);
}

TrainConfig small_config() {
    TrainConfig c;
    c.total_epochs = 8;
    c.warmup_epochs = 3;
    c.batch_size = 16;
    c.lr0 = 0.05;
    c.seed = 4;
    return c;
}

const std::vector<std::size_t> kTeacherHidden{24, 24};
const std::vector<std::size_t> kStudentHidden{8, 8};

const Mlp& small_teacher() {
    static const Mlp net = [] {
        TrainConfig c = small_config();
        c.total_epochs = 10;
        return train_teacher(c, small_blobs(), kTeacherHidden).net;
    }();
    return net;
}

}  // namespace

TEST_SUITE("mlp") {

TEST_CASE("forward examples") {
    Mlp id;
    id.layers.push_back({Matrix::identity(3), {0, 0, 0}, Activation::Identity});
    std::mt19937_64 rng(1);
    const Matrix x = oracle::random_matrix(3, 4, rng);
    CHECK(forward(id, x).logits == x);

    Mlp relu;
    relu.layers.push_back({Matrix::identity(2), {0, 0}, Activation::ReLU});
    relu.layers.push_back({Matrix::identity(2), {0, 0}, Activation::Identity});
    const ForwardResult f = forward(relu, Matrix(2, 3, -1.0));
    CHECK(max_abs(f.taps.at(relu.before_fc_tap()).features) == 0.0);

    const Mlp net = make_mlp(5, std::vector<std::size_t>{7, 6}, 3, 9);
    const Matrix in = oracle::random_matrix(5, 10, rng);
    CHECK(forward(net, in).logits == forward(net, in).logits);
    CHECK(forward(net, in).taps.size() == 2);
    CHECK_THROWS_AS(forward(net, Matrix(4, 2, 1.0)), DimensionError);
}

TEST_CASE("make_mlp shapes and determinism") {
    const Mlp a = make_mlp(4, std::vector<std::size_t>{6, 5}, 2, 3);
    CHECK(a.layers.size() == 3);
    CHECK(a.input_dim() == 4);
    CHECK(a.output_dim() == 2);
    CHECK(a.layers.back().activation == Activation::Identity);
    CHECK(a == make_mlp(4, std::vector<std::size_t>{6, 5}, 2, 3));
    CHECK(parameter_hash(a) != parameter_hash(make_mlp(4, std::vector<std::size_t>{6, 5}, 2, 4)));
    CHECK_THROWS_AS(make_mlp(4, std::vector<std::size_t>{}, 2, 3), ArgumentError);
}

TEST_CASE("backprop matches finite differences on parameters") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 10; ++t) {
        Mlp net = make_mlp(4, std::vector<std::size_t>{6, 5}, 3, static_cast<std::uint64_t>(t));
        // zero biases put units fed by dead rows exactly on the ReLU kink
        std::uniform_real_distribution<double> jitter(0.1, 0.5);
        for (Layer& layer : net.layers)
            for (double& b : layer.bias) b = jitter(rng);
        const Matrix x = oracle::random_matrix(4, 7, rng);
        const std::vector<int> y{0, 1, 2, 0, 1, 2, 1};
        const Matrix tap = oracle::random_matrix(5, 7, rng);
        // L = CE(logits) + <tap, hidden>
        auto loss = [&](const Mlp& m) {
            const ForwardCache c = forward_cached(m, x);
            double inner = 0.0;
            for (std::size_t k = 0; k < tap.size(); ++k) inner += tap.data()[k] * c.outputs[1].data()[k];
            return cross_entropy_loss(c.outputs.back(), y).value + inner;
        };
        const ForwardCache cache = forward_cached(net, x);
        const MlpGrads g = backprop(net, cache, cross_entropy_loss(cache.outputs.back(), y).grad, {{1, tap}});
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            const Matrix num = oracle::numeric_grad(
                [&](const Matrix& w) {
                    Mlp m = net;
                    m.layers[l].weight = w;
                    return loss(m);
                },
                net.layers[l].weight);
            CHECK(oracle::grad_error(g.weight[l], num) < 1e-5);
            const Matrix b(net.layers[l].bias.size(), 1, net.layers[l].bias);
            const Matrix numb = oracle::numeric_grad(
                [&](const Matrix& bv) {
                    Mlp m = net;
                    m.layers[l].bias.assign(bv.data().begin(), bv.data().end());
                    return loss(m);
                },
                b);
            CHECK(oracle::grad_error(Matrix(g.bias[l].size(), 1, g.bias[l]), numb) < 1e-5);
        }
    }
}

TEST_CASE("sgd update examples") {
    Mlp net;
    net.layers.push_back({Matrix(1, 1, 2.0), {0.0}, Activation::Identity});
    MlpGrads zero{{Matrix(1, 1, 0.0)}, {{0.0}}};
    SgdState st;
    sgd_update(net, zero, st, {0.1, 0.9, 0.0});
    CHECK(net.layers[0].weight(0, 0) == 2.0);

    MlpGrads one{{Matrix(1, 1, 1.0)}, {{0.0}}};
    SgdState fresh;
    sgd_update(net, one, fresh, {0.1, 0.0, 0.0});
    CHECK(net.layers[0].weight(0, 0) == doctest::Approx(1.9));

    // momentum accumulates: v = 0.5 * 1 + 1
    sgd_update(net, one, fresh, {0.1, 0.5, 0.0});
    CHECK(net.layers[0].weight(0, 0) == doctest::Approx(1.9 - 0.15));
}

TEST_CASE("loss decreases on a separable toy problem") {
    const Matrix x = Matrix::from_rows({{-2, -1.5, -1, 1, 1.5, 2}, {0.3, -0.2, 0.1, 0.2, -0.1, 0.4}});
    const std::vector<int> y{0, 0, 0, 1, 1, 1};
    Mlp net = make_mlp(2, std::vector<std::size_t>{4}, 2, 1);
    SgdState st;
    const double first = cross_entropy_loss(forward(net, x).logits, y).value;
    for (int step = 0; step < 100; ++step) {
        const ForwardCache c = forward_cached(net, x);
        sgd_update(net, backprop(net, c, cross_entropy_loss(c.outputs.back(), y).grad), st, {0.1, 0.9, 0.0});
    }
    const double last = cross_entropy_loss(forward(net, x).logits, y).value;
    CHECK(last < first);
    CHECK(last < 0.1);
}

}  // TEST_SUITE

TEST_SUITE("train") {

TEST_CASE("cosine schedule") {
    CHECK(cosine_lr(0, 60, 0.1) == doctest::Approx(0.1));
    CHECK(cosine_lr(60, 60, 0.1) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(cosine_lr(30, 60, 0.1) == doctest::Approx(0.05));
    CHECK_THROWS_AS(cosine_lr(61, 60, 0.1), ArgumentError);
}

TEST_CASE("config validation") {
    TrainConfig c = small_config();
    CHECK_NOTHROW(c.validate());
    c.warmup_epochs = c.total_epochs;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_NOTHROW(c.validate_optimizer());
    c = small_config();
    c.warmup_epochs = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.momentum = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.lr0 = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = small_config();
    c.warmup_epochs = 20;
    c.loss_weights.lambda_kda_before_fc = 1.0;
    CHECK_THROWS_AS(train_student_kda(c, small_blobs(), small_teacher(), kStudentHidden, {}), ConfigError);
}

TEST_CASE("teacher training is accurate and deterministic") {
    TrainConfig c = small_config();
    c.total_epochs = 10;
    const DatasetSplit data = small_blobs();
    const TeacherRun a = train_teacher(c, data, kTeacherHidden);
    CHECK(a.test_accuracy > 0.9);
    CHECK(a.net == small_teacher());
    // warm-up length does not matter for a teacher
    c.warmup_epochs = 50;
    CHECK(train_teacher(c, data, kTeacherHidden).net == a.net);
}

TEST_CASE("backward_step requires landmarks when KDA is active") {
    Mlp net = make_mlp(5, kStudentHidden, 3, 1);
    const DatasetSplit data = small_blobs();
    const Matrix th(24, data.train.size(), 1.0), tl(3, data.train.size(), 1.0);
    LossWeights w;
    w.lambda_kda_before_fc = 1.0;
    SgdState st;
    const StepInput in{data.train.x, data.train.y, &th, &tl, nullptr, nullptr, true};
    CHECK_THROWS_AS(backward_step(net, in, w, {0.1, 0.9, 0.0}, st), StateError);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
    Mlp net = make_mlp(5, kStudentHidden, 3, 1);
    DatasetSplit data = small_blobs();
    Matrix x = data.train.x;
    x(0, 0) = INFINITY;
    SgdState st;
    const StepInput in{x, data.train.y};
    CHECK_THROWS_AS(backward_step(net, in, {}, {0.1, 0.9, 0.0}, st), NumericError);
}

TEST_CASE("zero lambda reproduces the baseline student exactly") {
    const DatasetSplit data = small_blobs();
    const TrainConfig c = small_config();
    const StudentRun run = train_student_kda(c, data, small_teacher(), kStudentHidden, {});
    CHECK(run.net == train_baseline_student(c, data, kStudentHidden));
    CHECK(run.log.records.size() == static_cast<std::size_t>(c.total_epochs));
}

TEST_CASE("warm-up epochs apply no KDA gradient") {
    const DatasetSplit data = small_blobs();
    TrainConfig c = small_config();
    c.loss_weights.lambda_kda_before_fc = 1.0;
    c.loss_weights.lambda_kda_after_fc = 0.5;
    std::vector<std::pair<int, StepLosses>> steps;
    TrainObserver obs;
    obs.on_step = [&](int epoch, const StepLosses& l) { steps.emplace_back(epoch, l); };
    const StudentRun run = train_student_kda(c, data, small_teacher(), kStudentHidden, {}, &obs);
    bool later_nonzero = false;
    for (const auto& [epoch, l] : steps) {
        if (epoch <= c.warmup_epochs) {
            CHECK(l.kda_before_fc == 0.0);
            CHECK(l.kda_after_fc == 0.0);
        } else if (l.kda_before_fc > 0.0) {
            later_nonzero = true;
        }
    }
    CHECK(later_nonzero);

    // the first H epochs are therefore identical to a zero-weight run
    TrainConfig warm = c;
    warm.total_epochs = c.warmup_epochs + 1;
    TrainConfig plain = warm;
    plain.loss_weights = {};
    const auto a = train_student_kda(warm, data, small_teacher(), kStudentHidden, {});
    const auto b = train_student_kda(plain, data, small_teacher(), kStudentHidden, {});
    for (int e = 0; e < c.warmup_epochs; ++e) {
        CHECK(a.log.records[e].test_accuracy == b.log.records[e].test_accuracy);
        CHECK(a.log.records[e].transfer_loss_before_fc == b.log.records[e].transfer_loss_before_fc);
    }
    CHECK(run.log.records.size() == static_cast<std::size_t>(c.total_epochs));
}

TEST_CASE("landmarks use only features captured in the previous epoch") {
    const DatasetSplit data = small_blobs();
    TrainConfig c = small_config();
    c.loss_weights.lambda_kda_before_fc = 1.0;
    int probes = 0;
    TrainObserver obs;
    obs.on_landmarks = [&](const LandmarkProbe& p) {
        ++probes;
        for (int e : p.capture_epoch) CHECK(e == p.epoch);
        REQUIRE(p.before_fc != nullptr);
        CHECK(p.before_fc->student.cols() == 3);
        CHECK(p.after_fc == nullptr);
    };
    train_student_kda(c, data, small_teacher(), kStudentHidden, {}, &obs);
    CHECK(probes == c.total_epochs);
}

TEST_CASE("student training leaves the teacher untouched and is deterministic") {
    const DatasetSplit data = small_blobs();
    TrainConfig c = small_config();
    c.loss_weights.lambda_kda_before_fc = 0.1;
    c.loss_weights.lambda_kd = 0.1;
    c.loss_weights.lambda_rkd = 0.01;
    const Mlp teacher = small_teacher();
    const std::uint64_t before = parameter_hash(teacher);
    for (LandmarkStrategy s : {LandmarkStrategy::ClassCenters, LandmarkStrategy::KMeansPerClass,
                               LandmarkStrategy::Random}) {
        DistillSetup setup;
        setup.strategy = s;
        setup.centers_per_class = s == LandmarkStrategy::KMeansPerClass ? 2 : 1;
        const StudentRun a = train_student_kda(c, data, teacher, kStudentHidden, setup);
        const StudentRun b = train_student_kda(c, data, teacher, kStudentHidden, setup);
        CHECK(a.log == b.log);
        CHECK(a.net == b.net);
        CHECK(parameter_hash(teacher) == before);
        for (const EpochMetrics& m : a.log.records) {
            CHECK(std::isfinite(m.loss_total));
            CHECK(m.transfer_loss_before_fc >= 0.0);
        }
        REQUIRE(a.final_before_fc.has_value());
        const std::size_t m = s == LandmarkStrategy::KMeansPerClass ? 6 : 3;
        CHECK(a.final_before_fc->student.cols() == m);
        CHECK(a.final_before_fc->teacher.cols() == m);
    }
}

TEST_CASE("weighted residuals and the one-hot logit tap") {
    const DatasetSplit data = small_blobs();
    TrainConfig c = small_config();
    c.loss_weights.lambda_kda_after_fc = 0.1;
    DistillSetup setup;
    setup.weight_by_w_t = true;
    const StudentRun w = train_student_kda(c, data, small_teacher(), kStudentHidden, setup);
    CHECK(w.log.records.back().loss_kda_after_fc > 0.0);
    setup = {};
    setup.strategy = LandmarkStrategy::OneHot;
    const StudentRun o = train_student_kda(c, data, small_teacher(), kStudentHidden, setup);
    CHECK(o.log.records.back().loss_kda_after_fc > 0.0);
    c.loss_weights.lambda_kda_before_fc = 0.1;
    CHECK_THROWS(train_student_kda(c, data, small_teacher(), kStudentHidden, setup));
}

TEST_CASE("metric log round-trips through JSON lines") {
    MetricLog log;
    for (int e = 1; e <= 3; ++e) {
        EpochMetrics m;
        m.epoch = e;
        m.loss_ce = 0.1 * e + 1e-17;
        m.test_accuracy = 1.0 / 3.0;
        m.transfer_loss_before_fc = std::nextafter(0.5, 1.0);
        m.min_eig_ws = -1e-300;
        m.partial_loss = 123456789.123456789;
        log.records.push_back(m);
    }
    std::stringstream ss;
    write_metric_log(log, ss);
    CHECK(read_metric_log(ss) == log);

    std::stringstream bad("{\"epoch\":2}\n{\"epoch\":1}\n");
    CHECK_THROWS_AS(read_metric_log(bad), FormatError);
    std::stringstream garbage("{not json\n");
    CHECK_THROWS_AS(read_metric_log(garbage), FormatError);
}

}  // TEST_SUITE
