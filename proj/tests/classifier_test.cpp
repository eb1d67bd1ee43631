#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "plcont/classifier.hpp"
#include "plcont/error.hpp"

using namespace plcont;

namespace {

Architecture small_arch(std::size_t in, std::size_t out, std::size_t layers = 2, std::size_t units = 6) {
    Architecture a;
    a.input_dim = in;
    a.output_dim = out;
    a.hidden_layers = layers;
    a.hidden_units = units;
    return a;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
}

// Random running statistics and affine batch-norm parameters so the frozen path is non-trivial.
void perturb_norms(ClassifierModel& model, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    std::normal_distribution<double> g(0.0, 0.3);
    for (auto& n : model.norms) {
        for (Eigen::Index i = 0; i < n.gain.size(); ++i) {
            n.gain(i) = u(rng);
            n.shift(i) = g(rng);
            n.running_mean(i) = g(rng);
            n.running_var(i) = u(rng);
        }
    }
    for (auto& l : model.layers)
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = g(rng);
}

struct GradCheck {
    double worst_relative = 0.0;
    std::size_t checked = 0;
};

GradCheck finite_difference_check(ClassifierModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                  const PassOptions& options) {
    Gradient analytic;
    loss_and_gradient(model, x, y, options, nullptr, analytic);
    auto loss_at = [&] {
        Gradient scratch;
        return loss_and_gradient(model, x, y, options, nullptr, scratch);
    };
    GradCheck out;
    const double h = 1e-5;
    for_each_parameter(model, analytic, [&](double* param, const double* grad, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double saved = param[i];
            param[i] = saved + h;
            const double up = loss_at();
            param[i] = saved - h;
            const double down = loss_at();
            param[i] = saved;
            const double numeric = (up - down) / (2 * h);
            const double scale = std::max({std::abs(numeric), std::abs(grad[i]), 1e-8});
            out.worst_relative = std::max(out.worst_relative, std::abs(numeric - grad[i]) / scale);
            ++out.checked;
        }
    });
    return out;
}

}  // namespace

TEST(Classifier, InitializationBounds) {
    const ClassifierModel m = init_model(small_arch(5, 4, 3, 7), 1);
    ASSERT_EQ(m.layers.size(), 4u);
    ASSERT_EQ(m.norms.size(), 3u);
    for (const auto& l : m.layers) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.weights.cols()));
        EXPECT_LE(l.weights.cwiseAbs().maxCoeff(), bound);
        EXPECT_EQ(l.bias.cwiseAbs().maxCoeff(), 0.0);
    }
    EXPECT_EQ(m.layers.back().weights.rows(), 4);
    EXPECT_EQ(m.layers.front().weights.cols(), 5);
}

TEST(Classifier, ArchitectureValidation) {
    Architecture a = small_arch(0, 3);
    EXPECT_THROW(a.validate(), ConfigError);
    a = small_arch(3, 3);
    a.dropout_hidden = 1.0;
    EXPECT_THROW(a.validate(), ConfigError);
}

TEST(Classifier, ZeroFinalLayerGivesOneHalf) {
    ClassifierModel m = init_model(small_arch(3, 5), 2);
    m.layers.back().weights.setZero();
    m.layers.back().bias.setZero();
    const std::vector<double> x = {0.3, -1.0, 2.0};
    const Eigen::VectorXd p = forward(m, x);
    for (Eigen::Index i = 0; i < p.size(); ++i) EXPECT_EQ(p(i), 0.5);
}

TEST(Classifier, OutputsInsideClipInterval) {
    ClassifierModel m = init_model(small_arch(4, 6, 3, 10), 3);
    for (auto& l : m.layers) l.weights *= 50.0;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> mag(-8, 8);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> x(4);
        for (double& v : x) v = std::copysign(std::pow(10.0, mag(rng)), mag(rng));
        const Eigen::VectorXd p = forward(m, x);
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            EXPECT_GE(p(i), probability_clip);
            EXPECT_LE(p(i), 1.0 - probability_clip);
        }
    }
}

TEST(Classifier, InferenceIsDeterministic) {
    const ClassifierModel m = init_model(small_arch(3, 4), 5);
    const std::vector<double> x = {1.0, 2.0, -0.5};
    EXPECT_EQ(forward(m, x), forward(m, x));
}

TEST(Classifier, RejectsBadInput) {
    const ClassifierModel m = init_model(small_arch(3, 4), 5);
    const std::vector<double> short_x = {1.0, 2.0};
    EXPECT_THROW(forward(m, short_x), ShapeError);
    const std::vector<double> nan_x = {1.0, std::numeric_limits<double>::quiet_NaN(), 0.0};
    EXPECT_THROW(forward(m, nan_x), ValidationError);
}

TEST(BceLoss, AnalyticValues) {
    Eigen::MatrixXd p(1, 1), y(1, 1);
    p << 0.5;
    y << 1.0;
    EXPECT_NEAR(bce_loss(p, y), 0.6931471805599453, 1e-12);

    Eigen::MatrixXd boundary(2, 1), target(2, 1);
    boundary << 1.0, 0.0;  // clipped to 1 - 1e-7 and 1e-7
    target << 1.0, 0.0;
    const double loss = bce_loss(boundary, target);
    EXPECT_LT(loss, 2 * 2e-6);
    EXPECT_NEAR(loss, -2.0 * std::log1p(-1e-7), 1e-15);

    const Eigen::MatrixXd half = Eigen::MatrixXd::Constant(2, 3, 0.5);
    EXPECT_NEAR(bce_loss(half, Eigen::MatrixXd::Zero(2, 3)), 6.0 * std::log(2.0), 1e-12);
}

TEST(Gradient, MatchesFiniteDifferencesWithFrozenStatistics) {
    ClassifierModel m = init_model(small_arch(5, 4, 2, 6), 11);
    perturb_norms(m, 12);
    const Eigen::MatrixXd x = random_matrix(5, 3, 13);
    Eigen::MatrixXd y(4, 3);
    y << 1, 0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 1;
    const GradCheck r = finite_difference_check(m, x, y, PassOptions{});
    EXPECT_GT(r.checked, 0u);
    EXPECT_LT(r.worst_relative, 1e-4);
}

TEST(Gradient, MatchesFiniteDifferencesWithBatchStatistics) {
    ClassifierModel m = init_model(small_arch(5, 4, 3, 6), 21);
    perturb_norms(m, 22);
    const Eigen::MatrixXd x = random_matrix(5, 6, 23);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(4, 6);
    y(0, 0) = y(1, 2) = y(3, 5) = y(2, 1) = 1.0;
    PassOptions options;
    options.batch_statistics = true;
    const GradCheck r = finite_difference_check(m, x, y, options);
    EXPECT_LT(r.worst_relative, 1e-4);
}

TEST(Gradient, PlainDescentDecreasesLoss) {
    ClassifierModel m = init_model(small_arch(4, 3, 2, 8), 31);
    const Eigen::MatrixXd x = random_matrix(4, 5, 32);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(3, 5);
    y(0, 0) = y(1, 1) = y(2, 2) = y(0, 3) = y(1, 4) = 1.0;
    PassOptions options;
    options.batch_statistics = true;
    double previous = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 50; ++step) {
        Gradient g;
        const double loss = loss_and_gradient(m, x, y, options, nullptr, g);
        EXPECT_LT(loss, previous) << "step " << step;
        previous = loss;
        for_each_parameter(m, g, [](double* p, const double* d, Eigen::Index n) {
            for (Eigen::Index i = 0; i < n; ++i) p[i] -= 0.01 * d[i];
        });
    }
}

TEST(BatchNorm, RunningStatisticsOfTheBatchReproduceTrainMode) {
    ClassifierModel m = init_model(small_arch(4, 3, 2, 5), 41);
    const Eigen::MatrixXd x = random_matrix(4, 8, 42);
    PassOptions update;
    update.batch_statistics = true;
    update.update_running_stats = true;
    // The same batch every pass: running statistics converge geometrically to its own statistics.
    for (int i = 0; i < 400; ++i) forward_batch(m, x, update);
    PassOptions batch_mode;
    batch_mode.batch_statistics = true;
    const Eigen::MatrixXd train_mode = forward_batch(m, x, batch_mode);
    const Eigen::MatrixXd inference = forward_batch(static_cast<const ClassifierModel&>(m), x);
    EXPECT_LT((train_mode - inference).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Dropout, TrainModeSamplesMasks) {
    ClassifierModel m = init_model(small_arch(4, 3, 2, 20), 51);
    const Eigen::MatrixXd x = random_matrix(4, 6, 52);
    std::mt19937_64 rng(1);
    const PassOptions train = PassOptions::for_mode(Mode::train);
    ClassifierModel copy = m;
    const Eigen::MatrixXd a = forward_batch(m, x, train, &rng);
    const Eigen::MatrixXd b = forward_batch(copy, x, train, &rng);
    EXPECT_GT((a - b).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Predict, ScoresOutOfSetSongsAndChecksManifest) {
    ClassifierModel m = init_model(small_arch(2, 3), 61);
    FeatureMatrix f("f", 2);
    f.add_row("seen", std::vector<double>{0.1, 0.2});
    f.add_row("unseen", std::vector<double>{-1.0, 3.0});
    m.feature_manifest = f.manifest();
    const std::vector<SongId> songs = {"seen", "unseen"};
    const RowMatrix s = predict_scores(m, f, songs);
    ASSERT_EQ(s.rows(), 3);
    ASSERT_EQ(s.cols(), 2);
    EXPECT_GT(s.minCoeff(), 0.0);
    EXPECT_LT(s.maxCoeff(), 1.0);
    EXPECT_EQ(predict_scores(m, f, songs), s);

    FeatureMatrix other = f;
    other.add_step("l1");
    EXPECT_THROW(predict_scores(m, other, songs), ValidationError);
}

TEST(Serialization, JsonRoundTripPreservesPredictions) {
    ClassifierModel m = init_model(small_arch(3, 4, 3, 5), 71);
    perturb_norms(m, 72);
    m.playlist_ids = {"a", "b", "c", "d"};
    m.feature_manifest = "f[3]|standardize-l2";
    const ClassifierModel back = classifier_from_json(nlohmann::json::parse(to_json(m).dump()));
    EXPECT_EQ(back.playlist_ids, m.playlist_ids);
    EXPECT_EQ(back.feature_manifest, m.feature_manifest);
    const Eigen::MatrixXd x = random_matrix(3, 4, 73);
    EXPECT_EQ(forward_batch(back, x), forward_batch(m, x));

    nlohmann::json broken = to_json(m);
    broken["batch_norm"][0]["running_var"][0] = -1.0;
    EXPECT_THROW(classifier_from_json(broken), Error);
}
