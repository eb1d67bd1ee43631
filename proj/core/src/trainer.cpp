#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "plcont/classifier.hpp"
#include "plcont/error.hpp"

namespace plcont {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (patience_epochs == 0 || (max_epochs > 0 && patience_epochs > max_epochs))
        throw ConfigError("patience must lie in [1, max_epochs]");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
    if (!(adagrad_epsilon > 0.0)) throw ConfigError("AdaGrad epsilon must be positive");
    if (validation_k == 0) throw ConfigError("validation k must be positive");
}

AdagradNesterov::AdagradNesterov(const ClassifierModel& model, double learning_rate, double momentum, double epsilon)
    : learning_rate_(learning_rate), momentum_(momentum), epsilon_(epsilon) {
    auto add = [&](Eigen::Index n) {
        accumulators_.push_back(Eigen::VectorXd::Zero(n));
        velocities_.push_back(Eigen::VectorXd::Zero(n));
    };
    for (const auto& l : model.layers) {
        add(l.weights.size());
        add(l.bias.size());
    }
    for (const auto& n : model.norms) {
        add(n.gain.size());
        add(n.shift.size());
    }
}

void AdagradNesterov::step(ClassifierModel& model, const Gradient& gradient) {
    std::size_t slot = 0;
    for_each_parameter(model, gradient, [&](double* param, const double* grad, Eigen::Index n) {
        Eigen::Map<Eigen::VectorXd> theta(param, n);
        Eigen::Map<const Eigen::VectorXd> g(grad, n);
        Eigen::VectorXd& acc = accumulators_[slot];
        Eigen::VectorXd& v = velocities_[slot];
        acc.array() += g.array().square();
        const Eigen::VectorXd update = -learning_rate_ * (g.array() / (acc.array() + epsilon_).sqrt()).matrix();
        v = momentum_ * v + update;
        theta += momentum_ * v + update;
        ++slot;
    });
}

namespace {

struct TrainingData {
    Eigen::MatrixXd inputs;  // input_dim x n_songs, column s = training song s
    InteractionMatrix targets;
};

TrainingData prepare(const PlaylistCorpus& train_corpus, const FeatureMatrix& features) {
    if (train_corpus.n_playlists() == 0) throw ConfigError("no training playlists");
    return {gather_inputs(features, train_corpus.songs().ids()), build_interactions(train_corpus)};
}

void complete_architecture(Architecture& arch, const FeatureMatrix& features, std::size_t n_playlists) {
    if (arch.input_dim == 0) arch.input_dim = features.dim();
    if (arch.output_dim == 0) arch.output_dim = n_playlists;
    if (arch.input_dim != features.dim())
        throw ShapeError("architecture expects " + std::to_string(arch.input_dim) + " inputs, features have " +
                         std::to_string(features.dim()));
    if (arch.output_dim != n_playlists)
        throw ShapeError("architecture has " + std::to_string(arch.output_dim) + " outputs for " +
                         std::to_string(n_playlists) + " playlists");
    arch.validate();
}

ClassifierModel fresh_model(const Architecture& arch, const PlaylistCorpus& train_corpus, const FeatureMatrix& features,
                            std::uint64_t seed) {
    ClassifierModel model = init_model(arch, seed);
    for (const auto& p : train_corpus.playlists()) model.playlist_ids.push_back(p.id);
    model.feature_manifest = features.manifest();
    return model;
}

// One pass over shuffled training songs; returns the summed minibatch loss.
double run_epoch(ClassifierModel& model, AdagradNesterov& optimizer, const TrainingData& data,
                 const TrainConfig& config, std::mt19937_64& rng) {
    const auto n_songs = static_cast<std::size_t>(data.inputs.cols());
    std::vector<std::size_t> order(n_songs);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    const PassOptions options = PassOptions::for_mode(Mode::train);
    const auto n_playlists = static_cast<Eigen::Index>(data.targets.n_rows());
    Gradient gradient;
    double total = 0.0;
    for (std::size_t start = 0; start < n_songs; start += config.batch_size) {
        const std::size_t len = std::min(config.batch_size, n_songs - start);
        // A trailing single-song batch has no batch variance; skip it.
        if (len < 2 && start > 0) break;
        Eigen::MatrixXd inputs(data.inputs.rows(), static_cast<Eigen::Index>(len));
        Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(n_playlists, static_cast<Eigen::Index>(len));
        for (std::size_t j = 0; j < len; ++j) {
            const std::size_t song = order[start + j];
            inputs.col(static_cast<Eigen::Index>(j)) = data.inputs.col(static_cast<Eigen::Index>(song));
            for (const Cell& cell : data.targets.col(song)) targets(cell.index, static_cast<Eigen::Index>(j)) = 1.0;
        }
        total += loss_and_gradient(model, inputs, targets, options, &rng, gradient);
        optimizer.step(model, gradient);
    }
    if (!std::isfinite(total)) throw NumericalError("training loss became non-finite");
    return total;
}

double validation_recall(const ClassifierModel& model, const FeatureMatrix& features, const EvaluationSet& set,
                         std::size_t k) {
    const RowMatrix scores = predict_scores(model, features, set.candidates().ids());
    const std::size_t ks[] = {k};
    return evaluate(scores, set, ks).recall(k);
}

std::mt19937_64 training_stream(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
    return std::mt19937_64(seq);
}

}  // namespace

TrainResult train(const SplitCorpus& split, const FeatureMatrix& features, Architecture arch, const TrainConfig& config) {
    config.validate();
    const bool has_validation =
        std::any_of(split.validation.begin(), split.validation.end(), [](const auto& v) { return !v.empty(); });
    if (!has_validation) throw ConfigError("training needs validation songs for model selection");

    complete_architecture(arch, features, split.train.n_playlists());
    const TrainingData data = prepare(split.train, features);
    const EvaluationSet validation(split, Withheld::validation);

    TrainResult result;
    ClassifierModel model = fresh_model(arch, split.train, features, config.seed);
    result.model = model;
    AdagradNesterov optimizer(model, config.learning_rate, config.momentum, config.adagrad_epsilon);
    auto rng = training_stream(config.seed);

    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t last_improvement = 0;
    bool have_checkpoint = false;
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const double loss = run_epoch(model, optimizer, data, config, rng);
        const double recall = validation_recall(model, features, validation, config.validation_k);
        result.log.push_back({epoch, loss, recall});

        if (!have_checkpoint || recall > result.best_recall) {
            result.model = model;
            result.best_epoch = epoch;
            result.best_recall = recall;
            have_checkpoint = true;
        }
        if (loss < best_loss * (1.0 - config.min_relative_improvement)) {
            best_loss = loss;
            last_improvement = epoch;
        }
        if (epoch - last_improvement >= config.patience_epochs) {
            result.early_stopped = true;
            break;
        }
    }
    return result;
}

TrainResult fit_epochs(const PlaylistCorpus& train_corpus, const FeatureMatrix& features, Architecture arch,
                       const TrainConfig& config, std::size_t epochs) {
    TrainConfig cfg = config;
    cfg.max_epochs = std::max(cfg.max_epochs, epochs);
    cfg.validate();
    complete_architecture(arch, features, train_corpus.n_playlists());
    const TrainingData data = prepare(train_corpus, features);

    TrainResult result;
    ClassifierModel model = fresh_model(arch, train_corpus, features, config.seed);
    AdagradNesterov optimizer(model, config.learning_rate, config.momentum, config.adagrad_epsilon);
    auto rng = training_stream(config.seed);
    for (std::size_t epoch = 1; epoch <= epochs; ++epoch)
        result.log.push_back({epoch, run_epoch(model, optimizer, data, config, rng), 0.0});
    result.model = std::move(model);
    result.best_epoch = epochs;
    return result;
}

GridResult grid_search(const SplitCorpus& split, const FeatureMatrix& features, std::span<const std::size_t> layers,
                       std::span<const std::size_t> units, const Architecture& base, const TrainConfig& config) {
    if (layers.empty() || units.empty()) throw ConfigError("empty architecture grid");
    GridResult grid;
    for (std::size_t l : layers) {
        for (std::size_t u : units) {
            Architecture arch = base;
            arch.hidden_layers = l;
            arch.hidden_units = u;
            TrainResult result = train(split, features, arch, config);
            arch = result.model.architecture;
            grid.cells.push_back({arch, std::move(result)});
        }
    }
    for (std::size_t i = 1; i < grid.cells.size(); ++i)
        if (grid.cells[i].result.best_recall > grid.cells[grid.selected].result.best_recall) grid.selected = i;

    const GridCell& chosen = grid.cells[grid.selected];
    grid.final_epochs = chosen.result.best_epoch;
    const SplitCorpus merged = merge_validation(split);
    grid.final_model = fit_epochs(merged.train, features, chosen.architecture, config, grid.final_epochs).model;
    return grid;
}

}  // namespace plcont
