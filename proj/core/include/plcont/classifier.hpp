#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "plcont/corpus.hpp"
#include "plcont/evaluator.hpp"
#include "plcont/features.hpp"
#include "plcont/interactions.hpp"

namespace plcont {

/// Song-to-playlist network: input dropout, then `hidden_layers` blocks of
/// dense -> batch norm -> tanh -> dropout, then a dense layer with a logistic
/// output per playlist.
struct Architecture {
    std::size_t input_dim = 0;
    std::size_t hidden_layers = 2;
    std::size_t hidden_units = 100;
    std::size_t output_dim = 0;
    double dropout_input = 0.1;
    double dropout_hidden = 0.5;
    bool batch_norm = true;

    /// Throws ConfigError on zero dimensions or dropout outside [0, 1).
    void validate() const;
    std::string describe() const;
};

struct DenseLayer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd bias;
};

struct BatchNormState {
    Eigen::VectorXd gain;
    Eigen::VectorXd shift;
    Eigen::VectorXd running_mean;
    Eigen::VectorXd running_var;
};

inline constexpr double batch_norm_epsilon = 1e-4;
inline constexpr double batch_norm_momentum = 0.1;
inline constexpr double probability_clip = 1e-7;

struct ClassifierModel {
    Architecture architecture;
    std::vector<DenseLayer> layers;      // hidden_layers + 1
    std::vector<BatchNormState> norms;   // one per hidden layer when batch_norm
    std::vector<std::string> playlist_ids;  // output unit labels
    std::string feature_manifest;        // preprocessing identity of the training features
};

/// Weights uniform in +-1/sqrt(fan_in), zero biases, unit gains, running
/// statistics at (0, 1).
ClassifierModel init_model(const Architecture& architecture, std::uint64_t seed);

enum class Mode { train, inference };

/// Finer control than Mode: train = batch statistics + dropout,
/// inference = running statistics, no dropout.
struct PassOptions {
    bool batch_statistics = false;
    bool dropout = false;
    bool update_running_stats = false;

    static PassOptions for_mode(Mode mode) {
        return mode == Mode::train ? PassOptions{true, true, true} : PassOptions{};
    }
};

/// Intermediate values kept for backpropagation.
struct ForwardCache {
    Eigen::MatrixXd input;                 // after input dropout
    std::vector<Eigen::MatrixXd> normalized;  // z-hat per hidden layer
    std::vector<Eigen::VectorXd> inv_std;
    std::vector<Eigen::MatrixXd> activation;  // tanh output
    std::vector<Eigen::MatrixXd> mask;        // dropout multipliers (empty when off)
    std::vector<Eigen::MatrixXd> hidden;      // after dropout
    Eigen::MatrixXd probabilities;
};

/// Probabilities (output_dim x batch) for the columns of `inputs`
/// (input_dim x batch). `rng` is required when dropout is on.
Eigen::MatrixXd forward_batch(ClassifierModel& model, const Eigen::MatrixXd& inputs, const PassOptions& options,
                              std::mt19937_64* rng = nullptr, ForwardCache* cache = nullptr);
Eigen::MatrixXd forward_batch(const ClassifierModel& model, const Eigen::MatrixXd& inputs);

/// Single song. Throws ShapeError on a dimension mismatch and ValidationError
/// on non-finite input.
Eigen::VectorXd forward(const ClassifierModel& model, std::span<const double> x, Mode mode = Mode::inference,
                        std::mt19937_64* rng = nullptr);

/// Summed binary cross-entropy over the batch x playlist grid with
/// probabilities clipped to [1e-7, 1 - 1e-7].
double bce_loss(const Eigen::MatrixXd& probabilities, const Eigen::MatrixXd& targets);

/// Inference-mode loss of a batch of (features, targets).
double bce_loss(const ClassifierModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);

/// Gradient with the same layout as the model's parameters.
struct Gradient {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> bias;
    std::vector<Eigen::VectorXd> gain;
    std::vector<Eigen::VectorXd> shift;
};

/// Loss and its gradient for one batch. The gradient of each logit is
/// (probability - target), i.e. the clipping only guards the reported loss.
double loss_and_gradient(ClassifierModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                         const PassOptions& options, std::mt19937_64* rng, Gradient& gradient);

/// Calls fn(parameter, gradient) over matching Eigen blocks (both as
/// contiguous arrays) in a fixed order.
template <typename Fn>
void for_each_parameter(ClassifierModel& model, const Gradient& gradient, Fn&& fn) {
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        fn(model.layers[l].weights.data(), gradient.weights[l].data(), model.layers[l].weights.size());
        fn(model.layers[l].bias.data(), gradient.bias[l].data(), model.layers[l].bias.size());
    }
    for (std::size_t l = 0; l < model.norms.size(); ++l) {
        fn(model.norms[l].gain.data(), gradient.gain[l].data(), model.norms[l].gain.size());
        fn(model.norms[l].shift.data(), gradient.shift[l].data(), model.norms[l].shift.size());
    }
}

/// Inference-mode probabilities for the given songs: column j belongs to
/// songs[j]. Works for songs never seen in training as long as they have
/// features. Throws ValidationError when the features' manifest differs from
/// the one the model was trained on.
RowMatrix predict_scores(const ClassifierModel& model, const FeatureMatrix& features, std::span<const SongId> songs);

/// Features of `songs` as the columns of an input matrix.
Eigen::MatrixXd gather_inputs(const FeatureMatrix& features, std::span<const SongId> songs);

nlohmann::json to_json(const ClassifierModel& model);
ClassifierModel classifier_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    double learning_rate = 0.5;
    std::size_t batch_size = 50;
    std::size_t max_epochs = 1000;
    std::size_t patience_epochs = 100;
    double momentum = 0.9;  // Nesterov
    double adagrad_epsilon = 1e-8;
    double min_relative_improvement = 1e-4;
    std::size_t validation_k = 100;
    std::uint64_t seed = 0;

    void validate() const;
};

/// AdaGrad step sizes combined with Nesterov momentum:
///   acc += g^2;  step = -lr g / sqrt(acc + eps);  v = mu v + step;  theta += mu v + step
class AdagradNesterov {
public:
    AdagradNesterov(const ClassifierModel& model, double learning_rate, double momentum, double epsilon);
    void step(ClassifierModel& model, const Gradient& gradient);

private:
    double learning_rate_;
    double momentum_;
    double epsilon_;
    std::vector<Eigen::VectorXd> accumulators_;
    std::vector<Eigen::VectorXd> velocities_;
};

struct EpochRecord {
    std::size_t epoch = 0;        // 1-based
    double train_loss = 0.0;      // summed over the epoch's minibatches, train mode
    double validation_recall = 0.0;
};

struct TrainResult {
    ClassifierModel model;           // checkpoint with the best validation recall
    std::vector<EpochRecord> log;
    std::size_t best_epoch = 0;      // 0 when no epoch ran
    double best_recall = 0.0;
    bool early_stopped = false;
};

/// Minibatch training on the split's training playlists; validation recall@k
/// after every epoch selects the returned checkpoint. Architecture input and
/// output sizes are taken from the data when zero. Throws ConfigError when the
/// split has no validation songs.
TrainResult train(const SplitCorpus& split, const FeatureMatrix& features, Architecture architecture,
                  const TrainConfig& config);

/// Fresh initialization trained for exactly `epochs` epochs on every
/// playlist of `train_corpus` (no validation, no early stopping).
TrainResult fit_epochs(const PlaylistCorpus& train_corpus, const FeatureMatrix& features, Architecture architecture,
                       const TrainConfig& config, std::size_t epochs);

struct GridCell {
    Architecture architecture;
    TrainResult result;
};

struct GridResult {
    std::vector<GridCell> cells;
    std::size_t selected = 0;
    std::size_t final_epochs = 0;
    ClassifierModel final_model;
};

/// Trains one network per (layers, units) pair, picks the highest validation
/// recall (first wins ties), then refits that architecture from scratch on
/// train + validation for its best epoch count.
GridResult grid_search(const SplitCorpus& split, const FeatureMatrix& features, std::span<const std::size_t> layers,
                       std::span<const std::size_t> units, const Architecture& base, const TrainConfig& config);

}  // namespace plcont
