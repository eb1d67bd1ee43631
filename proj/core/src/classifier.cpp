#include "plcont/classifier.hpp"

#include <cmath>
#include <sstream>

#include "plcont/error.hpp"

namespace plcont {

void Architecture::validate() const {
    if (input_dim == 0 || output_dim == 0) throw ConfigError("network input and output sizes must be positive");
    if (hidden_layers == 0 || hidden_units == 0) throw ConfigError("network needs at least one hidden unit and layer");
    if (dropout_input < 0.0 || dropout_input >= 1.0 || dropout_hidden < 0.0 || dropout_hidden >= 1.0)
        throw ConfigError("dropout probabilities must lie in [0, 1)");
}

std::string Architecture::describe() const {
    std::ostringstream out;
    out << "mlp(in=" << input_dim << ", layers=" << hidden_layers << ", units=" << hidden_units
        << ", out=" << output_dim << ", dropout=" << dropout_input << "/" << dropout_hidden
        << ", batch_norm=" << (batch_norm ? "on" : "off") << ")";
    return out.str();
}

ClassifierModel init_model(const Architecture& architecture, std::uint64_t seed) {
    architecture.validate();
    ClassifierModel model;
    model.architecture = architecture;
    std::mt19937_64 rng(seed);

    auto dense = [&](std::size_t in, std::size_t out) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> u(-bound, bound);
        DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
        for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = u(rng);
        return layer;
    };

    std::size_t in = architecture.input_dim;
    for (std::size_t l = 0; l < architecture.hidden_layers; ++l) {
        model.layers.push_back(dense(in, architecture.hidden_units));
        if (architecture.batch_norm) {
            const auto n = static_cast<Eigen::Index>(architecture.hidden_units);
            model.norms.push_back({Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n),
                                   Eigen::VectorXd::Ones(n)});
        }
        in = architecture.hidden_units;
    }
    model.layers.push_back(dense(in, architecture.output_dim));
    return model;
}

namespace {

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution keep(1.0 - p);
    const double scale = 1.0 / (1.0 - p);
    Eigen::MatrixXd mask(rows, cols);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : 0.0;
    return mask;
}

double clip(double p) { return std::min(std::max(p, probability_clip), 1.0 - probability_clip); }

}  // namespace

Eigen::MatrixXd forward_batch(ClassifierModel& model, const Eigen::MatrixXd& inputs, const PassOptions& options,
                              std::mt19937_64* rng, ForwardCache* cache) {
    const Architecture& arch = model.architecture;
    if (static_cast<std::size_t>(inputs.rows()) != arch.input_dim)
        throw ShapeError("input has " + std::to_string(inputs.rows()) + " features, network expects " +
                         std::to_string(arch.input_dim));
    if (options.dropout && !rng) throw ConfigError("dropout requires a random generator");
    const Eigen::Index batch = inputs.cols();

    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c = ForwardCache{};

    c.input = inputs;
    if (options.dropout && arch.dropout_input > 0.0) {
        c.mask.push_back(dropout_mask(inputs.rows(), batch, arch.dropout_input, *rng));
        c.input.array() *= c.mask.back().array();
    } else {
        c.mask.emplace_back();
    }

    const Eigen::MatrixXd* h = &c.input;
    for (std::size_t l = 0; l < arch.hidden_layers; ++l) {
        const DenseLayer& layer = model.layers[l];
        Eigen::MatrixXd z = layer.weights * *h;
        z.colwise() += layer.bias;
        if (arch.batch_norm) {
            BatchNormState& bn = model.norms[l];
            Eigen::VectorXd mean, var;
            if (options.batch_statistics) {
                mean = z.rowwise().mean();
                var = (z.colwise() - mean).array().square().rowwise().mean();
                if (options.update_running_stats) {
                    bn.running_mean = (1.0 - batch_norm_momentum) * bn.running_mean + batch_norm_momentum * mean;
                    bn.running_var = (1.0 - batch_norm_momentum) * bn.running_var + batch_norm_momentum * var;
                }
            } else {
                mean = bn.running_mean;
                var = bn.running_var;
            }
            Eigen::VectorXd inv_std = (var.array() + batch_norm_epsilon).rsqrt();
            Eigen::MatrixXd normalized = (z.colwise() - mean).array().colwise() * inv_std.array();
            z = (normalized.array().colwise() * bn.gain.array()).colwise() + bn.shift.array();
            c.normalized.push_back(std::move(normalized));
            c.inv_std.push_back(std::move(inv_std));
        }
        c.activation.push_back(z.array().tanh().matrix());
        Eigen::MatrixXd out = c.activation.back();
        if (options.dropout && arch.dropout_hidden > 0.0) {
            c.mask.push_back(dropout_mask(out.rows(), batch, arch.dropout_hidden, *rng));
            out.array() *= c.mask.back().array();
        } else {
            c.mask.emplace_back();
        }
        c.hidden.push_back(std::move(out));
        h = &c.hidden.back();
    }

    const DenseLayer& last = model.layers.back();
    Eigen::MatrixXd logits = last.weights * *h;
    logits.colwise() += last.bias;
    c.probabilities = logits.unaryExpr([](double x) { return clip(1.0 / (1.0 + std::exp(-x))); });
    return c.probabilities;
}

Eigen::MatrixXd forward_batch(const ClassifierModel& model, const Eigen::MatrixXd& inputs) {
    // Inference never touches the running statistics.
    return forward_batch(const_cast<ClassifierModel&>(model), inputs, PassOptions{});
}

Eigen::VectorXd forward(const ClassifierModel& model, std::span<const double> x, Mode mode, std::mt19937_64* rng) {
    if (x.size() != model.architecture.input_dim)
        throw ShapeError("input has " + std::to_string(x.size()) + " features, network expects " +
                         std::to_string(model.architecture.input_dim));
    Eigen::MatrixXd input(static_cast<Eigen::Index>(x.size()), 1);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) throw ValidationError("non-finite input feature");
        input(static_cast<Eigen::Index>(i), 0) = x[i];
    }
    if (mode == Mode::inference) return forward_batch(model, input).col(0);
    ClassifierModel scratch = model;
    PassOptions options = PassOptions::for_mode(mode);
    options.update_running_stats = false;
    return forward_batch(scratch, input, options, rng).col(0);
}

double bce_loss(const Eigen::MatrixXd& probabilities, const Eigen::MatrixXd& targets) {
    if (probabilities.rows() != targets.rows() || probabilities.cols() != targets.cols())
        throw ShapeError("probability and target shapes differ");
    if (probabilities.size() == 0) throw ValidationError("empty batch");
    double loss = 0.0;
    for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
        const double p = clip(probabilities.data()[i]);
        const double y = targets.data()[i];
        loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return loss;
}

double bce_loss(const ClassifierModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
    return bce_loss(forward_batch(model, inputs), targets);
}

double loss_and_gradient(ClassifierModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                         const PassOptions& options, std::mt19937_64* rng, Gradient& gradient) {
    ForwardCache cache;
    forward_batch(model, inputs, options, rng, &cache);
    const double loss = bce_loss(cache.probabilities, targets);
    const Architecture& arch = model.architecture;
    const std::size_t n_layers = model.layers.size();
    const auto batch = static_cast<double>(inputs.cols());

    gradient.weights.resize(n_layers);
    gradient.bias.resize(n_layers);
    gradient.gain.resize(model.norms.size());
    gradient.shift.resize(model.norms.size());

    Eigen::MatrixXd delta = cache.probabilities - targets;  // d loss / d logits
    for (std::size_t l = n_layers; l-- > 0;) {
        const Eigen::MatrixXd& below = l == 0 ? cache.input : cache.hidden[l - 1];
        gradient.weights[l] = delta * below.transpose();
        gradient.bias[l] = delta.rowwise().sum();
        if (l == 0) break;

        const std::size_t h = l - 1;  // hidden block feeding layer l
        Eigen::MatrixXd grad = model.layers[l].weights.transpose() * delta;
        if (cache.mask[h + 1].size() > 0) grad.array() *= cache.mask[h + 1].array();
        grad.array() *= 1.0 - cache.activation[h].array().square();
        if (arch.batch_norm) {
            const Eigen::MatrixXd& zhat = cache.normalized[h];
            gradient.gain[h] = (grad.array() * zhat.array()).rowwise().sum();
            gradient.shift[h] = grad.rowwise().sum();
            Eigen::MatrixXd dzhat = grad.array().colwise() * model.norms[h].gain.array();
            if (options.batch_statistics) {
                const Eigen::VectorXd mean_d = dzhat.rowwise().sum() / batch;
                const Eigen::VectorXd mean_dz = (dzhat.array() * zhat.array()).rowwise().sum() / batch;
                Eigen::MatrixXd centered = dzhat.colwise() - mean_d;
                centered.array() -= zhat.array().colwise() * mean_dz.array();
                grad = centered.array().colwise() * cache.inv_std[h].array();
            } else {
                grad = dzhat.array().colwise() * cache.inv_std[h].array();
            }
        }
        delta = std::move(grad);
    }
    return loss;
}

Eigen::MatrixXd gather_inputs(const FeatureMatrix& features, std::span<const SongId> songs) {
    Eigen::MatrixXd inputs(static_cast<Eigen::Index>(features.dim()), static_cast<Eigen::Index>(songs.size()));
    for (std::size_t j = 0; j < songs.size(); ++j) {
        const auto i = features.ids().find(songs[j]);
        if (!i) throw MissingFeatureError("no '" + features.kind() + "' features for song '" + songs[j] + "'");
        const auto row = features.row(*i);
        for (std::size_t d = 0; d < row.size(); ++d) {
            if (!std::isfinite(row[d])) throw ValidationError("non-finite feature for song '" + songs[j] + "'");
            inputs(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(j)) = row[d];
        }
    }
    return inputs;
}

RowMatrix predict_scores(const ClassifierModel& model, const FeatureMatrix& features, std::span<const SongId> songs) {
    if (!model.feature_manifest.empty() && model.feature_manifest != features.manifest())
        throw ValidationError("candidate features '" + features.manifest() + "' differ from training features '" +
                              model.feature_manifest + "'");
    if (features.dim() != model.architecture.input_dim)
        throw ShapeError("candidate features have " + std::to_string(features.dim()) + " dimensions, network expects " +
                         std::to_string(model.architecture.input_dim));

    RowMatrix scores(static_cast<Eigen::Index>(model.architecture.output_dim), static_cast<Eigen::Index>(songs.size()));
    constexpr std::size_t chunk = 512;
    for (std::size_t start = 0; start < songs.size(); start += chunk) {
        const std::size_t len = std::min(chunk, songs.size() - start);
        const Eigen::MatrixXd inputs = gather_inputs(features, songs.subspan(start, len));
        scores.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)) =
            forward_batch(model, inputs);
    }
    return scores;
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw FormatError("matrix size mismatch in model file");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
    return m;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const nlohmann::json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

}  // namespace

nlohmann::json to_json(const ClassifierModel& model) {
    const Architecture& a = model.architecture;
    nlohmann::json doc;
    doc["format"] = "plcont-mlp";
    doc["architecture"] = {{"input_dim", a.input_dim},         {"hidden_layers", a.hidden_layers},
                           {"hidden_units", a.hidden_units},   {"output_dim", a.output_dim},
                           {"dropout_input", a.dropout_input}, {"dropout_hidden", a.dropout_hidden},
                           {"batch_norm", a.batch_norm},       {"activation", "tanh"}};
    doc["feature_manifest"] = model.feature_manifest;
    doc["playlist_ids"] = model.playlist_ids;
    auto& layers = doc["layers"] = nlohmann::json::array();
    for (const auto& l : model.layers) layers.push_back({{"weights", matrix_json(l.weights)}, {"bias", vector_json(l.bias)}});
    auto& norms = doc["batch_norm"] = nlohmann::json::array();
    for (const auto& n : model.norms)
        norms.push_back({{"gain", vector_json(n.gain)},
                         {"shift", vector_json(n.shift)},
                         {"running_mean", vector_json(n.running_mean)},
                         {"running_var", vector_json(n.running_var)}});
    return doc;
}

ClassifierModel classifier_from_json(const nlohmann::json& doc) {
    ClassifierModel model;
    try {
        if (doc.value("format", "") != "plcont-mlp") throw FormatError("not a plcont-mlp model file");
        const auto& a = doc.at("architecture");
        model.architecture = {a.at("input_dim").get<std::size_t>(),   a.at("hidden_layers").get<std::size_t>(),
                              a.at("hidden_units").get<std::size_t>(), a.at("output_dim").get<std::size_t>(),
                              a.at("dropout_input").get<double>(),     a.at("dropout_hidden").get<double>(),
                              a.at("batch_norm").get<bool>()};
        model.feature_manifest = doc.value("feature_manifest", "");
        model.playlist_ids = doc.value("playlist_ids", std::vector<std::string>{});
        for (const auto& l : doc.at("layers"))
            model.layers.push_back({matrix_from(l.at("weights")), vector_from(l.at("bias"))});
        for (const auto& n : doc.at("batch_norm"))
            model.norms.push_back({vector_from(n.at("gain")), vector_from(n.at("shift")),
                                   vector_from(n.at("running_mean")), vector_from(n.at("running_var"))});
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed model file: ") + e.what());
    }

    const Architecture& arch = model.architecture;
    arch.validate();
    if (model.layers.size() != arch.hidden_layers + 1 || model.norms.size() != (arch.batch_norm ? arch.hidden_layers : 0))
        throw FormatError("model layers do not match the architecture header");
    std::size_t in = arch.input_dim;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const std::size_t out = l + 1 == model.layers.size() ? arch.output_dim : arch.hidden_units;
        if (static_cast<std::size_t>(model.layers[l].weights.cols()) != in ||
            static_cast<std::size_t>(model.layers[l].weights.rows()) != out ||
            static_cast<std::size_t>(model.layers[l].bias.size()) != out)
            throw FormatError("layer " + std::to_string(l) + " has inconsistent shape");
        in = out;
    }
    for (const auto& n : model.norms)
        if ((n.running_var.array() <= 0.0).any()) throw FormatError("non-positive running variance in model file");
    return model;
}

}  // namespace plcont
