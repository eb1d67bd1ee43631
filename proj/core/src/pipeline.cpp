#include "plcont/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "plcont/digest.hpp"
#include "plcont/interactions.hpp"
#include "plcont/split_manifest.hpp"

namespace plcont {

namespace fs = std::filesystem;
using nlohmann::json;

StageError::StageError(std::string stage, ErrorCategory category, const std::string& message)
    : Error(category, stage + ": " + message), stage_(std::move(stage)) {}

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::set_seed(std::uint64_t seed) {
    split.seed = seed;
    feature_seed = seed;
    if (synth) synth->seed = seed;
    train.seed = seed;
    wmf.seed = seed;
    random_seed = seed;
}

void ExperimentConfig::set_threads(std::size_t n) {
    threads = std::max<std::size_t>(n, 1);
    wmf.threads = threads;
}

void ExperimentConfig::validate() const {
    if (corpus_path.empty() && !synth) throw ConfigError("config needs corpus.path or corpus.synth");
    if (synth) synth->validate();
    if (features.empty()) throw ConfigError("config lists no feature sources");
    for (const auto& f : features) {
        static const std::set<std::string> kinds = {"import", "mean-timbre", "vq", "tags-song", "tags-artist",
                                                    "synth", "synth-a", "synth-b"};
        if (!kinds.contains(f.kind)) throw ConfigError("unknown feature kind '" + f.kind + "'");
        if (f.kind.starts_with("synth") && !synth) throw ConfigError("feature '" + f.kind + "' needs a synth corpus");
        if (!f.kind.starts_with("synth") && f.path.empty()) throw ConfigError("feature '" + f.kind + "' needs a path");
        if (f.kind.starts_with("tags") && f.embeddings.empty())
            throw ConfigError("feature '" + f.kind + "' needs an embeddings path");
        if ((f.kind == "synth-a" || f.kind == "synth-b") && !synth->complementary_families)
            throw ConfigError("feature '" + f.kind + "' needs synth.complementary_families");
        if (f.kind == "vq" && f.codebook_k == 0) throw ConfigError("codebook size must be positive");
    }
    if (grid_layers.empty() || grid_units.empty()) throw ConfigError("empty model grid");
    train.validate();
    if (wmf.depth == 0 || wmf.sweeps == 0) throw ConfigError("wmf depth and sweeps must be positive");
    if (ks.empty()) throw ConfigError("no evaluation cutoffs");
}

namespace {

json source_json(const FeatureSource& f) {
    return {{"kind", f.kind}, {"path", f.path}, {"embeddings", f.embeddings}, {"codebook_k", f.codebook_k}};
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& section) {
    if (!obj.is_object()) throw ConfigError("'" + section + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError("unknown key '" + section + "." + key + "'");
    }
}

const json& section(const json& doc, const char* name) {
    static const json empty = json::object();
    return doc.contains(name) ? doc.at(name) : empty;
}

std::string resolve(const std::string& path, const fs::path& base) {
    if (path.empty() || fs::path(path).is_absolute()) return path;
    return (base / path).lexically_normal().string();
}

}  // namespace

json to_json(const ExperimentConfig& c, bool execution) {
    json corpus = {{"path", c.corpus_path}};
    if (c.synth) corpus["synth"] = to_json(*c.synth);
    json sources = json::array();
    for (const auto& f : c.features) sources.push_back(source_json(f));
    json doc = {
        {"corpus", corpus},
        {"filter",
         {{"enabled", c.apply_filter},
          {"min_artists", c.filter.min_artists},
          {"max_per_artist", c.filter.max_per_artist},
          {"min_songs", c.filter.min_songs},
          {"featured_only", c.featured_only},
          {"min_remaining", c.min_remaining}}},
        {"split",
         {{"test_fraction", c.split.test_fraction},
          {"validation_fraction", c.split.validation_fraction},
          {"seed", c.split.seed}}},
        {"features", {{"sources", sources}, {"preprocess", to_string(c.preprocessing)}, {"seed", c.feature_seed}}},
        {"mlp",
         {{"layers", c.grid_layers},
          {"units", c.grid_units},
          {"dropout_input", c.architecture.dropout_input},
          {"dropout_hidden", c.architecture.dropout_hidden},
          {"batch_norm", c.architecture.batch_norm},
          {"learning_rate", c.train.learning_rate},
          {"batch_size", c.train.batch_size},
          {"max_epochs", c.train.max_epochs},
          {"patience", c.train.patience_epochs},
          {"momentum", c.train.momentum},
          {"min_relative_improvement", c.train.min_relative_improvement},
          {"validation_k", c.train.validation_k},
          {"seed", c.train.seed}}},
        {"wmf",
         {{"depth", c.wmf.depth},
          {"weight_observed", c.wmf.weight_observed ? json(*c.wmf.weight_observed) : json(nullptr)},
          {"l2", c.wmf.l2_weight},
          {"sweeps", c.wmf.sweeps},
          {"seed", c.wmf.seed},
          {"init_scale", c.wmf.init_scale},
          {"format", c.wmf_format == ModelFormat::binary ? "binary" : "text"}}},
        {"evaluation", {{"ks", c.ks}, {"coldstart", c.coldstart}, {"random_seed", c.random_seed}}},
    };
    if (execution)
        doc["execution"] = {{"threads", c.threads}, {"output_dir", c.output_dir}, {"verbose", c.verbose}};
    return doc;
}

std::string ExperimentConfig::digest() const { return short_digest(to_json(*this).dump()); }

ExperimentConfig experiment_config_from_json(const json& doc) {
    ExperimentConfig c;
    try {
        check_keys(doc, {"corpus", "filter", "split", "features", "mlp", "wmf", "evaluation", "execution"}, "config");

        const json& corpus = section(doc, "corpus");
        check_keys(corpus, {"path", "synth"}, "corpus");
        c.corpus_path = corpus.value("path", "");
        if (corpus.contains("synth") && !corpus.at("synth").is_null()) {
            check_keys(corpus.at("synth"),
                       {"n_playlists", "n_songs", "n_topics", "min_songs", "max_songs", "songs_per_artist",
                        "feature_dim", "centroid_scale", "feature_noise", "coldstart_fraction", "purity",
                        "popularity_exponent", "test_fraction", "validation_fraction", "complementary_families",
                        "seed"},
                       "corpus.synth");
            c.synth = synth_config_from_json(corpus.at("synth"));
        }

        const json& filter = section(doc, "filter");
        check_keys(filter, {"enabled", "min_artists", "max_per_artist", "min_songs", "featured_only", "min_remaining"},
                   "filter");
        c.apply_filter = filter.value("enabled", c.apply_filter);
        c.filter.min_artists = filter.value("min_artists", c.filter.min_artists);
        c.filter.max_per_artist = filter.value("max_per_artist", c.filter.max_per_artist);
        c.filter.min_songs = filter.value("min_songs", c.filter.min_songs);
        c.featured_only = filter.value("featured_only", c.featured_only);
        c.min_remaining = filter.value("min_remaining", c.min_remaining);

        const json& split = section(doc, "split");
        check_keys(split, {"test_fraction", "validation_fraction", "seed"}, "split");
        c.split.test_fraction = split.value("test_fraction", c.split.test_fraction);
        c.split.validation_fraction = split.value("validation_fraction", c.split.validation_fraction);
        c.split.seed = split.value("seed", c.split.seed);

        const json& features = section(doc, "features");
        check_keys(features, {"sources", "preprocess", "seed"}, "features");
        if (features.contains("sources")) {
            for (const auto& s : features.at("sources")) {
                check_keys(s, {"kind", "path", "embeddings", "codebook_k"}, "features.sources");
                FeatureSource f;
                f.kind = s.at("kind").get<std::string>();
                f.path = s.value("path", "");
                f.embeddings = s.value("embeddings", "");
                f.codebook_k = s.value("codebook_k", f.codebook_k);
                c.features.push_back(std::move(f));
            }
        }
        if (features.contains("preprocess"))
            c.preprocessing = parse_preprocessing(features.at("preprocess").get<std::string>());
        c.feature_seed = features.value("seed", c.feature_seed);

        const json& mlp = section(doc, "mlp");
        check_keys(mlp,
                   {"layers", "units", "dropout_input", "dropout_hidden", "batch_norm", "learning_rate", "batch_size",
                    "max_epochs", "patience", "momentum", "min_relative_improvement", "validation_k", "seed"},
                   "mlp");
        c.grid_layers = mlp.value("layers", c.grid_layers);
        c.grid_units = mlp.value("units", c.grid_units);
        c.architecture.dropout_input = mlp.value("dropout_input", c.architecture.dropout_input);
        c.architecture.dropout_hidden = mlp.value("dropout_hidden", c.architecture.dropout_hidden);
        c.architecture.batch_norm = mlp.value("batch_norm", c.architecture.batch_norm);
        c.train.learning_rate = mlp.value("learning_rate", c.train.learning_rate);
        c.train.batch_size = mlp.value("batch_size", c.train.batch_size);
        c.train.max_epochs = mlp.value("max_epochs", c.train.max_epochs);
        c.train.patience_epochs = mlp.value("patience", c.train.patience_epochs);
        c.train.momentum = mlp.value("momentum", c.train.momentum);
        c.train.min_relative_improvement = mlp.value("min_relative_improvement", c.train.min_relative_improvement);
        c.train.validation_k = mlp.value("validation_k", c.train.validation_k);
        c.train.seed = mlp.value("seed", c.train.seed);

        const json& wmf = section(doc, "wmf");
        check_keys(wmf, {"depth", "weight_observed", "l2", "sweeps", "seed", "init_scale", "format"}, "wmf");
        c.wmf.depth = wmf.value("depth", c.wmf.depth);
        if (wmf.contains("weight_observed")) {
            const json& w = wmf.at("weight_observed");
            c.wmf.weight_observed = w.is_null() ? std::nullopt : std::optional<double>(w.get<double>());
        }
        c.wmf.l2_weight = wmf.value("l2", c.wmf.l2_weight);
        c.wmf.sweeps = wmf.value("sweeps", c.wmf.sweeps);
        c.wmf.seed = wmf.value("seed", c.wmf.seed);
        c.wmf.init_scale = wmf.value("init_scale", c.wmf.init_scale);
        if (wmf.contains("format")) c.wmf_format = parse_model_format(wmf.at("format").get<std::string>());

        const json& evaluation = section(doc, "evaluation");
        check_keys(evaluation, {"ks", "coldstart", "random_seed"}, "evaluation");
        c.ks = evaluation.value("ks", c.ks);
        c.coldstart = evaluation.value("coldstart", c.coldstart);
        c.random_seed = evaluation.value("random_seed", c.random_seed);

        const json& execution = section(doc, "execution");
        check_keys(execution, {"threads", "output_dir", "verbose"}, "execution");
        c.set_threads(execution.value("threads", c.threads));
        c.output_dir = execution.value("output_dir", c.output_dir);
        c.verbose = execution.value("verbose", c.verbose);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    ExperimentConfig c = experiment_config_from_json(doc);
    // Relative paths are taken from the config file's directory.
    const fs::path base = fs::path(path).parent_path();
    c.corpus_path = resolve(c.corpus_path, base);
    for (auto& f : c.features) {
        f.path = resolve(f.path, base);
        f.embeddings = resolve(f.embeddings, base);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

std::vector<SongId> training_part_songs(const SplitCorpus& split) {
    std::vector<SongId> songs = split.train.songs().ids();
    std::unordered_set<SongId> seen(songs.begin(), songs.end());
    for (const auto& list : split.validation)
        for (const auto& e : list)
            if (seen.insert(e.song).second) songs.push_back(e.song);
    return songs;
}

FeatureContext context_for(const PlaylistCorpus& corpus, const SynthData* synth) {
    FeatureContext context;
    context.synth = synth;
    context.artists = corpus.song_artists();
    return context;
}

std::unordered_map<SongId, ArtistId> split_artists(const SplitCorpus& split) {
    std::unordered_map<SongId, ArtistId> artists = split.train.song_artists();
    for (const auto* part : {&split.validation, &split.test})
        for (const auto& list : *part)
            for (const auto& e : list) artists.emplace(e.song, e.artist);
    return artists;
}

}  // namespace

std::unordered_set<SongId> covered_songs(const FeatureSource& source, const FeatureContext& context) {
    std::unordered_set<SongId> out;
    if (source.kind.starts_with("synth")) {
        if (!context.synth) throw ConfigError("feature '" + source.kind + "' needs a synth corpus");
        for (const auto& id : context.synth->features.ids().ids()) out.insert(id);
    } else if (source.kind == "import") {
        const auto imported = import_precomputed(source.path, source.kind);
        for (const auto& id : imported.features.ids().ids()) out.insert(id);
    } else if (source.kind == "mean-timbre" || source.kind == "vq") {
        for (const auto& frames : load_timbre_frames(source.path))
            if (!frames.frames.empty()) out.insert(frames.song);
    } else if (source.kind == "tags-song") {
        for (const auto& a : load_tags(source.path)) out.insert(a.subject);
    } else if (source.kind == "tags-artist") {
        std::unordered_set<ArtistId> tagged;
        for (const auto& a : load_tags(source.path)) tagged.insert(a.subject);
        for (const auto& [song, artist] : context.artists)
            if (tagged.contains(artist)) out.insert(song);
    } else {
        throw ConfigError("unknown feature kind '" + source.kind + "'");
    }
    return out;
}

PreparedData prepare_data(const ExperimentConfig& config) {
    PreparedData data;
    if (config.synth) {
        data.synth = generate(*config.synth);
        data.split = data.synth->split;
        return data;
    }
    PlaylistCorpus corpus = load_corpus(config.corpus_path);
    if (config.featured_only) {
        const FeatureContext context = context_for(corpus, nullptr);
        std::optional<std::unordered_set<SongId>> available;
        for (const auto& source : config.features) {
            auto covered = covered_songs(source, context);
            if (!available) {
                available = std::move(covered);
            } else {
                std::erase_if(*available, [&](const SongId& s) { return !covered.contains(s); });
            }
        }
        if (available) corpus = restrict_to_featured(corpus, *available, config.min_remaining);
    }
    if (config.apply_filter) corpus = filter_corpus(corpus, config.filter);
    if (corpus.n_playlists() == 0) throw ValidationError("no playlists left after filtering");
    data.split = split_corpus(corpus, config.split);
    return data;
}

std::vector<SongId> split_songs(const SplitCorpus& split) {
    const EvaluationSet set(split, Withheld::test);
    std::vector<SongId> songs = set.candidates().ids();
    std::unordered_set<SongId> seen(songs.begin(), songs.end());
    for (const auto& list : split.validation)
        for (const auto& e : list)
            if (seen.insert(e.song).second) songs.push_back(e.song);
    return songs;
}

FeatureMatrix raw_features(const FeatureSource& source, std::span<const SongId> songs,
                           std::span<const SongId> development_songs, std::uint64_t seed,
                           const FeatureContext& context) {
    const std::string& kind = source.kind;
    if (kind.starts_with("synth")) {
        if (!context.synth) throw ConfigError("feature '" + kind + "' needs a synth corpus");
        if (kind == "synth") return select_rows(context.synth->features, songs);
        const std::size_t family = kind == "synth-a" ? 0 : 1;
        if (context.synth->families.size() <= family) throw ConfigError("synth corpus has no '" + kind + "' family");
        return select_rows(context.synth->families[family], songs);
    }
    if (kind == "import") {
        const std::unordered_set<SongId> wanted(songs.begin(), songs.end());
        return select_rows(import_precomputed(source.path, kind, &wanted).features, songs);
    }
    if (kind == "mean-timbre" || kind == "vq") {
        const auto all_frames = load_timbre_frames(source.path);
        std::unordered_map<SongId, std::size_t> where;
        for (std::size_t i = 0; i < all_frames.size(); ++i) where.emplace(all_frames[i].song, i);
        std::optional<Codebook> codebook;
        if (kind == "vq") {
            std::vector<TimbreFrames> development;
            for (const auto& s : development_songs)
                if (auto it = where.find(s); it != where.end()) development.push_back(all_frames[it->second]);
            KMeansOptions options;
            options.k = source.codebook_k;
            options.seed = seed;
            codebook = fit_codebook(development, options).codebook;
        }
        FeatureMatrix out(kind, kind == "vq" ? source.codebook_k : timbre_dim);
        for (const auto& s : songs) {
            auto it = where.find(s);
            if (it == where.end() || all_frames[it->second].frames.empty())
                throw MissingFeatureError("no timbre frames for song '" + s + "'");
            const auto& frames = all_frames[it->second];
            out.add_row(s, kind == "vq" ? vq_histogram(frames, *codebook) : mean_timbre(frames));
        }
        return out;
    }
    if (kind == "tags-song" || kind == "tags-artist") {
        const auto annotations = load_tags(source.path);
        const EmbeddingDictionary dictionary = load_embeddings(source.embeddings);
        std::unordered_map<std::string, const TagAnnotation*> by_subject;
        for (const auto& a : annotations) by_subject.emplace(a.subject, &a);
        FeatureMatrix out(kind, dictionary.dim());
        for (const auto& s : songs) {
            std::string subject = s;
            if (kind == "tags-artist") {
                auto artist = context.artists.find(s);
                if (artist == context.artists.end()) throw MissingFeatureError("no artist for song '" + s + "'");
                subject = artist->second;
            }
            auto it = by_subject.find(subject);
            if (it == by_subject.end()) throw MissingFeatureError("no tags for '" + subject + "'");
            out.add_row(s, tag_feature(*it->second, dictionary));
        }
        return out;
    }
    throw ConfigError("unknown feature kind '" + kind + "'");
}

FeatureMatrix build_features(const ExperimentConfig& config, const SplitCorpus& split, const SynthData* synth) {
    const std::vector<SongId> songs = split_songs(split);
    const std::vector<SongId> development = training_part_songs(split);
    FeatureContext context;
    context.synth = synth;
    context.artists = split_artists(split);
    std::vector<FeatureMatrix> parts;
    for (const auto& source : config.features) {
        const FeatureMatrix raw = raw_features(source, songs, development, config.feature_seed, context);
        parts.push_back(preprocess(raw, config.preprocessing, development));
    }
    if (parts.size() == 1) return std::move(parts.front());
    return concat(parts);
}

GridResult train_mlp(const ExperimentConfig& config, const SplitCorpus& split, const FeatureMatrix& features) {
    return grid_search(split, features, config.grid_layers, config.grid_units, config.architecture, config.train);
}

SplitCorpus evaluation_split(const SplitCorpus& split) {
    return split.validation_merged ? split : merge_validation(split);
}

FactorModel train_wmf(const ExperimentConfig& config, const SplitCorpus& split) {
    const SplitCorpus merged = evaluation_split(split);
    const InteractionMatrix m = build_interactions(merged.train);
    WmfConfig wmf = config.wmf;
    wmf.threads = config.threads;
    return wmf_fit(m, wmf);
}

RowMatrix mlp_scores(const ClassifierModel& model, const FeatureMatrix& features, const EvaluationSet& set) {
    if (model.playlist_ids.size() != set.n_playlists())
        throw ValidationError("model has " + std::to_string(model.playlist_ids.size()) + " outputs for " +
                              std::to_string(set.n_playlists()) + " playlists");
    return predict_scores(model, features, set.candidates().ids());
}

RowMatrix wmf_candidate_scores(const FactorModel& model, const EvaluationSet& set) {
    if (model.n_rows() != set.n_playlists() || model.n_cols() != set.n_training_songs())
        throw ValidationError("factor model shape " + std::to_string(model.n_rows()) + "x" +
                              std::to_string(model.n_cols()) + " does not match the split (" +
                              std::to_string(set.n_playlists()) + " playlists, " +
                              std::to_string(set.n_training_songs()) + " training songs)");
    RowMatrix scores = RowMatrix::Zero(static_cast<Eigen::Index>(set.n_playlists()),
                                       static_cast<Eigen::Index>(set.n_candidates()));
    scores.leftCols(static_cast<Eigen::Index>(model.n_cols())) = wmf_scores(model);
    return scores;
}

RowMatrix random_scores(const EvaluationSet& set, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RowMatrix scores(static_cast<Eigen::Index>(set.n_playlists()), static_cast<Eigen::Index>(set.n_candidates()));
    for (Eigen::Index i = 0; i < scores.size(); ++i) scores.data()[i] = u(rng);
    return scores;
}

ScoreSource parse_score_source(const std::string& name) {
    if (name == "mlp") return ScoreSource::mlp;
    if (name == "wmf") return ScoreSource::wmf;
    if (name == "random") return ScoreSource::random;
    throw ConfigError("unknown score source '" + name + "' (expected mlp, wmf, or random)");
}

std::string to_string(ScoreSource source) {
    switch (source) {
        case ScoreSource::mlp: return "mlp";
        case ScoreSource::wmf: return "wmf";
        case ScoreSource::random: return "random";
    }
    return "?";
}

RankingReport make_report(const RowMatrix& scores, const EvaluationSet& set, const SplitCorpus& eval_split,
                          const std::string& name, const std::string& model, const std::string& features,
                          const ExperimentConfig& config) {
    RankingReport report = evaluate(scores, set, config.ks);
    if (config.coldstart) report.bins = coldstart_report(report);
    report.name = name;
    report.split_digest = split_digest(eval_split);
    report.model = model;
    report.features = features;
    report.config_digest = config.digest();
    return report;
}

// ---------------------------------------------------------------------------
// Artifact files

std::string dump_json(const json& doc) { return doc.dump(1) + "\n"; }

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << text;
    if (!out) throw ConfigError("write to '" + path + "' failed");
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("'" + path + "' is not valid JSON: " + e.what());
    }
}

json mlp_artifact(const GridResult& grid, const std::string& config_digest) {
    json cells = json::array();
    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        const auto& cell = grid.cells[i];
        json log = json::array();
        for (const auto& e : cell.result.log)
            log.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"validation_recall", e.validation_recall}});
        cells.push_back({{"layers", cell.architecture.hidden_layers},
                         {"units", cell.architecture.hidden_units},
                         {"best_epoch", cell.result.best_epoch},
                         {"best_recall", cell.result.best_recall},
                         {"early_stopped", cell.result.early_stopped},
                         {"selected", i == grid.selected},
                         {"log", log}});
    }
    return {{"config_digest", config_digest},
            {"selected", grid.selected},
            {"final_epochs", grid.final_epochs},
            {"grid", cells},
            {"model", to_json(grid.final_model)}};
}

void save_mlp_artifact(const std::string& path, const GridResult& grid, const std::string& config_digest) {
    write_text_file(path, dump_json(mlp_artifact(grid, config_digest)));
}

ClassifierModel load_mlp_model(const std::string& path) {
    const json doc = read_json_file(path);
    // Accept both the training artifact and a bare model document.
    return classifier_from_json(doc.contains("model") ? doc.at("model") : doc);
}

void save_report(const std::string& path, const RankingReport& report) {
    write_text_file(path, dump_json(to_json(report)));
}

RankingReport load_report(const std::string& path) { return report_from_json(read_json_file(path)); }

void save_comparison(const std::string& path, const ComparisonTable& table, const std::string& config_digest) {
    json doc = table.document;
    doc["config_digest"] = config_digest;
    doc["table"] = table.text;
    write_text_file(path, dump_json(doc));
}

// ---------------------------------------------------------------------------
// Orchestration

PipelineResult run_pipeline(const ExperimentConfig& config) {
    PipelineResult result;
    const fs::path out_dir = config.output_dir;
    auto note = [&](const std::string& message) {
        if (config.verbose) std::cerr << "[plcont] " << message << '\n';
    };
    auto record = [&](const fs::path& path) {
        result.artifacts.push_back(path.string());
        note("wrote " + path.string());
    };

    try {
        const std::string digest = in_stage("config", [&] {
            config.validate();
            std::error_code ec;
            fs::create_directories(out_dir, ec);
            if (ec) throw ConfigError("cannot create '" + out_dir.string() + "': " + ec.message());
            fs::remove(out_dir / artifact::failed, ec);
            return config.digest();
        });

        PreparedData data = in_stage("prepare", [&] {
            PreparedData prepared = prepare_data(config);
            save_split_manifest((out_dir / artifact::splits).string(), prepared.split, digest);
            return prepared;
        });
        record(out_dir / artifact::splits);

        const SynthData* synth = data.synth ? &*data.synth : nullptr;
        const FeatureMatrix features = in_stage("features", [&] {
            FeatureMatrix f = build_features(config, data.split, synth);
            save_feature_matrix((out_dir / artifact::features).string(), f, "config " + digest);
            return f;
        });
        record(out_dir / artifact::features);

        const GridResult grid = in_stage("train-mlp", [&] {
            GridResult g = train_mlp(config, data.split, features);
            save_mlp_artifact((out_dir / artifact::mlp_model).string(), g, digest);
            return g;
        });
        record(out_dir / artifact::mlp_model);

        const fs::path wmf_path =
            out_dir / (config.wmf_format == ModelFormat::binary ? "wmf_model.bin" : artifact::wmf_model);
        const FactorModel wmf = in_stage("train-wmf", [&] {
            FactorModel m = train_wmf(config, data.split);
            m.provenance = "config " + digest;
            save_factor_model(wmf_path.string(), m, config.wmf_format);
            return m;
        });
        record(wmf_path);

        std::vector<RankingReport> reports = in_stage("evaluate", [&] {
            const SplitCorpus eval_split = evaluation_split(data.split);
            const EvaluationSet set(eval_split, Withheld::test);
            std::vector<RankingReport> r;
            r.push_back(make_report(mlp_scores(grid.final_model, features, set), set, eval_split, "mlp",
                                    grid.final_model.architecture.describe(), features.manifest(), config));
            r.push_back(make_report(wmf_candidate_scores(wmf, set), set, eval_split, "wmf",
                                    "wmf depth=" + std::to_string(wmf.depth()), "listening interactions", config));
            r.push_back(make_report(random_scores(set, config.random_seed), set, eval_split, "random",
                                    "uniform seed=" + std::to_string(config.random_seed), "none", config));
            save_report((out_dir / artifact::report_mlp).string(), r[0]);
            save_report((out_dir / artifact::report_wmf).string(), r[1]);
            save_report((out_dir / artifact::report_random).string(), r[2]);
            return r;
        });
        record(out_dir / artifact::report_mlp);
        record(out_dir / artifact::report_wmf);
        record(out_dir / artifact::report_random);

        result.comparison = in_stage("report", [&] {
            ComparisonTable table = compare(reports);
            save_comparison((out_dir / artifact::comparison).string(), table, digest);
            return table;
        });
        record(out_dir / artifact::comparison);
    } catch (const StageError& e) {
        result.stage = e.stage();
        result.message = e.what();
        result.exit_code = exit_code(e.category());
        std::error_code ec;
        if (fs::is_directory(out_dir, ec)) {
            std::ofstream marker(out_dir / artifact::failed);
            marker << e.what() << '\n';
        }
    }
    return result;
}

}  // namespace plcont
