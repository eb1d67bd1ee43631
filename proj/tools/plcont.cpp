// plcont: playlist continuation experiments from the command line.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plcont/pipeline.hpp"
#include "plcont/split_manifest.hpp"
#include "plcont/statistics.hpp"
#include "plcont/text.hpp"

namespace fs = std::filesystem;
using namespace plcont;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<std::string> out;
    bool verbose = false;
};

std::vector<std::size_t> parse_ks(const std::string& text) {
    std::vector<std::size_t> ks;
    for (auto field : split_fields(text, ',')) {
        const double v = parse_double(field, 0);
        if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v)))
            throw ConfigError("invalid cutoff '" + std::string(field) + "'");
        ks.push_back(static_cast<std::size_t>(v));
    }
    if (ks.empty()) throw ConfigError("no cutoffs given");
    return ks;
}

std::string in_out(const ExperimentConfig& config, const char* name) {
    return (fs::path(config.output_dir) / name).string();
}

void ensure_out_dir(const ExperimentConfig& config) {
    std::error_code ec;
    fs::create_directories(config.output_dir, ec);
    if (ec) throw ConfigError("cannot create '" + config.output_dir + "': " + ec.message());
}

void say(const ExperimentConfig& config, const std::string& message) {
    if (config.verbose) std::cerr << "[plcont] " << message << '\n';
}

FeatureMatrix load_features(const std::vector<std::string>& paths) {
    std::vector<FeatureMatrix> parts;
    for (const auto& p : paths) parts.push_back(import_precomputed(p, "").features);
    if (parts.empty()) throw ConfigError("no feature files given");
    if (parts.size() == 1) return std::move(parts.front());
    return concat(parts);
}

std::string summary_row(const std::string& label, const FiveNumberSummary& s) {
    std::ostringstream out;
    out << label;
    for (double v : {s.min, s.q1, s.median, s.q3, s.max}) out << '\t' << format_double(v);
    return out.str();
}

void print_statistics(const SplitCorpus& split) {
    const CorpusStatistics stats = corpus_statistics(split);
    std::cout << "part\tstatistic\tmin\t1q\tmedian\t3q\tmax\n";
    for (const auto& [name, part] : {std::pair{"train", &stats.train}, std::pair{"test", &stats.test}}) {
        std::cout << summary_row(std::string(name) + "\tsongs/playlist", part->songs_per_playlist) << '\n'
                  << summary_row(std::string(name) + "\tartists/playlist", part->artists_per_playlist) << '\n'
                  << summary_row(std::string(name) + "\tsong frequency", part->song_frequency) << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid music playlist continuation: data preparation, models, and evaluation"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config_path, "Experiment configuration (JSON)")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Seed for every random stage");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "Artifact directory");
    app.add_flag("--verbose", g.verbose, "Progress on stderr");

    // prepare
    auto* prepare = app.add_subcommand("prepare", "Filter and split a corpus; write the split manifest");
    std::optional<std::string> corpus_path;
    std::optional<std::size_t> min_artists, max_per_artist, min_songs;
    std::optional<double> test_fraction, validation_fraction;
    bool no_filter = false;
    prepare->add_option("--corpus", corpus_path, "Corpus TSV");
    prepare->add_option("--min-artists", min_artists);
    prepare->add_option("--max-per-artist", max_per_artist);
    prepare->add_option("--min-songs", min_songs);
    prepare->add_option("--test-fraction", test_fraction);
    prepare->add_option("--validation-fraction", validation_fraction);
    prepare->add_flag("--no-filter", no_filter, "Keep every playlist");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a planted-topic corpus with features and split");
    std::optional<std::size_t> n_playlists, n_songs, n_topics, feature_dim;
    std::optional<double> feature_noise, coldstart;
    bool families = false;
    synth->add_option("--playlists", n_playlists);
    synth->add_option("--songs", n_songs);
    synth->add_option("--topics", n_topics);
    synth->add_option("--feature-dim", feature_dim);
    synth->add_option("--feature-noise", feature_noise);
    synth->add_option("--coldstart", coldstart, "Fraction of songs per topic kept out of training");
    synth->add_flag("--families", families, "Also emit two complementary partial feature families");

    // features
    auto* features = app.add_subcommand("features", "Build preprocessed song features for the split");
    std::optional<std::string> kind, input, embeddings, preprocess_name, splits_path;
    std::optional<std::size_t> codebook_k;
    features->add_option("--kind", kind, "Feature kind")
        ->check(CLI::IsMember({"mean-timbre", "vq", "tags-song", "tags-artist", "import", "synth", "synth-a",
                               "synth-b"}));
    features->add_option("--input", input, "Timbre frames, tags, or feature matrix file");
    features->add_option("--embeddings", embeddings, "Word embeddings for tag features");
    features->add_option("--codebook-k", codebook_k, "Codebook size for vq")->check(CLI::PositiveNumber);
    features->add_option("--preprocess", preprocess_name)->check(CLI::IsMember({"standardize-l2", "l1"}));
    features->add_option("--splits", splits_path, "Split manifest (default <out>/splits.json)");

    // train-mlp
    auto* train_mlp_cmd = app.add_subcommand("train-mlp", "Grid-search and train the song-to-playlist classifier");
    std::vector<std::size_t> layers, units;
    std::optional<double> lr;
    std::optional<std::size_t> batch, max_epochs, patience;
    std::vector<std::string> feature_paths;
    train_mlp_cmd->add_option("--layers", layers, "Hidden layer counts to try")->check(CLI::IsMember({2, 3}));
    train_mlp_cmd->add_option("--units", units, "Hidden unit counts to try")->check(CLI::IsMember({50, 100, 200}));
    train_mlp_cmd->add_option("--lr", lr);
    train_mlp_cmd->add_option("--batch", batch)->check(CLI::PositiveNumber);
    train_mlp_cmd->add_option("--max-epochs", max_epochs);
    train_mlp_cmd->add_option("--patience", patience);
    train_mlp_cmd->add_option("--features", feature_paths, "Feature files; several are concatenated");
    train_mlp_cmd->add_option("--splits", splits_path);

    // train-wmf
    auto* train_wmf_cmd = app.add_subcommand("train-wmf", "Fit the weighted matrix factorization baseline");
    std::optional<std::size_t> depth, sweeps;
    std::optional<double> weight_observed, l2;
    std::optional<std::string> model_format;
    train_wmf_cmd->add_option("--depth", depth)->check(CLI::PositiveNumber);
    train_wmf_cmd->add_option("--weight-observed", weight_observed);
    train_wmf_cmd->add_option("--l2", l2);
    train_wmf_cmd->add_option("--sweeps", sweeps)->check(CLI::PositiveNumber);
    train_wmf_cmd->add_option("--model-format", model_format)->check(CLI::IsMember({"text", "binary"}));
    train_wmf_cmd->add_option("--splits", splits_path);

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Rank the test continuations and write a report");
    std::optional<std::string> model_path, ks_text;
    std::string scores_from = "mlp";
    bool coldstart_flag = false;
    evaluate_cmd->add_option("--model", model_path, "Model file (mlp or wmf)");
    evaluate_cmd->add_option("--scores-from", scores_from)->check(CLI::IsMember({"mlp", "wmf", "random"}));
    evaluate_cmd->add_option("--ks", ks_text, "Recall cutoffs, e.g. 10,30,100");
    evaluate_cmd->add_flag("--coldstart", coldstart_flag, "Add the occurrence-bucket breakdown");
    evaluate_cmd->add_option("--features", feature_paths, "Feature files for mlp scoring");
    evaluate_cmd->add_option("--splits", splits_path);

    // report
    auto* report_cmd = app.add_subcommand("report", "Compare reports side by side");
    std::vector<std::string> report_paths;
    report_cmd->add_option("--reports", report_paths, "Report files (default: the three reports in <out>)");

    // run
    auto* run_cmd = app.add_subcommand("run", "Full pipeline into the artifact directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_code(ErrorCategory::configuration);
    }

    try {
        ExperimentConfig config = g.config_path.empty() ? ExperimentConfig{} : load_experiment_config(g.config_path);
        if (g.seed) config.set_seed(*g.seed);
        if (g.threads) config.set_threads(*g.threads);
        if (g.out) config.output_dir = *g.out;
        config.verbose = config.verbose || g.verbose;
        const auto split_file = [&] { return splits_path ? *splits_path : in_out(config, artifact::splits); };

        if (prepare->parsed()) {
            if (corpus_path) {
                config.corpus_path = *corpus_path;
                config.synth.reset();
            }
            if (min_artists) config.filter.min_artists = *min_artists;
            if (max_per_artist) config.filter.max_per_artist = *max_per_artist;
            if (min_songs) config.filter.min_songs = *min_songs;
            if (no_filter) config.apply_filter = false;
            if (test_fraction) config.split.test_fraction = *test_fraction;
            if (validation_fraction) config.split.validation_fraction = *validation_fraction;
            if (config.corpus_path.empty() && !config.synth) throw ConfigError("prepare needs --corpus or a config");
            // Without feature sources there is nothing to restrict to.
            const PreparedData data = prepare_data(config);
            ensure_out_dir(config);
            save_split_manifest(in_out(config, artifact::splits), data.split, config.digest());
            print_statistics(data.split);
            say(config, "wrote " + in_out(config, artifact::splits));
        } else if (synth->parsed()) {
            SynthConfig sc = config.synth.value_or(SynthConfig{});
            if (g.seed) sc.seed = *g.seed;
            if (n_playlists) sc.n_playlists = *n_playlists;
            if (n_songs) sc.n_songs = *n_songs;
            if (n_topics) sc.n_topics = *n_topics;
            if (feature_dim) sc.feature_dim = *feature_dim;
            if (feature_noise) sc.feature_noise = *feature_noise;
            if (coldstart) sc.coldstart_fraction = *coldstart;
            if (families) sc.complementary_families = true;
            config.synth = sc;
            const SynthData data = generate(sc);
            ensure_out_dir(config);
            const std::string tag = "config " + config.digest();
            save_corpus(in_out(config, "corpus.tsv"), data.corpus);
            save_feature_matrix(in_out(config, "features_synth.tsv"), data.features, tag);
            for (const auto& family : data.families)
                save_feature_matrix(in_out(config, ("features_" + family.kind() + ".tsv").c_str()), family, tag);
            save_split_manifest(in_out(config, artifact::splits), data.split, config.digest());
            std::ofstream topics(in_out(config, "topics.tsv"));
            topics << "song_id\ttopic\tcold\n";
            for (const auto& id : data.corpus.songs().ids())
                topics << id << '\t' << data.topic.at(id) << '\t' << (data.cold_songs.contains(id) ? 1 : 0) << '\n';
            say(config, "wrote synthetic corpus to " + config.output_dir);
        } else if (features->parsed()) {
            if (kind) {
                FeatureSource source;
                source.kind = *kind;
                if (input) source.path = *input;
                if (embeddings) source.embeddings = *embeddings;
                if (codebook_k) source.codebook_k = *codebook_k;
                config.features = {source};
            } else if (codebook_k) {
                for (auto& f : config.features) f.codebook_k = *codebook_k;
            }
            if (preprocess_name) config.preprocessing = parse_preprocessing(*preprocess_name);
            const SplitCorpus split = load_split_manifest(split_file());
            std::optional<SynthData> generated;
            for (const auto& f : config.features)
                if (f.kind.starts_with("synth") && !generated) {
                    if (!config.synth) throw ConfigError("synth features need a synth config");
                    generated = generate(*config.synth);
                }
            const FeatureMatrix m = build_features(config, split, generated ? &*generated : nullptr);
            ensure_out_dir(config);
            save_feature_matrix(in_out(config, artifact::features), m, "config " + config.digest());
            say(config, "wrote " + std::to_string(m.n_rows()) + " rows of " + m.manifest());
        } else if (train_mlp_cmd->parsed()) {
            if (!layers.empty()) config.grid_layers = layers;
            if (!units.empty()) config.grid_units = units;
            if (lr) config.train.learning_rate = *lr;
            if (batch) config.train.batch_size = *batch;
            if (max_epochs) config.train.max_epochs = *max_epochs;
            if (patience) config.train.patience_epochs = *patience;
            config.train.validate();
            if (feature_paths.empty()) feature_paths = {in_out(config, artifact::features)};
            const SplitCorpus split = load_split_manifest(split_file());
            const FeatureMatrix m = load_features(feature_paths);
            const GridResult grid = train_mlp(config, split, m);
            ensure_out_dir(config);
            save_mlp_artifact(in_out(config, artifact::mlp_model), grid, config.digest());
            const auto& best = grid.cells[grid.selected];
            std::cout << "selected " << best.architecture.describe() << " recall@" << config.train.validation_k << "="
                      << format_double(best.result.best_recall) << " epochs=" << grid.final_epochs << '\n';
        } else if (train_wmf_cmd->parsed()) {
            if (depth) config.wmf.depth = *depth;
            if (sweeps) config.wmf.sweeps = *sweeps;
            if (weight_observed) config.wmf.weight_observed = *weight_observed;
            if (l2) config.wmf.l2_weight = *l2;
            if (model_format) config.wmf_format = parse_model_format(*model_format);
            const SplitCorpus split = load_split_manifest(split_file());
            FactorModel model = train_wmf(config, split);
            model.provenance = "config " + config.digest();
            ensure_out_dir(config);
            const char* name = config.wmf_format == ModelFormat::binary ? "wmf_model.bin" : artifact::wmf_model;
            save_factor_model(in_out(config, name), model, config.wmf_format);
            say(config, std::string("wrote ") + in_out(config, name));
        } else if (evaluate_cmd->parsed()) {
            if (ks_text) config.ks = parse_ks(*ks_text);
            if (coldstart_flag) config.coldstart = true;
            const ScoreSource source = parse_score_source(scores_from);
            const SplitCorpus eval_split = evaluation_split(load_split_manifest(split_file()));
            const EvaluationSet set(eval_split, Withheld::test);
            RankingReport report;
            if (source == ScoreSource::mlp) {
                const ClassifierModel model = load_mlp_model(model_path ? *model_path : in_out(config, artifact::mlp_model));
                if (feature_paths.empty()) feature_paths = {in_out(config, artifact::features)};
                const FeatureMatrix m = load_features(feature_paths);
                report = make_report(mlp_scores(model, m, set), set, eval_split, "mlp", model.architecture.describe(),
                                     m.manifest(), config);
            } else if (source == ScoreSource::wmf) {
                const FactorModel model = load_factor_model(model_path ? *model_path : in_out(config, artifact::wmf_model));
                report = make_report(wmf_candidate_scores(model, set), set, eval_split, "wmf",
                                     "wmf depth=" + std::to_string(model.depth()), "listening interactions", config);
            } else {
                report = make_report(random_scores(set, config.random_seed), set, eval_split, "random",
                                     "uniform seed=" + std::to_string(config.random_seed), "none", config);
            }
            ensure_out_dir(config);
            const std::string name = "report_" + to_string(source) + ".json";
            save_report(in_out(config, name.c_str()), report);
            std::cout << format_report(report);
        } else if (report_cmd->parsed()) {
            if (report_paths.empty())
                for (const char* name : {artifact::report_mlp, artifact::report_wmf, artifact::report_random})
                    if (fs::exists(in_out(config, name))) report_paths.push_back(in_out(config, name));
            if (report_paths.empty()) throw ConfigError("no reports to compare");
            std::vector<RankingReport> reports;
            for (const auto& p : report_paths) reports.push_back(load_report(p));
            const ComparisonTable table = compare(reports);
            ensure_out_dir(config);
            save_comparison(in_out(config, artifact::comparison), table, config.digest());
            std::cout << table.text;
        } else if (run_cmd->parsed()) {
            const PipelineResult result = run_pipeline(config);
            if (result.exit_code != 0) {
                std::cerr << "plcont: stage " << result.message << '\n';
                return result.exit_code;
            }
            if (result.comparison) std::cout << result.comparison->text;
        }
    } catch (const Error& e) {
        std::cerr << "plcont: " << e.what() << '\n';
        return exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "plcont: " << e.what() << '\n';
        return exit_code(ErrorCategory::data);
    }
    return 0;
}
