#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "plcont/classifier.hpp"
#include "plcont/corpus.hpp"
#include "plcont/error.hpp"
#include "plcont/evaluator.hpp"
#include "plcont/factorization.hpp"
#include "plcont/features.hpp"
#include "plcont/synth.hpp"

namespace plcont {

/// One feature family. Kinds: "import" (feature matrix file), "mean-timbre"
/// and "vq" (timbre frame file), "tags-song" and "tags-artist" (tag file plus
/// embeddings), "synth", "synth-a", "synth-b" (generated with the corpus).
struct FeatureSource {
    std::string kind;
    std::string path;
    std::string embeddings;
    std::size_t codebook_k = 200;
};

struct ExperimentConfig {
    // Input: either a corpus file or a synthetic generator.
    std::string corpus_path;
    std::optional<SynthConfig> synth;

    bool apply_filter = true;
    FilterThresholds filter;
    /// Drop songs without features from the corpus before splitting.
    bool featured_only = true;
    std::size_t min_remaining = 5;
    SplitOptions split;

    std::vector<FeatureSource> features;
    Preprocessing preprocessing = Preprocessing::standardize_l2;
    std::uint64_t feature_seed = 0;

    std::vector<std::size_t> grid_layers = {2, 3};
    std::vector<std::size_t> grid_units = {50, 100, 200};
    Architecture architecture;
    TrainConfig train;

    WmfConfig wmf;
    ModelFormat wmf_format = ModelFormat::text;

    std::vector<std::size_t> ks = default_ks;
    bool coldstart = true;
    std::uint64_t random_seed = 0;

    // Execution only; not part of the digest.
    std::size_t threads = 1;
    std::string output_dir = "artifacts";
    bool verbose = false;

    /// Sets every seed (split, features, synth, training, factorization, random baseline).
    void set_seed(std::uint64_t seed);
    void set_threads(std::size_t n);

    /// Throws ConfigError on inconsistent settings.
    void validate() const;
    /// Digest of the canonical JSON of every result-affecting field.
    std::string digest() const;
};

/// Canonical document; `execution` adds threads, output_dir, and verbose.
nlohmann::json to_json(const ExperimentConfig& config, bool execution = false);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::string& path);

// Artifact file names inside the output directory.
namespace artifact {
inline constexpr const char* splits = "splits.json";
inline constexpr const char* features = "features.tsv";
inline constexpr const char* mlp_model = "mlp_model.json";
inline constexpr const char* wmf_model = "wmf_model.txt";
inline constexpr const char* report_mlp = "report_mlp.json";
inline constexpr const char* report_wmf = "report_wmf.json";
inline constexpr const char* report_random = "report_random.json";
inline constexpr const char* comparison = "comparison.json";
inline constexpr const char* failed = "FAILED";
}  // namespace artifact

/// Error raised by a pipeline stage; keeps the category of the cause.
class StageError : public Error {
public:
    StageError(std::string stage, ErrorCategory category, const std::string& message);
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Runs `fn`, rethrowing any plcont::Error as a StageError tagged `stage`.
template <typename Fn>
decltype(auto) in_stage(const std::string& stage, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, e.category(), e.what());
    } catch (const std::exception& e) {
        throw StageError(stage, ErrorCategory::data, e.what());
    }
}

// ---------------------------------------------------------------------------
// Stages

struct PreparedData {
    SplitCorpus split;
    std::optional<SynthData> synth;
};

/// Corpus from file (filtered, restricted to featured songs, split) or from
/// the generator (which fixes its own split).
PreparedData prepare_data(const ExperimentConfig& config);

/// Side data some feature kinds need.
struct FeatureContext {
    const SynthData* synth = nullptr;
    std::unordered_map<SongId, ArtistId> artists;  // for artist-level tags
};

/// Songs covered by a feature source, without computing the features.
std::unordered_set<SongId> covered_songs(const FeatureSource& source, const FeatureContext& context);

/// Every song of the split (training and withheld), in candidate order.
std::vector<SongId> split_songs(const SplitCorpus& split);

/// Raw features of one source for `songs`; throws MissingFeatureError when a
/// song has none. Codebooks are fitted on `development_songs` only.
FeatureMatrix raw_features(const FeatureSource& source, std::span<const SongId> songs,
                           std::span<const SongId> development_songs, std::uint64_t seed,
                           const FeatureContext& context);

/// Each source is computed, preprocessed with statistics of the training and
/// validation songs, and the results are concatenated.
FeatureMatrix build_features(const ExperimentConfig& config, const SplitCorpus& split,
                             const SynthData* synth = nullptr);

GridResult train_mlp(const ExperimentConfig& config, const SplitCorpus& split, const FeatureMatrix& features);

/// WMF on the training playlists with the validation songs folded in.
FactorModel train_wmf(const ExperimentConfig& config, const SplitCorpus& split);

/// Test-time view: validation folded into training, as the final models see it.
SplitCorpus evaluation_split(const SplitCorpus& split);

RowMatrix mlp_scores(const ClassifierModel& model, const FeatureMatrix& features, const EvaluationSet& set);
/// Zero for candidates outside the factorized songs.
RowMatrix wmf_candidate_scores(const FactorModel& model, const EvaluationSet& set);
RowMatrix random_scores(const EvaluationSet& set, std::uint64_t seed);

enum class ScoreSource { mlp, wmf, random };
ScoreSource parse_score_source(const std::string& name);
std::string to_string(ScoreSource source);

/// Report of one model on the test continuations, provenance filled in.
RankingReport make_report(const RowMatrix& scores, const EvaluationSet& set, const SplitCorpus& eval_split,
                          const std::string& name, const std::string& model, const std::string& features,
                          const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Artifact files

nlohmann::json mlp_artifact(const GridResult& grid, const std::string& config_digest);
void save_mlp_artifact(const std::string& path, const GridResult& grid, const std::string& config_digest);
ClassifierModel load_mlp_model(const std::string& path);

void save_report(const std::string& path, const RankingReport& report);
RankingReport load_report(const std::string& path);
void save_comparison(const std::string& path, const ComparisonTable& table, const std::string& config_digest);

/// Serialized JSON text written by every artifact writer (stable across runs).
std::string dump_json(const nlohmann::json& doc);
void write_text_file(const std::string& path, const std::string& text);
nlohmann::json read_json_file(const std::string& path);

struct PipelineResult {
    int exit_code = 0;
    std::string stage;    // failing stage, empty on success
    std::string message;
    std::vector<std::string> artifacts;  // files written, in order
    std::optional<ComparisonTable> comparison;
};

/// All stages into config.output_dir. On failure the written artifacts stay
/// and a FAILED marker records the stage and message.
PipelineResult run_pipeline(const ExperimentConfig& config);

}  // namespace plcont
