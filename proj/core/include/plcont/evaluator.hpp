#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plcont/corpus.hpp"
#include "plcont/features.hpp"

namespace plcont {

enum class Withheld { validation, test };

/// Everything needed to rank one split: the candidate songs S* (training
/// songs first, in training index order, then songs that only appear in the
/// withheld lists), and per playlist the candidates excluded from ranking
/// (its training songs) and the withheld candidates to retrieve.
class EvaluationSet {
public:
    explicit EvaluationSet(const SplitCorpus& split, Withheld which = Withheld::test);

    const IdIndex& candidates() const noexcept { return candidates_; }
    std::size_t n_candidates() const noexcept { return candidates_.size(); }
    std::size_t n_playlists() const noexcept { return excluded_.size(); }
    std::size_t n_training_songs() const noexcept { return n_training_songs_; }

    /// Sorted candidate indices of the playlist's training songs.
    const std::vector<std::uint32_t>& excluded(std::size_t playlist) const { return excluded_.at(playlist); }
    /// Candidate indices of the playlist's withheld songs.
    const std::vector<std::uint32_t>& withheld(std::size_t playlist) const { return withheld_.at(playlist); }

    /// Number of training playlists containing candidate c (0 for out-of-set songs).
    std::size_t occurrences(std::size_t candidate) const { return occurrences_.at(candidate); }

private:
    IdIndex candidates_;
    std::size_t n_training_songs_ = 0;
    std::vector<std::vector<std::uint32_t>> excluded_;
    std::vector<std::vector<std::uint32_t>> withheld_;
    std::vector<std::size_t> occurrences_;
};

/// Candidates of one playlist by descending score, ties by ascending
/// candidate index, with `excluded` (sorted) left out. Rank = position + 1.
std::vector<std::uint32_t> rank_candidates(std::span<const double> scores, std::span<const std::uint32_t> excluded);
std::vector<std::uint32_t> rank_candidates(const RowMatrix& scores, const EvaluationSet& set, std::size_t playlist);

struct SongRank {
    std::size_t playlist = 0;
    SongId song;
    std::size_t rank = 0;
    std::size_t occurrences = 0;
    /// Share of the playlist's withheld songs ranked at or above this one, over the rank.
    double precision = 0.0;
};

struct BucketRow {
    std::string label;
    std::size_t n = 0;
    double median_rank = 0.0;
    double map = 0.0;
    double recall_at_100 = 0.0;
};

struct RankingReport {
    std::vector<SongRank> per_song;
    std::size_t n_candidates = 0;
    double median_rank = 0.0;
    double map = 0.0;
    std::vector<std::pair<std::size_t, double>> recall_at;
    std::vector<BucketRow> bins;

    // Provenance, filled in by the caller.
    std::string name;
    std::string split_digest;
    std::string model;
    std::string features;
    std::string config_digest;

    /// Throws ConfigError when k was not evaluated.
    double recall(std::size_t k) const;
};

inline const std::vector<std::size_t> default_ks = {10, 30, 100};
inline const std::vector<std::size_t> default_bin_edges = {0, 1, 2, 3, 4, 5};

/// Ranks every withheld song of every playlist against `scores`
/// (n_playlists x n_candidates) and reduces to median rank, MAP, and
/// recall@k. Throws ConfigError when a playlist with withheld songs has no
/// candidates, NumericalError on non-finite scores.
RankingReport evaluate(const RowMatrix& scores, const EvaluationSet& set, std::span<const std::size_t> ks = default_ks);

/// Median rank, MAP, and recall@100 per occurrence bucket. `bin_edges` are
/// ascending lower bounds; the last bucket is open-ended ("5+").
std::vector<BucketRow> coldstart_report(const RankingReport& report, const std::map<SongId, std::size_t>& counts,
                                        std::span<const std::size_t> bin_edges = default_bin_edges);

/// Same buckets using the occurrence counts recorded in the report.
std::vector<BucketRow> coldstart_report(const RankingReport& report,
                                        std::span<const std::size_t> bin_edges = default_bin_edges);

struct ComparisonTable {
    std::vector<std::string> names;
    nlohmann::json document;
    std::string text;
};

/// Side-by-side metrics. Throws ValidationError if the reports were computed
/// on different splits.
ComparisonTable compare(std::span<const RankingReport> reports);

/// Median with the mean of the middle pair for even counts; 0 when empty.
double median(std::vector<double> values);

nlohmann::json to_json(const RankingReport& report);
RankingReport report_from_json(const nlohmann::json& doc);
/// Aligned plain-text rendering of the headline metrics and buckets.
std::string format_report(const RankingReport& report);

}  // namespace plcont
