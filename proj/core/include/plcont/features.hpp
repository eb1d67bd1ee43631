#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "plcont/corpus.hpp"

namespace plcont {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Feature matrix

/// Dense song x dimension matrix keyed by song id, together with the list of
/// preprocessing steps that produced it.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::string kind, std::size_t dim);

    const std::string& kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t n_rows() const noexcept { return ids_.size(); }
    const IdIndex& ids() const noexcept { return ids_; }
    bool contains(const SongId& song) const { return ids_.contains(song); }

    /// Appends a row. Throws ShapeError on a length mismatch and
    /// ValidationError on a repeated song id.
    void add_row(const SongId& song, std::span<const double> values);

    std::span<const double> row(std::size_t i) const;
    std::span<const double> row(const SongId& song) const { return row(ids_.at(song)); }
    std::span<double> mutable_row(std::size_t i);

    Eigen::Map<const RowMatrix> matrix() const;

    const std::vector<std::string>& steps() const noexcept { return steps_; }
    void add_step(std::string step) { steps_.push_back(std::move(step)); }

    /// Rows left all-zero by a normalization step.
    const std::vector<SongId>& zero_rows() const noexcept { return zero_rows_; }
    void flag_zero_row(const SongId& song);

    /// Identity of the feature pipeline: kind, dimension, and steps. Two
    /// matrices are interchangeable as model inputs iff their manifests match.
    std::string manifest() const;

private:
    std::string kind_;
    std::size_t dim_ = 0;
    IdIndex ids_;
    std::vector<double> values_;
    std::vector<std::string> steps_;
    std::vector<SongId> zero_rows_;
};

enum class Preprocessing { standardize_l2, l1 };

std::string to_string(Preprocessing scheme);
Preprocessing parse_preprocessing(const std::string& name);

/// standardize_l2: per-dimension zero-mean, unit-variance scaling with
/// statistics taken from `training_songs` (all rows when empty), then row
/// L2 normalization. l1: row division by the L1 norm. Zero rows stay zero and
/// are flagged.
FeatureMatrix preprocess(const FeatureMatrix& m, Preprocessing scheme,
                         std::span<const SongId> training_songs = {});

/// Row-wise concatenation. All inputs must cover the same songs; row order
/// follows the first input.
FeatureMatrix concat(std::span<const FeatureMatrix> features);

/// Rows restricted to the given songs, in the given order.
FeatureMatrix select_rows(const FeatureMatrix& m, std::span<const SongId> songs);

// ---------------------------------------------------------------------------
// Timbre

inline constexpr std::size_t timbre_dim = 12;
using TimbreFrame = std::array<double, timbre_dim>;

struct TimbreFrames {
    SongId song;
    std::vector<TimbreFrame> frames;
};

std::vector<double> mean_timbre(const TimbreFrames& frames);

/// k x dim matrix of centroids.
struct Codebook {
    RowMatrix centroids;

    std::size_t k() const noexcept { return static_cast<std::size_t>(centroids.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(centroids.cols()); }

    /// Nearest centroid by Euclidean distance; ties go to the lowest index.
    std::size_t nearest(std::span<const double> point) const;
};

struct KMeansOptions {
    std::size_t k = 200;
    std::uint64_t seed = 0;
    double tolerance = 1e-6;
    std::size_t max_iterations = 300;
};

struct KMeansResult {
    Codebook codebook;
    /// Within-cluster sum of squares after each assignment step.
    std::vector<double> inertia;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Lloyd's k-means with k-means++ seeding over the rows of `points`.
/// Throws ValidationError when there are fewer distinct points than k.
KMeansResult fit_codebook(const RowMatrix& points, const KMeansOptions& options);

/// Pools the frames of every song and clusters them.
KMeansResult fit_codebook(std::span<const TimbreFrames> songs, const KMeansOptions& options);

/// Number of frames assigned to each centroid.
std::vector<double> vq_histogram(const TimbreFrames& frames, const Codebook& codebook);

// ---------------------------------------------------------------------------
// Social tags

struct TagAnnotation {
    std::string subject;  // song id, or artist id for artist-level tags
    std::vector<std::pair<std::string, double>> tags;
};

class EmbeddingDictionary {
public:
    EmbeddingDictionary() = default;
    explicit EmbeddingDictionary(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return vectors_.size(); }

    /// The first insertion fixes the dimension when it was not given.
    void insert(const std::string& word, std::vector<double> vector);
    const std::vector<double>* find(const std::string& word) const;

private:
    std::size_t dim_ = 0;
    std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// Relevance-weighted average of tag vectors; a multi-word tag is the mean of
/// its in-dictionary words. Tags without any known word are dropped and the
/// weights renormalized over the rest.
std::vector<double> tag_feature(const TagAnnotation& annotation, const EmbeddingDictionary& dictionary);

// ---------------------------------------------------------------------------
// Files

/// `song_id` followed by 12 reals per line; frames of a song are contiguous.
std::vector<TimbreFrames> read_timbre_frames(std::istream& in);
std::vector<TimbreFrames> load_timbre_frames(const std::string& path);

/// `subject<TAB>tag<TAB>weight` per line, grouped by subject in first-seen order.
std::vector<TagAnnotation> read_tags(std::istream& in);
std::vector<TagAnnotation> load_tags(const std::string& path);

/// `word` followed by the vector components per line.
EmbeddingDictionary read_embeddings(std::istream& in);
EmbeddingDictionary load_embeddings(const std::string& path);

struct ImportResult {
    FeatureMatrix features;
    std::size_t skipped = 0;  // rows whose song is not in `known`
};

/// Feature matrix file: `song_id` followed by `dim` reals per line. A leading
/// `# plcont-features` comment, when present, restores kind and steps.
/// Rows for songs outside `known` are skipped and counted (no filtering when
/// `known` is null).
ImportResult read_feature_matrix(std::istream& in, const std::string& kind,
                                 const std::unordered_set<SongId>* known = nullptr);
ImportResult import_precomputed(const std::string& path, const std::string& kind,
                                const std::unordered_set<SongId>* known = nullptr);

/// `comment`, when given, is written as a `#` line after the header.
void write_feature_matrix(std::ostream& out, const FeatureMatrix& m, std::string_view comment = {});
void save_feature_matrix(const std::string& path, const FeatureMatrix& m, std::string_view comment = {});

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace plcont
