#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "plcont/corpus.hpp"

namespace plcont {

/// One observed (row, column) cell as seen from either side, with its weight.
struct Cell {
    std::uint32_t index;  // column index in a row list, row index in a column list
    double weight;
};

struct WeightedPair {
    std::size_t row;
    std::size_t col;
    double weight;
};

/// Sparse binary playlist x song matrix. Observed cells carry their own
/// weight; every unobserved cell shares `weight_unobserved`. Immutable after
/// construction; both row and column adjacency are kept for ALS sweeps.
class InteractionMatrix {
public:
    InteractionMatrix() = default;

    /// Throws IndexError for out-of-range indices and ValidationError for
    /// duplicate pairs or non-positive weights.
    InteractionMatrix(std::size_t n_rows, std::size_t n_cols, std::span<const WeightedPair> pairs,
                      double weight_unobserved = 1.0);

    std::size_t n_rows() const noexcept { return rows_.size(); }
    std::size_t n_cols() const noexcept { return cols_.size(); }
    std::size_t n_playlists() const noexcept { return n_rows(); }
    std::size_t n_songs() const noexcept { return n_cols(); }
    std::size_t n_pairs() const noexcept { return n_pairs_; }
    double density() const;

    /// Shared observed weight, or nullopt when observed weights differ
    /// (e.g. count-derived confidences).
    std::optional<double> weight_observed() const noexcept { return weight_observed_; }
    double weight_unobserved() const noexcept { return weight_unobserved_; }

    std::span<const Cell> row(std::size_t r) const { return rows_.at(r); }
    std::span<const Cell> col(std::size_t c) const { return cols_.at(c); }
    bool contains(std::size_t r, std::size_t c) const;

    /// Same pattern with every observed weight replaced.
    InteractionMatrix reweighted(double weight_observed, double weight_unobserved) const;

private:
    std::vector<std::vector<Cell>> rows_;
    std::vector<std::vector<Cell>> cols_;
    std::size_t n_pairs_ = 0;
    std::optional<double> weight_observed_;
    double weight_unobserved_ = 1.0;
};

/// Membership matrix of a training corpus. Columns follow the corpus song
/// index; `n_cols` may exceed it to append never-observed (out-of-set) songs.
InteractionMatrix build_interactions(const PlaylistCorpus& train, std::size_t n_cols = 0,
                                     double weight_observed = 2.0, double weight_unobserved = 1.0);

struct CountTriple {
    std::size_t row;
    std::size_t col;
    double count;
};

/// Implicit-feedback matrix from play counts, confidence 1 + alpha * count.
InteractionMatrix interactions_from_counts(std::size_t n_rows, std::size_t n_cols,
                                           std::span<const CountTriple> counts, double alpha = 1.0);

/// Column of the matrix: the playlists a song belongs to.
struct TargetVector {
    std::size_t song_index = 0;
    std::vector<std::uint8_t> bits;
};

TargetVector target_vector(const InteractionMatrix& m, std::size_t song);

}  // namespace plcont
