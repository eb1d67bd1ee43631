#include "plcont/interactions.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "plcont/error.hpp"

namespace plcont {

InteractionMatrix::InteractionMatrix(std::size_t n_rows, std::size_t n_cols, std::span<const WeightedPair> pairs,
                                     double weight_unobserved)
    : rows_(n_rows), cols_(n_cols), weight_unobserved_(weight_unobserved) {
    if (!(weight_unobserved > 0.0)) throw ValidationError("unobserved weight must be positive");
    bool uniform = true;
    for (const auto& p : pairs) {
        if (p.row >= n_rows || p.col >= n_cols)
            throw IndexError("pair (" + std::to_string(p.row) + ", " + std::to_string(p.col) + ") out of range");
        if (!(p.weight > 0.0) || !std::isfinite(p.weight)) throw ValidationError("observed weights must be positive");
        rows_[p.row].push_back({static_cast<std::uint32_t>(p.col), p.weight});
        cols_[p.col].push_back({static_cast<std::uint32_t>(p.row), p.weight});
        if (!weight_observed_) weight_observed_ = p.weight;
        else if (*weight_observed_ != p.weight) uniform = false;
    }
    if (!uniform) weight_observed_.reset();
    auto by_index = [](const Cell& a, const Cell& b) { return a.index < b.index; };
    auto same = [](const Cell& a, const Cell& b) { return a.index == b.index; };
    for (auto& r : rows_) {
        std::sort(r.begin(), r.end(), by_index);
        if (std::adjacent_find(r.begin(), r.end(), same) != r.end()) throw ValidationError("duplicate pair");
    }
    for (auto& c : cols_) std::sort(c.begin(), c.end(), by_index);
    n_pairs_ = pairs.size();
}

double InteractionMatrix::density() const {
    const double cells = static_cast<double>(n_rows()) * static_cast<double>(n_cols());
    return cells == 0.0 ? 0.0 : static_cast<double>(n_pairs_) / cells;
}

bool InteractionMatrix::contains(std::size_t r, std::size_t c) const {
    const auto& cells = rows_.at(r);
    auto it = std::lower_bound(cells.begin(), cells.end(), c,
                               [](const Cell& cell, std::size_t value) { return cell.index < value; });
    return it != cells.end() && it->index == c;
}

InteractionMatrix InteractionMatrix::reweighted(double weight_observed, double weight_unobserved) const {
    std::vector<WeightedPair> pairs;
    pairs.reserve(n_pairs_);
    for (std::size_t r = 0; r < rows_.size(); ++r)
        for (const auto& cell : rows_[r]) pairs.push_back({r, cell.index, weight_observed});
    return InteractionMatrix(n_rows(), n_cols(), pairs, weight_unobserved);
}

InteractionMatrix build_interactions(const PlaylistCorpus& train, std::size_t n_cols, double weight_observed,
                                     double weight_unobserved) {
    if (train.n_playlists() == 0) throw ValidationError("cannot build interactions from an empty corpus");
    std::vector<WeightedPair> pairs;
    for (std::size_t p = 0; p < train.n_playlists(); ++p)
        for (std::size_t s : train.song_indices(p)) pairs.push_back({p, s, weight_observed});
    return InteractionMatrix(train.n_playlists(), std::max(n_cols, train.n_songs()), pairs, weight_unobserved);
}

InteractionMatrix interactions_from_counts(std::size_t n_rows, std::size_t n_cols,
                                           std::span<const CountTriple> counts, double alpha) {
    std::vector<WeightedPair> pairs;
    pairs.reserve(counts.size());
    for (const auto& c : counts) {
        if (c.count < 0.0) throw ValidationError("negative play count");
        pairs.push_back({c.row, c.col, 1.0 + alpha * c.count});
    }
    return InteractionMatrix(n_rows, n_cols, pairs, 1.0);
}

TargetVector target_vector(const InteractionMatrix& m, std::size_t song) {
    if (song >= m.n_cols())
        throw IndexError("song index " + std::to_string(song) + " out of range (n_songs = " +
                         std::to_string(m.n_cols()) + ")");
    TargetVector out{song, std::vector<std::uint8_t>(m.n_rows(), 0)};
    for (const auto& cell : m.col(song)) out.bits[cell.index] = 1;
    return out;
}

}  // namespace plcont
