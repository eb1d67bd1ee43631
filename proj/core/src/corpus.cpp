#include "plcont/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "plcont/error.hpp"

namespace plcont {

std::size_t IdIndex::insert(const std::string& id) {
    auto [it, inserted] = index_.try_emplace(id, ids_.size());
    if (inserted) ids_.push_back(id);
    return it->second;
}

std::optional<std::size_t> IdIndex::find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t IdIndex::at(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw IndexError("unknown id '" + id + "'");
    return it->second;
}

PlaylistCorpus::PlaylistCorpus(std::vector<Playlist> playlists) : playlists_(std::move(playlists)) {
    for (const auto& playlist : playlists_) {
        if (playlist.entries.empty())
            throw ValidationError("playlist '" + playlist.id + "' has no entries");
        std::unordered_set<SongId> seen;
        for (const auto& entry : playlist.entries) {
            if (entry.song.empty()) throw ValidationError("empty song id in playlist '" + playlist.id + "'");
            if (!seen.insert(entry.song).second)
                throw ValidationError("song '" + entry.song + "' appears twice in playlist '" + playlist.id + "'");
            songs_.insert(entry.song);
            artists_.insert(entry.artist);
        }
    }
}

std::vector<std::size_t> PlaylistCorpus::song_indices(std::size_t playlist) const {
    const auto& entries = playlists_.at(playlist).entries;
    std::vector<std::size_t> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(*songs_.find(e.song));
    return out;
}

std::unordered_map<SongId, ArtistId> PlaylistCorpus::song_artists() const {
    std::unordered_map<SongId, ArtistId> out;
    for (const auto& playlist : playlists_)
        for (const auto& e : playlist.entries) out.try_emplace(e.song, e.artist);
    return out;
}

bool satisfies(const Playlist& playlist, const FilterThresholds& thresholds) {
    if (playlist.entries.size() < thresholds.min_songs) return false;
    std::unordered_map<ArtistId, std::size_t> per_artist;
    for (const auto& e : playlist.entries) {
        if (++per_artist[e.artist] > thresholds.max_per_artist) return false;
    }
    return per_artist.size() >= thresholds.min_artists;
}

PlaylistCorpus filter_corpus(const PlaylistCorpus& corpus, const FilterThresholds& thresholds) {
    std::vector<Playlist> kept;
    for (const auto& playlist : corpus.playlists())
        if (satisfies(playlist, thresholds)) kept.push_back(playlist);
    return PlaylistCorpus(std::move(kept));
}

PlaylistCorpus restrict_to_featured(const PlaylistCorpus& corpus,
                                    const std::unordered_set<SongId>& available,
                                    std::size_t min_remaining) {
    std::vector<Playlist> kept;
    for (const auto& playlist : corpus.playlists()) {
        Playlist reduced{playlist.id, {}};
        for (const auto& e : playlist.entries)
            if (available.contains(e.song)) reduced.entries.push_back(e);
        if (!reduced.entries.empty() && reduced.entries.size() >= min_remaining)
            kept.push_back(std::move(reduced));
    }
    return PlaylistCorpus(std::move(kept));
}

namespace {

std::size_t withheld_count(double fraction, std::size_t n) {
    if (fraction <= 0.0 || n == 0) return 0;
    auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5 + 1e-9));
    return std::max<std::size_t>(count, 1);
}

}  // namespace

SplitSizes split_sizes(std::size_t n, double test_fraction, double validation_fraction) {
    SplitSizes sizes;
    sizes.test = std::min(withheld_count(test_fraction, n), n);
    const std::size_t remaining = n - sizes.test;
    sizes.validation = std::min(withheld_count(validation_fraction, remaining), remaining);
    sizes.train = remaining - sizes.validation;
    return sizes;
}

SplitCorpus split_corpus(const PlaylistCorpus& corpus, const SplitOptions& options) {
    if (options.test_fraction < 0.0 || options.test_fraction >= 1.0 || options.validation_fraction < 0.0 ||
        options.validation_fraction >= 1.0)
        throw ConfigError("split fractions must lie in [0, 1)");

    std::mt19937_64 rng(options.seed);
    std::vector<Playlist> train;
    SplitCorpus split;
    split.seed = options.seed;
    train.reserve(corpus.n_playlists());

    for (const auto& playlist : corpus.playlists()) {
        const std::size_t n = playlist.entries.size();
        const SplitSizes sizes = split_sizes(n, options.test_fraction, options.validation_fraction);
        if (sizes.train == 0)
            throw ValidationError("playlist '" + playlist.id + "' with " + std::to_string(n) +
                                  " songs is too short to split");

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        // 0 = train, 1 = validation, 2 = test; entries keep their input order.
        std::vector<int> part(n, 0);
        for (std::size_t i = 0; i < sizes.test; ++i) part[order[i]] = 2;
        for (std::size_t i = sizes.test; i < sizes.test + sizes.validation; ++i) part[order[i]] = 1;

        Playlist kept{playlist.id, {}};
        std::vector<Entry> validation, test;
        for (std::size_t i = 0; i < n; ++i) {
            const Entry& e = playlist.entries[i];
            if (part[i] == 0) kept.entries.push_back(e);
            else if (part[i] == 1) validation.push_back(e);
            else test.push_back(e);
        }
        train.push_back(std::move(kept));
        split.validation.push_back(std::move(validation));
        split.test.push_back(std::move(test));
    }
    split.train = PlaylistCorpus(std::move(train));
    return split;
}

SplitCorpus merge_validation(const SplitCorpus& split) {
    std::vector<Playlist> merged = split.train.playlists();
    for (std::size_t i = 0; i < merged.size(); ++i) {
        const auto& extra = split.validation.at(i);
        merged[i].entries.insert(merged[i].entries.end(), extra.begin(), extra.end());
    }
    SplitCorpus out;
    out.train = PlaylistCorpus(std::move(merged));
    out.validation.assign(out.train.n_playlists(), {});
    out.test = split.test;
    out.validation_merged = true;
    out.seed = split.seed;
    return out;
}

std::map<SongId, std::size_t> occurrence_counts(const SplitCorpus& split) {
    std::vector<std::size_t> train_count(split.train.n_songs(), 0);
    for (std::size_t p = 0; p < split.train.n_playlists(); ++p)
        for (std::size_t s : split.train.song_indices(p)) ++train_count[s];

    std::map<SongId, std::size_t> counts;
    for (const auto& continuation : split.test) {
        for (const auto& e : continuation) {
            const auto idx = split.train.songs().find(e.song);
            counts[e.song] = idx ? train_count[*idx] : 0;
        }
    }
    return counts;
}

}  // namespace plcont
