#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace plcont {

using SongId = std::string;
using ArtistId = std::string;

struct Entry {
    SongId song;
    ArtistId artist;

    friend bool operator==(const Entry&, const Entry&) = default;
};

/// A hand-curated playlist. Treated as a set of songs: order is kept for
/// provenance but never used by the models.
struct Playlist {
    std::string id;
    std::vector<Entry> entries;

    friend bool operator==(const Playlist&, const Playlist&) = default;
};

/// Bijection between string ids and contiguous indices [0, size()), in
/// first-insertion order.
class IdIndex {
public:
    std::size_t insert(const std::string& id);
    std::optional<std::size_t> find(const std::string& id) const;
    std::size_t at(const std::string& id) const;
    bool contains(const std::string& id) const { return index_.contains(id); }
    const std::string& id(std::size_t i) const { return ids_[i]; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    std::size_t size() const noexcept { return ids_.size(); }

private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Playlists plus dense song and artist indices covering exactly the songs
/// and artists that occur in them.
class PlaylistCorpus {
public:
    PlaylistCorpus() = default;

    /// Throws ValidationError on an empty playlist or a song repeated within
    /// one playlist.
    explicit PlaylistCorpus(std::vector<Playlist> playlists);

    const std::vector<Playlist>& playlists() const noexcept { return playlists_; }
    const Playlist& playlist(std::size_t i) const { return playlists_.at(i); }
    std::size_t n_playlists() const noexcept { return playlists_.size(); }
    std::size_t n_songs() const noexcept { return songs_.size(); }
    std::size_t n_artists() const noexcept { return artists_.size(); }
    const IdIndex& songs() const noexcept { return songs_; }
    const IdIndex& artists() const noexcept { return artists_; }

    /// Song indices of one playlist, in entry order.
    std::vector<std::size_t> song_indices(std::size_t playlist) const;

    /// Artist of every song; the first artist seen wins if the input disagrees.
    std::unordered_map<SongId, ArtistId> song_artists() const;

private:
    std::vector<Playlist> playlists_;
    IdIndex songs_;
    IdIndex artists_;
};

struct FilterThresholds {
    std::size_t min_artists = 7;
    std::size_t max_per_artist = 2;
    std::size_t min_songs = 14;

    /// Looser preset used to select the development song set that feature
    /// extractors (codebooks) are fitted on.
    static constexpr FilterThresholds development() { return {5, 2, 10}; }
};

bool satisfies(const Playlist& playlist, const FilterThresholds& thresholds);

/// Keeps exactly the playlists that satisfy every threshold.
PlaylistCorpus filter_corpus(const PlaylistCorpus& corpus, const FilterThresholds& thresholds = {});

/// Drops songs outside `available`, then playlists left with fewer than
/// `min_remaining` songs.
PlaylistCorpus restrict_to_featured(const PlaylistCorpus& corpus,
                                    const std::unordered_set<SongId>& available,
                                    std::size_t min_remaining = 5);

struct SplitOptions {
    double test_fraction = 0.2;
    double validation_fraction = 0.2;
    std::uint64_t seed = 0;
};

/// Train playlists plus the withheld validation and test entries of each
/// playlist. validation[i] and test[i] belong to train.playlist(i).
struct SplitCorpus {
    PlaylistCorpus train;
    std::vector<std::vector<Entry>> validation;
    std::vector<std::vector<Entry>> test;
    bool validation_merged = false;
    std::uint64_t seed = 0;
};

struct SplitSizes {
    std::size_t train = 0;
    std::size_t validation = 0;
    std::size_t test = 0;
};

/// Number of songs withheld at each stage for a playlist of n songs:
/// round-half-up of the fraction with a floor of one song.
SplitSizes split_sizes(std::size_t n, double test_fraction, double validation_fraction);

/// Throws ValidationError when a playlist is too short to keep a training
/// remainder.
SplitCorpus split_corpus(const PlaylistCorpus& corpus, const SplitOptions& options);

/// Folds every validation list back into its training playlist.
SplitCorpus merge_validation(const SplitCorpus& split);

/// For every song in some test continuation, the number of training
/// playlists that contain it (0 for out-of-set songs).
std::map<SongId, std::size_t> occurrence_counts(const SplitCorpus& split);

// Corpus file: one `playlist_id<TAB>position<TAB>song_id<TAB>artist_id` record
// per line; optional header whose first field is `playlist_id`.
PlaylistCorpus read_corpus(std::istream& in);
PlaylistCorpus load_corpus(const std::string& path);
void write_corpus(std::ostream& out, const PlaylistCorpus& corpus);
void save_corpus(const std::string& path, const PlaylistCorpus& corpus);

}  // namespace plcont
