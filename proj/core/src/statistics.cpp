#include "plcont/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace plcont {

double quantile(std::span<const double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

FiveNumberSummary summarize(std::vector<double> values) {
    if (values.empty()) return {};
    std::sort(values.begin(), values.end());
    return {values.front(), quantile(values, 0.25), quantile(values, 0.5), quantile(values, 0.75), values.back()};
}

PartStatistics part_statistics(const std::vector<std::vector<Entry>>& groups) {
    std::vector<double> songs, artists;
    std::unordered_map<SongId, std::size_t> frequency;
    for (const auto& group : groups) {
        if (group.empty()) continue;
        std::unordered_set<SongId> unique_songs;
        std::unordered_set<ArtistId> unique_artists;
        for (const auto& e : group) {
            unique_songs.insert(e.song);
            unique_artists.insert(e.artist);
        }
        songs.push_back(static_cast<double>(unique_songs.size()));
        artists.push_back(static_cast<double>(unique_artists.size()));
        for (const auto& s : unique_songs) ++frequency[s];
    }
    std::vector<double> freq;
    freq.reserve(frequency.size());
    for (const auto& [song, count] : frequency) freq.push_back(static_cast<double>(count));
    return {summarize(std::move(songs)), summarize(std::move(artists)), summarize(std::move(freq))};
}

CorpusStatistics corpus_statistics(const SplitCorpus& split) {
    std::vector<std::vector<Entry>> train;
    train.reserve(split.train.n_playlists());
    for (std::size_t i = 0; i < split.train.n_playlists(); ++i) {
        auto entries = split.train.playlist(i).entries;
        if (i < split.validation.size())
            entries.insert(entries.end(), split.validation[i].begin(), split.validation[i].end());
        train.push_back(std::move(entries));
    }
    return {part_statistics(train), part_statistics(split.test)};
}

}  // namespace plcont
