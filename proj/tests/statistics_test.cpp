#include <gtest/gtest.h>

#include <map>
#include <set>

#include "plcont/statistics.hpp"
#include "test_util.hpp"

using namespace plcont;

namespace {

// Quantile from the rational position (n - 1) * num / den, computed in integers.
double rational_quantile(std::vector<double> v, std::size_t num, std::size_t den) {
    std::sort(v.begin(), v.end());
    const std::size_t scaled = (v.size() - 1) * num;
    const std::size_t lo = scaled / den;
    const std::size_t rem = scaled % den;
    if (rem == 0) return v[lo];
    return v[lo] + (v[lo + 1] - v[lo]) * static_cast<double>(rem) / static_cast<double>(den);
}

}  // namespace

TEST(Statistics, HandComputedQuartiles) {
    const FiveNumberSummary s = summarize({4, 1, 3, 2});
    EXPECT_DOUBLE_EQ(s.min, 1.0);
    EXPECT_DOUBLE_EQ(s.q1, 1.75);
    EXPECT_DOUBLE_EQ(s.median, 2.5);
    EXPECT_DOUBLE_EQ(s.q3, 3.25);
    EXPECT_DOUBLE_EQ(s.max, 4.0);

    const FiveNumberSummary odd = summarize({5, 1, 9, 3, 7});
    EXPECT_DOUBLE_EQ(odd.q1, 3.0);
    EXPECT_DOUBLE_EQ(odd.median, 5.0);
    EXPECT_DOUBLE_EQ(odd.q3, 7.0);
}

TEST(Statistics, EmptyAndSingleton) {
    EXPECT_EQ(summarize({}), FiveNumberSummary{});
    const FiveNumberSummary one = summarize({7});
    EXPECT_EQ(one, (FiveNumberSummary{7, 7, 7, 7, 7}));
}

TEST(Statistics, QuantileMatchesRationalOracle) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(1 + rng() % 40);
        for (double& x : v) x = static_cast<double>(rng() % 100);
        const FiveNumberSummary s = summarize(v);
        EXPECT_NEAR(s.q1, rational_quantile(v, 1, 4), 1e-12);
        EXPECT_NEAR(s.median, rational_quantile(v, 1, 2), 1e-12);
        EXPECT_NEAR(s.q3, rational_quantile(v, 3, 4), 1e-12);
        EXPECT_EQ(s.min, *std::min_element(v.begin(), v.end()));
        EXPECT_EQ(s.max, *std::max_element(v.begin(), v.end()));
    }
}

TEST(Statistics, PartStatisticsBruteForce) {
    const PlaylistCorpus c = plcont::testing::random_corpus(20, 50, 5, 12, 17);
    std::vector<std::vector<Entry>> groups;
    for (const auto& p : c.playlists()) groups.push_back(p.entries);
    groups.push_back({});  // skipped
    const PartStatistics stats = part_statistics(groups);

    std::vector<double> songs, artists, freq;
    std::map<SongId, double> counts;
    for (const auto& p : c.playlists()) {
        std::set<std::string> a;
        for (const auto& e : p.entries) {
            a.insert(e.artist);
            counts[e.song] += 1;
        }
        songs.push_back(static_cast<double>(p.entries.size()));
        artists.push_back(static_cast<double>(a.size()));
    }
    for (const auto& [s, n] : counts) freq.push_back(n);
    EXPECT_EQ(stats.songs_per_playlist, summarize(songs));
    EXPECT_EQ(stats.artists_per_playlist, summarize(artists));
    EXPECT_EQ(stats.song_frequency, summarize(freq));
}

TEST(Statistics, TrainPartIncludesValidation) {
    const PlaylistCorpus c = plcont::testing::random_corpus(10, 40, 10, 10, 2);
    const SplitCorpus split = split_corpus(c, {0.2, 0.2, 1});
    const CorpusStatistics stats = corpus_statistics(split);
    EXPECT_EQ(stats.train.songs_per_playlist, (FiveNumberSummary{8, 8, 8, 8, 8}));
    EXPECT_EQ(stats.test.songs_per_playlist, (FiveNumberSummary{2, 2, 2, 2, 2}));
}
