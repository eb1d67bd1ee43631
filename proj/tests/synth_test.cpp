#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "plcont/error.hpp"
#include "plcont/split_manifest.hpp"
#include "plcont/synth.hpp"

namespace plcont {
namespace {

SynthConfig small_config(std::uint64_t seed = 0) {
    SynthConfig c;
    c.n_playlists = 60;
    c.n_songs = 400;
    c.n_topics = 5;
    c.seed = seed;
    return c;
}

TEST(Synth, DominantTopicShareMatchesPurity) {
    for (double purity : {1.0, 0.9, 0.75}) {
        auto cfg = small_config();
        cfg.purity = purity;
        const auto data = generate(cfg);
        for (std::size_t p = 0; p < data.corpus.n_playlists(); ++p) {
            const auto& entries = data.corpus.playlist(p).entries;
            std::size_t on_topic = 0;
            for (const auto& e : entries) on_topic += data.topic.at(e.song) == data.dominant_topic[p];
            const auto n = entries.size();
            const auto off = static_cast<std::size_t>(std::floor((1.0 - purity) * static_cast<double>(n) + 1e-9));
            EXPECT_EQ(on_topic, n - off);
        }
    }
}

TEST(Synth, PlaylistShapeAndSplitConsistency) {
    const auto cfg = small_config(2);
    const auto data = generate(cfg);
    ASSERT_EQ(data.corpus.n_playlists(), cfg.n_playlists);
    ASSERT_EQ(data.split.train.n_playlists(), cfg.n_playlists);
    for (std::size_t p = 0; p < cfg.n_playlists; ++p) {
        const auto& whole = data.corpus.playlist(p);
        EXPECT_GE(whole.entries.size(), cfg.min_songs);
        EXPECT_LE(whole.entries.size(), cfg.max_songs);
        EXPECT_TRUE(satisfies(whole, FilterThresholds{}));
        const auto sizes = split_sizes(whole.entries.size(), cfg.test_fraction, cfg.validation_fraction);
        EXPECT_EQ(data.split.train.playlist(p).entries.size(), sizes.train);
        EXPECT_EQ(data.split.validation[p].size(), sizes.validation);
        EXPECT_EQ(data.split.test[p].size(), sizes.test);
        std::multiset<std::string> parts, all;
        for (const auto& e : data.split.train.playlist(p).entries) parts.insert(e.song);
        for (const auto& e : data.split.validation[p]) parts.insert(e.song);
        for (const auto& e : data.split.test[p]) parts.insert(e.song);
        for (const auto& e : whole.entries) all.insert(e.song);
        EXPECT_EQ(parts, all);
    }
    EXPECT_EQ(data.features.n_rows(), data.corpus.n_songs());
    EXPECT_EQ(data.features.kind(), "synth");
}

TEST(Synth, ColdSongsOnlyInTestAndWarmTestSongsAreTrained) {
    const auto data = generate(small_config(3));
    ASSERT_FALSE(data.cold_songs.empty());
    const auto counts = occurrence_counts(data.split);
    std::set<std::string> train_or_validation;
    for (const auto& p : data.split.train.playlists())
        for (const auto& e : p.entries) train_or_validation.insert(e.song);
    for (const auto& v : data.split.validation)
        for (const auto& e : v) train_or_validation.insert(e.song);
    for (const auto& song : data.cold_songs) {
        EXPECT_FALSE(train_or_validation.contains(song));
        EXPECT_EQ(counts.at(song), 0u);
    }
    for (const auto& [song, count] : counts)
        if (!data.cold_songs.contains(song)) EXPECT_GT(count, 0u) << song;
}

TEST(Synth, NoColdStartPutsEveryTestSongInTraining) {
    auto cfg = small_config(4);
    cfg.coldstart_fraction = 0.0;
    const auto data = generate(cfg);
    EXPECT_TRUE(data.cold_songs.empty());
    for (const auto& [song, count] : occurrence_counts(data.split)) EXPECT_GT(count, 0u) << song;
}

TEST(Synth, NoiselessFeaturesEqualTheCentroid) {
    auto cfg = small_config(5);
    cfg.feature_noise = 0.0;
    const auto data = generate(cfg);
    for (std::size_t i = 0; i < data.features.n_rows(); ++i) {
        const auto& id = data.features.ids().id(i);
        const auto row = data.features.row(i);
        const auto& c = data.centroids[data.topic.at(id)];
        for (std::size_t j = 0; j < row.size(); ++j) EXPECT_EQ(row[j], c[j]);
    }
}

TEST(Synth, NearestCentroidRecoversTopics) {
    const auto data = generate(small_config(6));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.features.n_rows(); ++i) {
        const auto row = data.features.row(i);
        std::size_t best = 0;
        double best_d = INFINITY;
        for (std::size_t t = 0; t < data.centroids.size(); ++t) {
            double d = 0.0;
            for (std::size_t j = 0; j < row.size(); ++j) d += (row[j] - data.centroids[t][j]) * (row[j] - data.centroids[t][j]);
            if (d < best_d) best_d = d, best = t;
        }
        correct += best == data.topic.at(data.features.ids().id(i));
    }
    EXPECT_GE(static_cast<double>(correct), 0.99 * static_cast<double>(data.features.n_rows()));
}

TEST(Synth, ArtistCapHolds) {
    const auto data = generate(small_config(7));
    for (const auto& p : data.corpus.playlists()) {
        std::map<std::string, int> per_artist;
        for (const auto& e : p.entries) EXPECT_LE(++per_artist[e.artist], 2);
    }
}

TEST(Synth, DeterministicUnderSeed) {
    auto cfg = small_config(8);
    cfg.complementary_families = true;
    const auto a = generate(cfg), b = generate(cfg);
    EXPECT_EQ(a.corpus.playlists(), b.corpus.playlists());
    EXPECT_EQ(split_digest(a.split), split_digest(b.split));
    ASSERT_EQ(a.families.size(), 2u);
    for (std::size_t f = 0; f < 2; ++f) {
        EXPECT_TRUE(a.families[f].matrix() == b.families[f].matrix());
    }
    EXPECT_EQ(a.families[0].kind(), "synth-a");
    EXPECT_EQ(a.families[1].kind(), "synth-b");
    EXPECT_TRUE(a.features.matrix() == b.features.matrix());
    cfg.seed = 9;
    EXPECT_NE(split_digest(generate(cfg).split), split_digest(a.split));
}

TEST(Synth, FamiliesSeparateOnlyPartOfTheTopics) {
    auto cfg = small_config(10);
    cfg.n_topics = 4;
    cfg.feature_noise = 0.0;
    cfg.complementary_families = true;
    const auto data = generate(cfg);
    const auto& a = data.families[0];
    const auto& b = data.families[1];
    // Noise-free family A rows coincide exactly for topics of the same parity,
    // family B rows for topics in the same half.
    std::map<std::size_t, std::vector<double>> first_a, first_b;
    for (std::size_t i = 0; i < a.n_rows(); ++i) {
        const auto& id = a.ids().id(i);
        const std::size_t t = data.topic.at(id);
        const auto ra = a.row(id), rb = b.row(id);
        auto [ia, new_a] = first_a.try_emplace(t % 2, ra.begin(), ra.end());
        auto [ib, new_b] = first_b.try_emplace(t / 2, rb.begin(), rb.end());
        if (!new_a) EXPECT_TRUE(std::equal(ra.begin(), ra.end(), ia->second.begin()));
        if (!new_b) EXPECT_TRUE(std::equal(rb.begin(), rb.end(), ib->second.begin()));
    }
    EXPECT_EQ(first_a.size(), 2u);
    EXPECT_EQ(first_b.size(), 2u);
}

TEST(Synth, ConfigErrors) {
    auto cfg = small_config();
    cfg.purity = 0.0;
    EXPECT_THROW(generate(cfg), ConfigError);
    cfg = small_config();
    cfg.max_songs = 200;  // more than a topic holds
    EXPECT_THROW(generate(cfg), ConfigError);
    cfg = small_config();
    cfg.n_songs = 100;
    cfg.n_topics = 5;
    cfg.songs_per_artist = 20;  // one artist per topic: the per-artist cap makes playlists unfillable
    EXPECT_THROW(generate(cfg), ConfigError);
    cfg = small_config();
    cfg.min_songs = 30;
    cfg.max_songs = 20;
    EXPECT_THROW(generate(cfg), ConfigError);
}

TEST(Synth, ConfigJsonRoundTrip) {
    auto cfg = small_config(12);
    cfg.purity = 0.8;
    cfg.complementary_families = true;
    const auto back = synth_config_from_json(to_json(cfg));
    EXPECT_EQ(to_json(back), to_json(cfg));
    const auto defaults = synth_config_from_json(nlohmann::json::object());
    EXPECT_EQ(to_json(defaults), to_json(SynthConfig{}));
    EXPECT_THROW(synth_config_from_json({{"n_songs", "many"}}), ConfigError);
}

}  // namespace
}  // namespace plcont
