#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "plcont/corpus.hpp"
#include "plcont/features.hpp"

namespace plcont {

/// Knobs of the planted-topic playlist generator.
struct SynthConfig {
    std::size_t n_playlists = 300;
    std::size_t n_songs = 2000;
    std::size_t n_topics = 10;
    std::size_t min_songs = 14;
    std::size_t max_songs = 20;
    std::size_t songs_per_artist = 4;
    std::size_t feature_dim = 16;
    double centroid_scale = 3.0;
    double feature_noise = 0.5;
    double coldstart_fraction = 0.1;
    double purity = 0.9;
    /// Song i of a topic, ranked by its feature distance to the topic
    /// centroid, is drawn with weight i^-exponent (0 = uniform).
    double popularity_exponent = 1.0;
    double test_fraction = 0.2;
    double validation_fraction = 0.2;
    /// Also emit two partial views of the topic (topic mod 2, topic div 2).
    bool complementary_families = false;
    std::uint64_t seed = 0;

    void validate() const;
};

nlohmann::json to_json(const SynthConfig& config);
/// Missing keys keep their defaults.
SynthConfig synth_config_from_json(const nlohmann::json& doc);

struct SynthData {
    PlaylistCorpus corpus;
    SplitCorpus split;
    FeatureMatrix features;               // kind "synth", every song
    std::vector<FeatureMatrix> families;  // "synth-a", "synth-b" when requested
    std::unordered_map<SongId, std::size_t> topic;
    std::vector<std::vector<double>> centroids;
    std::unordered_set<SongId> cold_songs;  // appear only in test continuations
    std::vector<std::size_t> dominant_topic;  // per playlist
};

/// Each playlist draws at least `purity` of its songs from its dominant topic;
/// features are topic centroid + Gaussian noise. Cold songs are placed only in
/// test continuations and warm test songs always occur in some training
/// playlist. Deterministic under the seed. Throws ConfigError when a playlist
/// cannot be filled.
SynthData generate(const SynthConfig& config);

}  // namespace plcont
