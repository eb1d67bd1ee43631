#include "plcont/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "plcont/error.hpp"

namespace plcont {

void SynthConfig::validate() const {
    if (n_playlists == 0 || n_songs == 0 || n_topics == 0) throw ConfigError("synth sizes must be positive");
    if (n_topics > n_songs) throw ConfigError("more topics than songs");
    if (min_songs == 0 || min_songs > max_songs) throw ConfigError("invalid songs-per-playlist range");
    if (songs_per_artist == 0 || feature_dim == 0) throw ConfigError("invalid artist or feature size");
    if (feature_noise < 0.0) throw ConfigError("feature noise must be non-negative");
    if (coldstart_fraction < 0.0 || coldstart_fraction >= 1.0) throw ConfigError("coldstart fraction must lie in [0, 1)");
    if (purity <= 0.0 || purity > 1.0) throw ConfigError("purity must lie in (0, 1]");
    if (popularity_exponent < 0.0) throw ConfigError("popularity exponent must be non-negative");
}

nlohmann::json to_json(const SynthConfig& c) {
    return {{"n_playlists", c.n_playlists},
            {"n_songs", c.n_songs},
            {"n_topics", c.n_topics},
            {"min_songs", c.min_songs},
            {"max_songs", c.max_songs},
            {"songs_per_artist", c.songs_per_artist},
            {"feature_dim", c.feature_dim},
            {"centroid_scale", c.centroid_scale},
            {"feature_noise", c.feature_noise},
            {"coldstart_fraction", c.coldstart_fraction},
            {"purity", c.purity},
            {"popularity_exponent", c.popularity_exponent},
            {"test_fraction", c.test_fraction},
            {"validation_fraction", c.validation_fraction},
            {"complementary_families", c.complementary_families},
            {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const nlohmann::json& doc) {
    SynthConfig c;
    try {
        c.n_playlists = doc.value("n_playlists", c.n_playlists);
        c.n_songs = doc.value("n_songs", c.n_songs);
        c.n_topics = doc.value("n_topics", c.n_topics);
        c.min_songs = doc.value("min_songs", c.min_songs);
        c.max_songs = doc.value("max_songs", c.max_songs);
        c.songs_per_artist = doc.value("songs_per_artist", c.songs_per_artist);
        c.feature_dim = doc.value("feature_dim", c.feature_dim);
        c.centroid_scale = doc.value("centroid_scale", c.centroid_scale);
        c.feature_noise = doc.value("feature_noise", c.feature_noise);
        c.coldstart_fraction = doc.value("coldstart_fraction", c.coldstart_fraction);
        c.purity = doc.value("purity", c.purity);
        c.popularity_exponent = doc.value("popularity_exponent", c.popularity_exponent);
        c.test_fraction = doc.value("test_fraction", c.test_fraction);
        c.validation_fraction = doc.value("validation_fraction", c.validation_fraction);
        c.complementary_families = doc.value("complementary_families", c.complementary_families);
        c.seed = doc.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad synth config: ") + e.what());
    }
    return c;
}

namespace {

std::string numbered(char prefix, std::size_t i, int width) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%c%0*zu", prefix, width, i);
    return buffer;
}

int digits(std::size_t n) { return static_cast<int>(std::to_string(n > 0 ? n - 1 : 0).size()); }

// Popularity-weighted draw over a fixed song pool.
class Pool {
public:
    Pool() = default;
    Pool(std::vector<std::size_t> songs, const std::vector<double>& weight) : songs_(std::move(songs)) {
        double acc = 0.0;
        for (std::size_t s : songs_) cumulative_.push_back(acc += weight[s]);
    }
    bool empty() const { return songs_.empty(); }
    std::size_t size() const { return songs_.size(); }
    std::size_t draw(std::mt19937_64& rng) const {
        std::uniform_real_distribution<double> u(0.0, cumulative_.back());
        const double x = u(rng);
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
        if (it == cumulative_.end()) --it;
        return songs_[static_cast<std::size_t>(it - cumulative_.begin())];
    }

private:
    std::vector<std::size_t> songs_;
    std::vector<double> cumulative_;
};

struct Slot {
    std::size_t topic;
    int part;  // 0 train, 1 validation, 2 test
};

}  // namespace

SynthData generate(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t n_songs = cfg.n_songs;
    const std::size_t n_topics = cfg.n_topics;

    // Songs are dealt to topics round-robin; artists group consecutive songs of a topic.
    std::vector<std::vector<std::size_t>> topic_songs(n_topics);
    std::vector<std::size_t> song_topic(n_songs);
    for (std::size_t s = 0; s < n_songs; ++s) {
        song_topic[s] = s % n_topics;
        topic_songs[s % n_topics].push_back(s);
    }
    const int song_width = digits(n_songs);
    std::vector<std::string> song_id(n_songs), artist_id(n_songs);
    for (std::size_t t = 0; t < n_topics; ++t)
        for (std::size_t i = 0; i < topic_songs[t].size(); ++i) {
            const std::size_t s = topic_songs[t][i];
            song_id[s] = numbered('s', s, song_width);
            artist_id[s] = numbered('t', t, digits(n_topics)) + numbered('a', i / cfg.songs_per_artist, 3);
        }
    if (cfg.max_songs > topic_songs.back().size())
        throw ConfigError("playlists of " + std::to_string(cfg.max_songs) + " songs exceed the topic population of " +
                          std::to_string(topic_songs.back().size()));

    SynthData data;
    const std::size_t dim = cfg.feature_dim;
    auto random_vector = [&](double scale) {
        std::vector<double> v(dim);
        for (double& x : v) x = scale * gauss(rng);
        return v;
    };
    for (std::size_t t = 0; t < n_topics; ++t) data.centroids.push_back(random_vector(cfg.centroid_scale));

    std::vector<std::vector<double>> noise(n_songs);
    std::vector<double> noise_norm(n_songs);
    for (std::size_t s = 0; s < n_songs; ++s) {
        noise[s] = random_vector(cfg.feature_noise);
        double sq = 0.0;
        for (double x : noise[s]) sq += x * x;
        noise_norm[s] = std::sqrt(sq);
    }

    // Songs closest to their centroid are the most popular.
    std::vector<double> weight(n_songs, 1.0);
    for (const auto& songs : topic_songs) {
        std::vector<std::size_t> by_distance = songs;
        std::stable_sort(by_distance.begin(), by_distance.end(),
                         [&](std::size_t a, std::size_t b) { return noise_norm[a] < noise_norm[b]; });
        for (std::size_t r = 0; r < by_distance.size(); ++r)
            weight[by_distance[r]] = std::pow(static_cast<double>(r + 1), -cfg.popularity_exponent);
    }

    std::vector<bool> cold(n_songs, false);
    for (const auto& songs : topic_songs) {
        std::vector<std::size_t> shuffled = songs;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto n_cold = static_cast<std::size_t>(std::floor(cfg.coldstart_fraction * static_cast<double>(songs.size()) + 0.5));
        for (std::size_t i = 0; i < n_cold; ++i) cold[shuffled[i]] = true;
    }

    std::vector<Pool> warm_pool(n_topics);
    for (std::size_t t = 0; t < n_topics; ++t) {
        std::vector<std::size_t> warm;
        for (std::size_t s : topic_songs[t])
            if (!cold[s]) warm.push_back(s);
        warm_pool[t] = Pool(std::move(warm), weight);
        if (warm_pool[t].empty()) throw ConfigError("topic " + std::to_string(t) + " has no warm songs");
    }

    // Slot layout: which part each song goes to, and from which topic it is drawn.
    std::vector<std::vector<Slot>> layout(cfg.n_playlists);
    std::uniform_int_distribution<std::size_t> length(cfg.min_songs, cfg.max_songs);
    std::uniform_int_distribution<std::size_t> other_topic(0, n_topics > 1 ? n_topics - 2 : 0);
    data.dominant_topic.resize(cfg.n_playlists);
    for (std::size_t p = 0; p < cfg.n_playlists; ++p) {
        const std::size_t topic = p % n_topics;
        data.dominant_topic[p] = topic;
        const std::size_t n = length(rng);
        const SplitSizes sizes = split_sizes(n, cfg.test_fraction, cfg.validation_fraction);
        if (sizes.train == 0) throw ConfigError("synth playlists too short to split");
        const auto n_off = n_topics > 1 ? static_cast<std::size_t>(std::floor((1.0 - cfg.purity) * static_cast<double>(n) + 1e-9)) : 0;
        std::vector<Slot> slots;
        for (std::size_t i = 0; i < n; ++i) {
            const int part = i < sizes.train ? 0 : (i < sizes.train + sizes.validation ? 1 : 2);
            slots.push_back({topic, part});
        }
        std::vector<std::size_t> positions(n);
        std::iota(positions.begin(), positions.end(), 0);
        std::shuffle(positions.begin(), positions.end(), rng);
        for (std::size_t i = 0; i < n_off; ++i) {
            std::size_t t = other_topic(rng);
            if (t >= topic) ++t;
            slots[positions[i]].topic = t;
        }
        layout[p] = std::move(slots);
    }

    std::vector<std::vector<std::size_t>> drawn(cfg.n_playlists);
    std::vector<std::unordered_map<std::string, std::size_t>> per_artist(cfg.n_playlists);
    auto fill = [&](std::size_t p, const Slot& slot, const Pool& pool) {
        for (int attempt = 0; attempt < 10000; ++attempt) {
            const std::size_t s = pool.draw(rng);
            if (std::find(drawn[p].begin(), drawn[p].end(), s) != drawn[p].end()) continue;
            if (per_artist[p][artist_id[s]] >= 2) continue;
            drawn[p].push_back(s);
            ++per_artist[p][artist_id[s]];
            return s;
        }
        throw ConfigError("cannot draw a song for playlist " + std::to_string(p) + " from topic " +
                          std::to_string(slot.topic));
    };

    std::vector<std::vector<Entry>> train(cfg.n_playlists), validation(cfg.n_playlists), test(cfg.n_playlists);
    std::vector<bool> in_train(n_songs, false);
    for (std::size_t p = 0; p < cfg.n_playlists; ++p) {
        for (const Slot& slot : layout[p]) {
            if (slot.part == 2) continue;
            const std::size_t s = fill(p, slot, warm_pool[slot.topic]);
            if (slot.part == 0) {
                in_train[s] = true;
                train[p].push_back({song_id[s], artist_id[s]});
            } else {
                validation[p].push_back({song_id[s], artist_id[s]});
            }
        }
    }

    std::vector<Pool> test_pool(n_topics);
    for (std::size_t t = 0; t < n_topics; ++t) {
        std::vector<std::size_t> eligible;
        for (std::size_t s : topic_songs[t])
            if (cold[s] || in_train[s]) eligible.push_back(s);
        test_pool[t] = Pool(std::move(eligible), weight);
    }
    for (std::size_t p = 0; p < cfg.n_playlists; ++p) {
        for (const Slot& slot : layout[p]) {
            if (slot.part != 2) continue;
            const std::size_t s = fill(p, slot, test_pool[slot.topic]);
            test[p].push_back({song_id[s], artist_id[s]});
            if (cold[s]) data.cold_songs.insert(song_id[s]);
        }
    }

    std::vector<Playlist> full, train_playlists;
    const int playlist_width = digits(cfg.n_playlists);
    for (std::size_t p = 0; p < cfg.n_playlists; ++p) {
        const std::string id = numbered('p', p, playlist_width);
        Playlist whole{id, train[p]};
        whole.entries.insert(whole.entries.end(), validation[p].begin(), validation[p].end());
        whole.entries.insert(whole.entries.end(), test[p].begin(), test[p].end());
        std::shuffle(whole.entries.begin(), whole.entries.end(), rng);
        full.push_back(std::move(whole));
        train_playlists.push_back({id, std::move(train[p])});
    }
    data.corpus = PlaylistCorpus(std::move(full));
    data.split.train = PlaylistCorpus(std::move(train_playlists));
    data.split.validation = std::move(validation);
    data.split.test = std::move(test);
    data.split.seed = cfg.seed;

    // Features for every song of the corpus, in corpus index order.
    data.features = FeatureMatrix("synth", dim);
    std::vector<std::size_t> present;
    for (const auto& id : data.corpus.songs().ids()) {
        const auto s = static_cast<std::size_t>(std::stoul(id.substr(1)));
        present.push_back(s);
        std::vector<double> row = data.centroids[song_topic[s]];
        for (std::size_t j = 0; j < dim; ++j) row[j] += noise[s][j];
        data.features.add_row(id, row);
        data.topic[id] = song_topic[s];
    }

    if (cfg.complementary_families) {
        const std::size_t groups_a = std::min<std::size_t>(2, n_topics);
        const std::size_t groups_b = (n_topics + groups_a - 1) / groups_a;
        std::vector<std::vector<double>> centers_a, centers_b;
        for (std::size_t g = 0; g < groups_a; ++g) centers_a.push_back(random_vector(cfg.centroid_scale));
        for (std::size_t g = 0; g < groups_b; ++g) centers_b.push_back(random_vector(cfg.centroid_scale));
        FeatureMatrix a("synth-a", dim), b("synth-b", dim);
        for (std::size_t s : present) {
            std::vector<double> row_a = centers_a[song_topic[s] % groups_a];
            std::vector<double> row_b = centers_b[song_topic[s] / groups_a];
            for (std::size_t j = 0; j < dim; ++j) {
                row_a[j] += cfg.feature_noise * gauss(rng);
                row_b[j] += cfg.feature_noise * gauss(rng);
            }
            a.add_row(song_id[s], row_a);
            b.add_row(song_id[s], row_b);
        }
        data.families.push_back(std::move(a));
        data.families.push_back(std::move(b));
    }
    return data;
}

}  // namespace plcont
