#include "plcont/split_manifest.hpp"

#include <fstream>

#include "plcont/digest.hpp"
#include "plcont/error.hpp"

namespace plcont {

namespace {

nlohmann::json entries_json(const std::vector<Entry>& entries) {
    auto out = nlohmann::json::array();
    for (const auto& e : entries) out.push_back({e.song, e.artist});
    return out;
}

std::vector<Entry> entries_from(const nlohmann::json& j) {
    std::vector<Entry> out;
    for (const auto& e : j) out.push_back({e.at(0).get<std::string>(), e.at(1).get<std::string>()});
    return out;
}

}  // namespace

nlohmann::json split_to_json(const SplitCorpus& split) {
    nlohmann::json doc;
    doc["seed"] = split.seed;
    doc["validation_merged"] = split.validation_merged;
    auto& playlists = doc["playlists"] = nlohmann::json::array();
    for (std::size_t i = 0; i < split.train.n_playlists(); ++i) {
        const auto& p = split.train.playlist(i);
        playlists.push_back({{"id", p.id},
                             {"train", entries_json(p.entries)},
                             {"validation", entries_json(split.validation.at(i))},
                             {"test", entries_json(split.test.at(i))}});
    }
    return doc;
}

SplitCorpus split_from_json(const nlohmann::json& doc) {
    SplitCorpus split;
    try {
        split.seed = doc.at("seed").get<std::uint64_t>();
        split.validation_merged = doc.value("validation_merged", false);
        std::vector<Playlist> train;
        for (const auto& p : doc.at("playlists")) {
            train.push_back({p.at("id").get<std::string>(), entries_from(p.at("train"))});
            split.validation.push_back(entries_from(p.at("validation")));
            split.test.push_back(entries_from(p.at("test")));
        }
        split.train = PlaylistCorpus(std::move(train));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed split manifest: ") + e.what());
    }
    return split;
}

std::string split_digest(const SplitCorpus& split) { return short_digest(split_to_json(split).dump()); }

nlohmann::json to_json(const FiveNumberSummary& s) {
    return {{"min", s.min}, {"q1", s.q1}, {"median", s.median}, {"q3", s.q3}, {"max", s.max}};
}

nlohmann::json to_json(const CorpusStatistics& stats) {
    auto part = [](const PartStatistics& p) {
        return nlohmann::json{{"songs_per_playlist", to_json(p.songs_per_playlist)},
                              {"artists_per_playlist", to_json(p.artists_per_playlist)},
                              {"song_frequency", to_json(p.song_frequency)}};
    };
    return {{"train", part(stats.train)}, {"test", part(stats.test)}};
}

nlohmann::json split_manifest(const SplitCorpus& split) {
    nlohmann::json doc = split_to_json(split);
    doc["digest"] = split_digest(split);
    doc["statistics"] = to_json(corpus_statistics(split));
    return doc;
}

void save_split_manifest(const std::string& path, const SplitCorpus& split, const std::string& config_digest) {
    nlohmann::json doc = split_manifest(split);
    if (!config_digest.empty()) doc["config_digest"] = config_digest;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << doc.dump(1) << '\n';
}

SplitCorpus load_split_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open split manifest '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("split manifest '" + path + "' is not valid JSON: " + e.what());
    }
    SplitCorpus split = split_from_json(doc);
    if (doc.contains("digest") && doc["digest"].get<std::string>() != split_digest(split))
        throw ValidationError("split manifest '" + path + "' does not match its digest");
    return split;
}

}  // namespace plcont
