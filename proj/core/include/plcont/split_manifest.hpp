#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "plcont/corpus.hpp"
#include "plcont/statistics.hpp"

namespace plcont {

/// Canonical JSON of the split: per playlist, its train / validation / test
/// (song, artist) entries, plus seed and merge flag.
nlohmann::json split_to_json(const SplitCorpus& split);
SplitCorpus split_from_json(const nlohmann::json& doc);

/// Digest of the canonical JSON; reports evaluated on the same split share it.
std::string split_digest(const SplitCorpus& split);

nlohmann::json to_json(const FiveNumberSummary& s);
nlohmann::json to_json(const CorpusStatistics& stats);

/// Manifest file written by `prepare`: the split, its digest, and the
/// descriptive statistics of both parts.
nlohmann::json split_manifest(const SplitCorpus& split);
void save_split_manifest(const std::string& path, const SplitCorpus& split, const std::string& config_digest = {});
SplitCorpus load_split_manifest(const std::string& path);

}  // namespace plcont
