#include "plcont/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "plcont/error.hpp"

namespace plcont {

EvaluationSet::EvaluationSet(const SplitCorpus& split, Withheld which) {
    const PlaylistCorpus& train = split.train;
    const auto& lists = which == Withheld::test ? split.test : split.validation;
    if (lists.size() != train.n_playlists()) throw ValidationError("split lists do not match the training playlists");

    for (const auto& id : train.songs().ids()) candidates_.insert(id);
    n_training_songs_ = candidates_.size();
    for (const auto& list : lists)
        for (const auto& e : list) candidates_.insert(e.song);

    occurrences_.assign(candidates_.size(), 0);
    excluded_.resize(train.n_playlists());
    withheld_.resize(train.n_playlists());
    for (std::size_t p = 0; p < train.n_playlists(); ++p) {
        for (std::size_t s : train.song_indices(p)) {
            excluded_[p].push_back(static_cast<std::uint32_t>(s));
            ++occurrences_[s];
        }
        std::sort(excluded_[p].begin(), excluded_[p].end());
        for (const auto& e : lists[p]) withheld_[p].push_back(static_cast<std::uint32_t>(candidates_.at(e.song)));
    }
}

std::vector<std::uint32_t> rank_candidates(std::span<const double> scores, std::span<const std::uint32_t> excluded) {
    std::vector<std::uint32_t> order;
    order.reserve(scores.size());
    auto skip = excluded.begin();
    for (std::uint32_t c = 0; c < scores.size(); ++c) {
        while (skip != excluded.end() && *skip < c) ++skip;
        if (skip != excluded.end() && *skip == c) continue;
        order.push_back(c);
    }
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    return order;
}

std::vector<std::uint32_t> rank_candidates(const RowMatrix& scores, const EvaluationSet& set, std::size_t playlist) {
    if (static_cast<std::size_t>(scores.cols()) != set.n_candidates())
        throw ShapeError("score matrix has " + std::to_string(scores.cols()) + " columns for " +
                         std::to_string(set.n_candidates()) + " candidates");
    const auto row = scores.row(static_cast<Eigen::Index>(playlist));
    return rank_candidates(std::span<const double>(row.data(), set.n_candidates()), set.excluded(playlist));
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

double RankingReport::recall(std::size_t k) const {
    for (const auto& [kk, value] : recall_at)
        if (kk == k) return value;
    throw ConfigError("recall@" + std::to_string(k) + " was not evaluated");
}

RankingReport evaluate(const RowMatrix& scores, const EvaluationSet& set, std::span<const std::size_t> ks) {
    if (static_cast<std::size_t>(scores.rows()) != set.n_playlists() ||
        static_cast<std::size_t>(scores.cols()) != set.n_candidates())
        throw ShapeError("score matrix is " + std::to_string(scores.rows()) + "x" + std::to_string(scores.cols()) +
                         ", expected " + std::to_string(set.n_playlists()) + "x" + std::to_string(set.n_candidates()));
    if (!scores.allFinite()) throw NumericalError("score matrix contains non-finite values");

    RankingReport report;
    report.n_candidates = set.n_candidates();
    const std::size_t n = set.n_candidates();

    for (std::size_t p = 0; p < set.n_playlists(); ++p) {
        const auto& withheld = set.withheld(p);
        if (withheld.empty()) continue;
        const auto& excluded = set.excluded(p);
        if (excluded.size() >= n) throw ConfigError("playlist " + std::to_string(p) + " has no candidates to rank");

        const double* row = scores.row(static_cast<Eigen::Index>(p)).data();
        std::vector<std::size_t> ranks;
        ranks.reserve(withheld.size());
        for (std::uint32_t target : withheld) {
            // 1 + candidates ordered strictly before the target.
            std::size_t ahead = 0;
            for (std::size_t c = 0; c < n; ++c)
                if (row[c] > row[target] || (row[c] == row[target] && c < target)) ++ahead;
            for (std::uint32_t c : excluded)
                if (row[c] > row[target] || (row[c] == row[target] && c < target)) --ahead;
            ranks.push_back(ahead + 1);
        }
        for (std::size_t i = 0; i < withheld.size(); ++i) {
            std::size_t hits = 0;
            for (std::size_t r : ranks) hits += r <= ranks[i] ? 1 : 0;
            report.per_song.push_back({p, set.candidates().id(withheld[i]), ranks[i], set.occurrences(withheld[i]),
                                       static_cast<double>(hits) / static_cast<double>(ranks[i])});
        }
    }

    std::vector<double> all_ranks;
    double precision_sum = 0.0;
    for (const auto& s : report.per_song) {
        all_ranks.push_back(static_cast<double>(s.rank));
        precision_sum += s.precision;
    }
    const double count = static_cast<double>(report.per_song.size());
    report.median_rank = median(all_ranks);
    report.map = report.per_song.empty() ? 0.0 : precision_sum / count;
    for (std::size_t k : ks) {
        std::size_t hits = 0;
        for (const auto& s : report.per_song) hits += s.rank <= k ? 1 : 0;
        report.recall_at.emplace_back(k, report.per_song.empty() ? 0.0 : static_cast<double>(hits) / count);
    }
    return report;
}

namespace {

std::vector<BucketRow> bucketize(const RankingReport& report, std::span<const std::size_t> edges,
                                 const std::function<std::size_t(const SongRank&)>& count_of) {
    if (edges.empty()) throw ConfigError("at least one bucket edge is required");
    if (!std::is_sorted(edges.begin(), edges.end()) ||
        std::adjacent_find(edges.begin(), edges.end()) != edges.end())
        throw ConfigError("bucket edges must be strictly ascending");

    std::vector<std::vector<const SongRank*>> members(edges.size());
    for (const auto& s : report.per_song) {
        const std::size_t c = count_of(s);
        auto it = std::upper_bound(edges.begin(), edges.end(), c);
        if (it == edges.begin()) continue;  // below the first edge
        members[static_cast<std::size_t>(it - edges.begin()) - 1].push_back(&s);
    }

    std::vector<BucketRow> rows;
    for (std::size_t b = 0; b < edges.size(); ++b) {
        BucketRow row;
        const bool last = b + 1 == edges.size();
        if (last) row.label = std::to_string(edges[b]) + "+";
        else if (edges[b + 1] == edges[b] + 1) row.label = std::to_string(edges[b]);
        else row.label = std::to_string(edges[b]) + "-" + std::to_string(edges[b + 1] - 1);
        row.n = members[b].size();
        if (row.n == 0) {
            row.median_rank = row.map = row.recall_at_100 = std::numeric_limits<double>::quiet_NaN();
        } else {
            std::vector<double> ranks;
            double precision = 0.0, hits = 0.0;
            for (const SongRank* s : members[b]) {
                ranks.push_back(static_cast<double>(s->rank));
                precision += s->precision;
                hits += s->rank <= 100 ? 1.0 : 0.0;
            }
            row.median_rank = median(std::move(ranks));
            row.map = precision / static_cast<double>(row.n);
            row.recall_at_100 = hits / static_cast<double>(row.n);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::vector<BucketRow> coldstart_report(const RankingReport& report, const std::map<SongId, std::size_t>& counts,
                                        std::span<const std::size_t> bin_edges) {
    return bucketize(report, bin_edges, [&](const SongRank& s) {
        auto it = counts.find(s.song);
        if (it == counts.end()) throw ValidationError("no occurrence count for song '" + s.song + "'");
        return it->second;
    });
}

std::vector<BucketRow> coldstart_report(const RankingReport& report, std::span<const std::size_t> bin_edges) {
    return bucketize(report, bin_edges, [](const SongRank& s) { return s.occurrences; });
}

namespace {

nlohmann::json number_or_null(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

double number_from(const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

std::string fixed(double v, int precision) {
    if (std::isnan(v)) return "-";
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.*f", precision, v);
    return buffer;
}

std::string pad(const std::string& s, std::size_t width, bool left = false) {
    if (s.size() >= width) return s;
    return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

}  // namespace

nlohmann::json to_json(const RankingReport& report) {
    nlohmann::json doc;
    doc["name"] = report.name;
    doc["split_digest"] = report.split_digest;
    doc["config_digest"] = report.config_digest;
    doc["model"] = report.model;
    doc["features"] = report.features;
    doc["precision_definition"] =
        "per withheld song: withheld songs of the same playlist ranked at or above it, divided by its rank";
    doc["n_candidates"] = report.n_candidates;
    doc["n_songs"] = report.per_song.size();
    doc["median_rank"] = report.median_rank;
    doc["map"] = report.map;
    auto& recall = doc["recall"] = nlohmann::json::array();
    for (const auto& [k, v] : report.recall_at) recall.push_back({{"k", k}, {"value", v}});
    auto& bins = doc["coldstart"] = nlohmann::json::array();
    for (const auto& b : report.bins)
        bins.push_back({{"bucket", b.label},
                        {"n", b.n},
                        {"median_rank", number_or_null(b.median_rank)},
                        {"map", number_or_null(b.map)},
                        {"recall_at_100", number_or_null(b.recall_at_100)}});
    auto& songs = doc["per_song"] = nlohmann::json::array();
    for (const auto& s : report.per_song)
        songs.push_back({s.playlist, s.song, s.rank, s.occurrences, s.precision});
    doc["table"] = format_report(report);
    return doc;
}

RankingReport report_from_json(const nlohmann::json& doc) {
    RankingReport report;
    try {
        report.name = doc.value("name", "");
        report.split_digest = doc.value("split_digest", "");
        report.config_digest = doc.value("config_digest", "");
        report.model = doc.value("model", "");
        report.features = doc.value("features", "");
        report.n_candidates = doc.at("n_candidates").get<std::size_t>();
        report.median_rank = doc.at("median_rank").get<double>();
        report.map = doc.at("map").get<double>();
        for (const auto& r : doc.at("recall")) report.recall_at.emplace_back(r.at("k").get<std::size_t>(), r.at("value").get<double>());
        for (const auto& b : doc.at("coldstart"))
            report.bins.push_back({b.at("bucket").get<std::string>(), b.at("n").get<std::size_t>(),
                                   number_from(b.at("median_rank")), number_from(b.at("map")),
                                   number_from(b.at("recall_at_100"))});
        for (const auto& s : doc.at("per_song"))
            report.per_song.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::string>(), s.at(2).get<std::size_t>(),
                                       s.at(3).get<std::size_t>(), s.at(4).get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed report: ") + e.what());
    }
    return report;
}

std::string format_report(const RankingReport& report) {
    std::ostringstream out;
    out << pad("metric", 14, true) << pad("value", 12) << '\n';
    out << pad("candidates", 14, true) << pad(std::to_string(report.n_candidates), 12) << '\n';
    out << pad("songs", 14, true) << pad(std::to_string(report.per_song.size()), 12) << '\n';
    out << pad("median rank", 14, true) << pad(fixed(report.median_rank, 1), 12) << '\n';
    out << pad("MAP", 14, true) << pad(fixed(100.0 * report.map, 2) + "%", 12) << '\n';
    for (const auto& [k, v] : report.recall_at)
        out << pad("recall@" + std::to_string(k), 14, true) << pad(fixed(100.0 * v, 2) + "%", 12) << '\n';
    if (!report.bins.empty()) {
        out << '\n'
            << pad("occurrences", 12, true) << pad("n", 8) << pad("med rank", 12) << pad("MAP", 10)
            << pad("recall@100", 12) << '\n';
        for (const auto& b : report.bins)
            out << pad(b.label, 12, true) << pad(std::to_string(b.n), 8) << pad(fixed(b.median_rank, 1), 12)
                << pad(std::isnan(b.map) ? "-" : fixed(100.0 * b.map, 2) + "%", 10)
                << pad(std::isnan(b.recall_at_100) ? "-" : fixed(100.0 * b.recall_at_100, 2) + "%", 12) << '\n';
    }
    return out.str();
}

ComparisonTable compare(std::span<const RankingReport> reports) {
    if (reports.empty()) throw ValidationError("no reports to compare");
    for (const auto& r : reports)
        if (r.split_digest != reports.front().split_digest)
            throw ValidationError("report '" + r.name + "' was evaluated on a different split (" + r.split_digest +
                                  " vs " + reports.front().split_digest + ")");

    ComparisonTable table;
    table.document["split_digest"] = reports.front().split_digest;
    auto& models = table.document["models"] = nlohmann::json::array();

    std::ostringstream out;
    out << pad("model", 16, true) << pad("med rank", 10) << pad("MAP", 9);
    for (const auto& [k, v] : reports.front().recall_at) out << pad("R@" + std::to_string(k), 9);
    out << '\n';
    for (const auto& r : reports) {
        table.names.push_back(r.name);
        nlohmann::json row = {{"name", r.name}, {"model", r.model}, {"features", r.features},
                              {"median_rank", r.median_rank}, {"map", r.map}};
        auto& recall = row["recall"] = nlohmann::json::object();
        out << pad(r.name, 16, true) << pad(fixed(r.median_rank, 1), 10) << pad(fixed(100.0 * r.map, 2) + "%", 9);
        for (const auto& [k, v] : r.recall_at) {
            recall[std::to_string(k)] = v;
            out << pad(fixed(100.0 * v, 2) + "%", 9);
        }
        out << '\n';
        auto& bins = row["coldstart"] = nlohmann::json::array();
        for (const auto& b : r.bins)
            bins.push_back({{"bucket", b.label}, {"n", b.n}, {"median_rank", number_or_null(b.median_rank)},
                            {"map", number_or_null(b.map)}, {"recall_at_100", number_or_null(b.recall_at_100)}});
        models.push_back(std::move(row));
    }

    if (!reports.front().bins.empty()) {
        out << '\n' << pad("recall@100", 16, true);
        for (const auto& b : reports.front().bins) out << pad(b.label, 9);
        out << '\n';
        for (const auto& r : reports) {
            out << pad(r.name, 16, true);
            for (const auto& b : r.bins)
                out << pad(std::isnan(b.recall_at_100) ? "-" : fixed(100.0 * b.recall_at_100, 2) + "%", 9);
            out << '\n';
        }
    }
    table.text = out.str();
    table.document["table"] = table.text;
    return table;
}

}  // namespace plcont
