#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "plcont/error.hpp"
#include "plcont/evaluator.hpp"
#include "test_util.hpp"

namespace plcont {
namespace {

using testing::make_playlist;

/// A split over songs "c0".."c<n-1>" where every song is either in some
/// training playlist or withheld somewhere, so S* has exactly n songs.
SplitCorpus random_split(std::size_t n_playlists, std::size_t n_songs, std::mt19937_64& rng) {
    std::vector<std::string> pool;
    for (std::size_t i = 0; i < n_songs; ++i) pool.push_back("c" + std::to_string(i));
    std::vector<Playlist> train;
    std::vector<std::vector<Entry>> test(n_playlists);
    std::set<std::string> covered;
    for (std::size_t p = 0; p < n_playlists; ++p) {
        std::shuffle(pool.begin(), pool.end(), rng);
        const std::size_t t = 2 + rng() % 5, w = 1 + rng() % 4;
        Playlist pl{"p" + std::to_string(p), {}};
        for (std::size_t i = 0; i < t; ++i) pl.entries.push_back({pool[i], "a"});
        for (std::size_t i = t; i < t + w; ++i) test[p].push_back({pool[i], "a"});
        for (std::size_t i = 0; i < t + w; ++i) covered.insert(pool[i]);
        train.push_back(std::move(pl));
    }
    for (const auto& s : pool)
        if (!covered.contains(s)) test[0].push_back({s, "a"});
    SplitCorpus split;
    split.train = PlaylistCorpus(std::move(train));
    split.test = std::move(test);
    split.validation.assign(n_playlists, {});
    return split;
}

struct OracleSong {
    std::size_t rank;
    double precision;
};

/// Full sort of each playlist's non-training candidates, by song id lookup.
std::vector<OracleSong> oracle(const SplitCorpus& split, const EvaluationSet& set, const RowMatrix& scores) {
    std::vector<OracleSong> out;
    for (std::size_t p = 0; p < split.train.n_playlists(); ++p) {
        std::set<std::string> train_songs;
        for (const auto& e : split.train.playlist(p).entries) train_songs.insert(e.song);
        std::vector<std::size_t> order;
        for (std::size_t c = 0; c < set.n_candidates(); ++c)
            if (!train_songs.contains(set.candidates().id(c))) order.push_back(c);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return scores(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(a)) >
                   scores(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(b));
        });
        std::vector<std::size_t> ranks;
        for (const auto& e : split.test[p]) {
            const auto c = set.candidates().at(e.song);
            ranks.push_back(static_cast<std::size_t>(std::find(order.begin(), order.end(), c) - order.begin()) + 1);
        }
        for (std::size_t r : ranks) {
            std::size_t above = 0;
            for (std::size_t q : ranks) above += q <= r;
            out.push_back({r, static_cast<double>(above) / static_cast<double>(r)});
        }
    }
    return out;
}

RowMatrix tied_scores(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    RowMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<double>(rng() % 5);
    return m;
}

TEST(RankCandidates, OrdersByScoreThenIndex) {
    const std::vector<double> s = {0.9, 0.1, 0.5};
    EXPECT_EQ(rank_candidates(s, {}), (std::vector<std::uint32_t>{0, 2, 1}));
    const std::vector<double> tied = {0.5, 0.7, 0.5, 0.7};
    EXPECT_EQ(rank_candidates(tied, {}), (std::vector<std::uint32_t>{1, 3, 0, 2}));
    const std::vector<std::uint32_t> excluded = {1};
    EXPECT_EQ(rank_candidates(tied, excluded), (std::vector<std::uint32_t>{3, 0, 2}));
}

TEST(EvaluationSet, TrainingSongsComeFirst) {
    SplitCorpus split;
    split.train = PlaylistCorpus({make_playlist("p0", {"a", "b"}), make_playlist("p1", {"b", "c"})});
    split.test = {{{"x", "ax"}, {"c", "a_c"}}, {{"a", "a_a"}}};
    split.validation.assign(2, {});
    EvaluationSet set(split);
    ASSERT_EQ(set.n_candidates(), 4u);
    EXPECT_EQ(set.n_training_songs(), 3u);
    EXPECT_EQ(set.candidates().id(3), "x");
    EXPECT_EQ(set.occurrences(set.candidates().at("b")), 2u);
    EXPECT_EQ(set.occurrences(3), 0u);
    EXPECT_EQ(set.excluded(0), (std::vector<std::uint32_t>{0, 1}));
    EXPECT_EQ(set.withheld(0), (std::vector<std::uint32_t>{3, 2}));
}

TEST(Evaluate, HandComputedPlaylist) {
    // Ten candidates; the two withheld songs land at ranks 1 and 3.
    // Other candidates live in a second playlist with no withheld songs.
    SplitCorpus split;
    split.train = PlaylistCorpus({make_playlist("p", {"t0", "t1", "t2"}), make_playlist("q", {"o0", "o1", "o2", "o3", "o4"})});
    split.test = {{{"w0", "a"}, {"w1", "a"}}, {}};
    split.validation.assign(2, {});
    EvaluationSet set(split);
    ASSERT_EQ(set.n_candidates(), 10u);

    RowMatrix scores = RowMatrix::Zero(2, 10);
    scores(0, set.candidates().at("w0")) = 9.0;
    scores(0, set.candidates().at("o0")) = 8.0;
    scores(0, set.candidates().at("w1")) = 7.0;
    scores(0, set.candidates().at("t0")) = 100.0;  // excluded, must not count
    const std::vector<std::size_t> ks = {1, 2, 3, 10};
    const auto report = evaluate(scores, set, ks);
    ASSERT_EQ(report.per_song.size(), 2u);
    EXPECT_EQ(report.per_song[0].rank, 1u);
    EXPECT_EQ(report.per_song[1].rank, 3u);
    EXPECT_DOUBLE_EQ(report.per_song[0].precision, 1.0);
    EXPECT_DOUBLE_EQ(report.per_song[1].precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(report.map, (1.0 + 2.0 / 3.0) / 2.0);
    EXPECT_DOUBLE_EQ(report.median_rank, 2.0);
    EXPECT_DOUBLE_EQ(report.recall(1), 0.5);
    EXPECT_DOUBLE_EQ(report.recall(2), 0.5);
    EXPECT_DOUBLE_EQ(report.recall(3), 1.0);
    EXPECT_THROW((void)report.recall(5), ConfigError);
}

TEST(Evaluate, RankBeyondKDoesNotCount) {
    SplitCorpus split;
    split.train = PlaylistCorpus({testing::numbered_playlist("p", 3, "x"), testing::numbered_playlist("q", 200, "t")});
    split.test = {{{"w", "a"}}, {}};
    split.validation.assign(2, {});
    EvaluationSet set(split);
    RowMatrix scores = RowMatrix::Zero(2, static_cast<Eigen::Index>(set.n_candidates()));
    // 149 training songs of q outrank w for playlist p.
    for (std::size_t i = 0; i < 149; ++i) scores(0, set.candidates().at("t" + std::to_string(i))) = 1.0;
    scores(0, set.candidates().at("w")) = 0.5;
    const std::vector<std::size_t> ks = {100, 150};
    const auto report = evaluate(scores, set, ks);
    EXPECT_EQ(report.per_song[0].rank, 150u);
    EXPECT_EQ(report.recall(100), 0.0);
    EXPECT_EQ(report.recall(150), 1.0);
}

TEST(Evaluate, MatchesBruteForceOnRandomTiedInstances) {
    std::mt19937_64 rng(11);
    const std::vector<std::size_t> ks = {1, 3, 5, 10, 20};
    for (int trial = 0; trial < 100; ++trial) {
        const auto split = random_split(4, 20, rng);
        EvaluationSet set(split);
        ASSERT_EQ(set.n_candidates(), 20u);
        const RowMatrix scores = tied_scores(4, 20, rng);
        const auto report = evaluate(scores, set, ks);
        const auto expected = oracle(split, set, scores);
        ASSERT_EQ(report.per_song.size(), expected.size());
        std::vector<double> ranks;
        double map = 0.0;
        for (std::size_t i = 0; i < expected.size(); ++i) {
            EXPECT_EQ(report.per_song[i].rank, expected[i].rank) << "trial " << trial;
            EXPECT_EQ(report.per_song[i].precision, expected[i].precision);
            ranks.push_back(static_cast<double>(expected[i].rank));
            map += expected[i].precision;
        }
        map /= static_cast<double>(expected.size());
        EXPECT_NEAR(report.map, map, 1e-12);
        std::sort(ranks.begin(), ranks.end());
        const std::size_t n = ranks.size();
        const double med = n % 2 ? ranks[n / 2] : 0.5 * (ranks[n / 2 - 1] + ranks[n / 2]);
        EXPECT_EQ(report.median_rank, med);
        for (std::size_t k : ks) {
            const auto hits = std::count_if(expected.begin(), expected.end(), [&](const OracleSong& s) { return s.rank <= k; });
            EXPECT_EQ(report.recall(k), static_cast<double>(hits) / static_cast<double>(n));
        }
    }
}

TEST(Evaluate, InvariantUnderStrictlyIncreasingTransforms) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 20; ++trial) {
        const auto split = random_split(5, 20, rng);
        EvaluationSet set(split);
        RowMatrix scores(5, 20);
        for (Eigen::Index i = 0; i < scores.size(); ++i) scores.data()[i] = gauss(rng);
        const auto base = evaluate(scores, set);
        const RowMatrix affine = (2.0 * scores.array() + 1.0).matrix();
        const RowMatrix expo = scores.array().exp().matrix();
        for (const RowMatrix* m : {&affine, &expo}) {
            const auto other = evaluate(*m, set);
            EXPECT_EQ(other.median_rank, base.median_rank);
            EXPECT_EQ(other.map, base.map);
            EXPECT_EQ(other.recall_at, base.recall_at);
        }
    }
}

TEST(Evaluate, RecallIsNonDecreasingInK) {
    std::mt19937_64 rng(13);
    std::vector<std::size_t> ks(20);
    for (std::size_t k = 1; k <= 20; ++k) ks[k - 1] = k;
    for (int trial = 0; trial < 20; ++trial) {
        const auto split = random_split(4, 20, rng);
        EvaluationSet set(split);
        const auto report = evaluate(tied_scores(4, 20, rng), set, ks);
        for (std::size_t i = 1; i < report.recall_at.size(); ++i)
            EXPECT_GE(report.recall_at[i].second, report.recall_at[i - 1].second);
        EXPECT_EQ(report.recall_at.back().second, 1.0);  // k = |S*| retrieves everything
    }
}

TEST(Evaluate, OracleScorerIsPerfect) {
    std::mt19937_64 rng(14);
    const auto split = random_split(6, 20, rng);
    EvaluationSet set(split);
    RowMatrix scores = RowMatrix::Zero(6, 20);
    for (std::size_t p = 0; p < 6; ++p)
        for (auto c : set.withheld(p)) scores(static_cast<Eigen::Index>(p), c) = 1.0;
    const std::vector<std::size_t> ks = {20};
    const auto report = evaluate(scores, set, ks);
    EXPECT_EQ(report.map, 1.0);
    EXPECT_EQ(report.recall(20), 1.0);
    for (const auto& s : report.per_song) {
        EXPECT_LE(s.rank, set.withheld(s.playlist).size());
        EXPECT_EQ(s.precision, 1.0);
    }
}

TEST(Evaluate, RejectsBadInput) {
    std::mt19937_64 rng(15);
    const auto split = random_split(3, 20, rng);
    EvaluationSet set(split);
    EXPECT_THROW(evaluate(RowMatrix::Zero(3, 19), set), ShapeError);
    RowMatrix nan = RowMatrix::Zero(3, 20);
    nan(1, 4) = std::nan("");
    EXPECT_THROW(evaluate(nan, set), NumericalError);
}

TEST(Median, EvenAndOdd) {
    EXPECT_EQ(median({3, 1, 2}), 2.0);
    EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
    EXPECT_EQ(median({}), 0.0);
}

TEST(Coldstart, BucketsMatchBruteForceRegroup) {
    std::mt19937_64 rng(16);
    for (int trial = 0; trial < 20; ++trial) {
        const auto split = random_split(12, 20, rng);
        EvaluationSet set(split);
        const auto report = evaluate(tied_scores(12, 20, rng), set);
        const auto counts = occurrence_counts(split);
        const auto rows = coldstart_report(report, counts);
        ASSERT_EQ(rows.size(), 6u);
        EXPECT_EQ(rows[0].label, "0");
        EXPECT_EQ(rows[5].label, "5+");
        std::size_t total = 0;
        for (std::size_t b = 0; b < rows.size(); ++b) {
            std::vector<double> ranks;
            double precision = 0.0, hits = 0.0;
            for (const auto& s : report.per_song) {
                const std::size_t c = counts.at(s.song);
                EXPECT_EQ(c, s.occurrences);
                if (std::min<std::size_t>(c, 5) != b) continue;
                ranks.push_back(static_cast<double>(s.rank));
                precision += s.precision;
                hits += s.rank <= 100;
            }
            total += rows[b].n;
            ASSERT_EQ(rows[b].n, ranks.size());
            if (ranks.empty()) {
                EXPECT_TRUE(std::isnan(rows[b].map));
                continue;
            }
            EXPECT_EQ(rows[b].median_rank, median(ranks));
            EXPECT_NEAR(rows[b].map, precision / static_cast<double>(ranks.size()), 1e-12);
            EXPECT_EQ(rows[b].recall_at_100, hits / static_cast<double>(ranks.size()));
        }
        EXPECT_EQ(total, report.per_song.size());
        EXPECT_EQ(coldstart_report(report).size(), rows.size());
    }
}

TEST(Coldstart, CustomEdgesAndErrors) {
    RankingReport report;
    report.per_song = {{0, "a", 1, 0, 1.0}, {0, "b", 2, 3, 1.0}, {0, "c", 200, 9, 0.01}};
    const std::vector<std::size_t> edges = {0, 2, 5};
    const auto rows = coldstart_report(report, edges);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].label, "0-1");
    EXPECT_EQ(rows[1].label, "2-4");
    EXPECT_EQ(rows[2].label, "5+");
    EXPECT_EQ(rows[2].recall_at_100, 0.0);
    const std::vector<std::size_t> bad = {2, 1};
    EXPECT_THROW(coldstart_report(report, bad), ConfigError);
    EXPECT_THROW(coldstart_report(report, std::map<SongId, std::size_t>{}), ValidationError);
}

TEST(ReportJson, RoundTripsWithNullBuckets) {
    std::mt19937_64 rng(17);
    const auto split = random_split(4, 20, rng);
    EvaluationSet set(split);
    auto report = evaluate(tied_scores(4, 20, rng), set);
    report.bins = coldstart_report(report);
    report.name = "m";
    report.split_digest = "abc";
    const auto doc = to_json(report);
    bool saw_null = false;
    for (const auto& b : doc.at("coldstart"))
        if (b.at("n") == 0) saw_null = saw_null || b.at("map").is_null();
    EXPECT_TRUE(saw_null);
    const auto back = report_from_json(nlohmann::json::parse(doc.dump()));
    EXPECT_EQ(to_json(back).dump(), doc.dump());
    EXPECT_THROW(report_from_json(nlohmann::json::object()), FormatError);
}

TEST(Compare, RequiresSharedSplit) {
    RankingReport a, b;
    a.name = "a";
    b.name = "b";
    a.split_digest = b.split_digest = "d1";
    a.recall_at = b.recall_at = {{10, 0.5}};
    a.median_rank = 3;
    b.median_rank = 4;
    std::vector<RankingReport> both = {a, b};
    const auto table = compare(both);
    EXPECT_EQ(table.names, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(table.document.at("models").size(), 2u);
    EXPECT_NE(table.text.find("R@10"), std::string::npos);
    both[1].split_digest = "d2";
    EXPECT_THROW(compare(both), ValidationError);
    EXPECT_THROW(compare(std::span<const RankingReport>{}), ValidationError);
}

}  // namespace
}  // namespace plcont
