#pragma once

#include <span>
#include <vector>

#include "plcont/corpus.hpp"

namespace plcont {

/// min / first quartile / median / third quartile / max.
struct FiveNumberSummary {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;

    friend bool operator==(const FiveNumberSummary&, const FiveNumberSummary&) = default;
};

/// Quantile with linear interpolation between order statistics
/// (position q * (n - 1)). `sorted` must be ascending and non-empty.
double quantile(std::span<const double> sorted, double q);

/// Summary of an unsorted sample; all zeros for an empty sample.
FiveNumberSummary summarize(std::vector<double> values);

struct PartStatistics {
    FiveNumberSummary songs_per_playlist;
    FiveNumberSummary artists_per_playlist;
    FiveNumberSummary song_frequency;
};

/// Descriptive statistics of the training part (train plus validation) and
/// the test continuations of a split.
struct CorpusStatistics {
    PartStatistics train;
    PartStatistics test;
};

/// Statistics of a list of song groups. Empty groups are skipped.
PartStatistics part_statistics(const std::vector<std::vector<Entry>>& groups);

CorpusStatistics corpus_statistics(const SplitCorpus& split);

}  // namespace plcont
