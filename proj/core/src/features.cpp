#include "plcont/features.hpp"

#include <cmath>
#include <numeric>

#include "plcont/error.hpp"
#include "plcont/text.hpp"

namespace plcont {

FeatureMatrix::FeatureMatrix(std::string kind, std::size_t dim) : kind_(std::move(kind)), dim_(dim) {
    if (dim == 0) throw ShapeError("feature dimension must be positive");
}

void FeatureMatrix::add_row(const SongId& song, std::span<const double> values) {
    if (values.size() != dim_)
        throw ShapeError("row for '" + song + "' has " + std::to_string(values.size()) + " values, expected " +
                         std::to_string(dim_));
    if (ids_.contains(song)) throw ValidationError("duplicate feature row for '" + song + "'");
    ids_.insert(song);
    values_.insert(values_.end(), values.begin(), values.end());
}

std::span<const double> FeatureMatrix::row(std::size_t i) const {
    if (i >= n_rows()) throw IndexError("feature row " + std::to_string(i) + " out of range");
    return {values_.data() + i * dim_, dim_};
}

std::span<double> FeatureMatrix::mutable_row(std::size_t i) {
    if (i >= n_rows()) throw IndexError("feature row " + std::to_string(i) + " out of range");
    return {values_.data() + i * dim_, dim_};
}

Eigen::Map<const RowMatrix> FeatureMatrix::matrix() const {
    return {values_.data(), static_cast<Eigen::Index>(n_rows()), static_cast<Eigen::Index>(dim_)};
}

void FeatureMatrix::flag_zero_row(const SongId& song) { zero_rows_.push_back(song); }

std::string FeatureMatrix::manifest() const {
    std::string out = kind_ + "[" + std::to_string(dim_) + "]";
    for (const auto& step : steps_) out += "|" + step;
    return out;
}

std::string to_string(Preprocessing scheme) {
    switch (scheme) {
    case Preprocessing::standardize_l2: return "standardize-l2";
    case Preprocessing::l1: return "l1";
    }
    return "?";
}

Preprocessing parse_preprocessing(const std::string& name) {
    if (name == "standardize-l2" || name == "standardize_l2") return Preprocessing::standardize_l2;
    if (name == "l1") return Preprocessing::l1;
    throw ConfigError("unknown preprocessing scheme '" + name + "'");
}

namespace {

void normalize_rows(FeatureMatrix& m, bool l2) {
    for (std::size_t i = 0; i < m.n_rows(); ++i) {
        auto row = m.mutable_row(i);
        double norm = 0.0;
        for (double v : row) norm += l2 ? v * v : std::abs(v);
        if (l2) norm = std::sqrt(norm);
        if (norm == 0.0) {
            m.flag_zero_row(m.ids().id(i));
            continue;
        }
        for (double& v : row) v /= norm;
    }
}

}  // namespace

FeatureMatrix preprocess(const FeatureMatrix& m, Preprocessing scheme, std::span<const SongId> training_songs) {
    FeatureMatrix out = m;
    if (scheme == Preprocessing::l1) {
        normalize_rows(out, false);
        out.add_step("l1");
        return out;
    }

    std::vector<std::size_t> rows;
    if (training_songs.empty()) {
        rows.resize(m.n_rows());
        std::iota(rows.begin(), rows.end(), 0);
    } else {
        for (const auto& song : training_songs)
            if (auto i = m.ids().find(song)) rows.push_back(*i);
    }
    if (rows.empty()) throw ValidationError("no training rows to standardize '" + m.kind() + "' with");

    const std::size_t dim = m.dim();
    std::vector<double> mean(dim, 0.0), stddev(dim, 0.0);
    for (std::size_t r : rows) {
        auto row = m.row(r);
        for (std::size_t j = 0; j < dim; ++j) mean[j] += row[j];
    }
    for (double& v : mean) v /= static_cast<double>(rows.size());
    for (std::size_t r : rows) {
        auto row = m.row(r);
        for (std::size_t j = 0; j < dim; ++j) stddev[j] += (row[j] - mean[j]) * (row[j] - mean[j]);
    }
    for (double& v : stddev) v = std::sqrt(v / static_cast<double>(rows.size()));

    for (std::size_t i = 0; i < out.n_rows(); ++i) {
        auto row = out.mutable_row(i);
        for (std::size_t j = 0; j < dim; ++j) row[j] = stddev[j] > 0.0 ? (row[j] - mean[j]) / stddev[j] : 0.0;
    }
    normalize_rows(out, true);
    out.add_step("standardize-l2");
    return out;
}

FeatureMatrix concat(std::span<const FeatureMatrix> features) {
    if (features.empty()) throw ValidationError("nothing to concatenate");
    if (features.size() == 1) return features.front();

    const FeatureMatrix& first = features.front();
    std::string kind;
    std::string steps = "concat(";
    std::size_t dim = 0;
    for (std::size_t f = 0; f < features.size(); ++f) {
        const auto& m = features[f];
        if (m.n_rows() != first.n_rows())
            throw ValidationError("feature '" + m.kind() + "' covers a different song set than '" + first.kind() + "'");
        for (const auto& song : first.ids().ids())
            if (!m.contains(song))
                throw ValidationError("feature '" + m.kind() + "' has no row for song '" + song + "'");
        kind += (f ? "+" : "") + m.kind();
        steps += (f ? "," : "") + m.manifest();
        dim += m.dim();
    }
    steps += ")";

    FeatureMatrix out(kind, dim);
    std::vector<double> buffer;
    buffer.reserve(dim);
    for (const auto& song : first.ids().ids()) {
        buffer.clear();
        for (const auto& m : features) {
            auto row = m.row(song);
            buffer.insert(buffer.end(), row.begin(), row.end());
        }
        out.add_row(song, buffer);
    }
    out.add_step(steps);
    for (const auto& m : features)
        for (const auto& song : m.zero_rows()) out.flag_zero_row(song);
    return out;
}

FeatureMatrix select_rows(const FeatureMatrix& m, std::span<const SongId> songs) {
    FeatureMatrix out(m.kind(), m.dim());
    for (const auto& song : songs) {
        if (!m.contains(song)) throw MissingFeatureError("no '" + m.kind() + "' features for song '" + song + "'");
        out.add_row(song, m.row(song));
    }
    for (const auto& step : m.steps()) out.add_step(step);
    for (const auto& song : m.zero_rows())
        if (out.contains(song)) out.flag_zero_row(song);
    return out;
}

std::vector<double> mean_timbre(const TimbreFrames& frames) {
    if (frames.frames.empty()) throw MissingFeatureError("no timbre frames for song '" + frames.song + "'");
    std::vector<double> mean(timbre_dim, 0.0);
    for (const auto& frame : frames.frames)
        for (std::size_t j = 0; j < timbre_dim; ++j) mean[j] += frame[j];
    for (double& v : mean) v /= static_cast<double>(frames.frames.size());
    return mean;
}

std::vector<double> vq_histogram(const TimbreFrames& frames, const Codebook& codebook) {
    if (frames.frames.empty()) throw MissingFeatureError("no timbre frames for song '" + frames.song + "'");
    if (codebook.dim() != timbre_dim) throw ShapeError("codebook dimension does not match timbre frames");
    std::vector<double> histogram(codebook.k(), 0.0);
    for (const auto& frame : frames.frames) histogram[codebook.nearest(frame)] += 1.0;
    return histogram;
}

void EmbeddingDictionary::insert(const std::string& word, std::vector<double> vector) {
    if (dim_ == 0) dim_ = vector.size();
    if (vector.size() != dim_)
        throw ShapeError("embedding for '" + word + "' has " + std::to_string(vector.size()) +
                         " components, expected " + std::to_string(dim_));
    vectors_.insert_or_assign(word, std::move(vector));
}

const std::vector<double>* EmbeddingDictionary::find(const std::string& word) const {
    auto it = vectors_.find(word);
    return it == vectors_.end() ? nullptr : &it->second;
}

std::vector<double> tag_feature(const TagAnnotation& annotation, const EmbeddingDictionary& dictionary) {
    const std::size_t dim = dictionary.dim();
    std::vector<std::vector<double>> usable;
    std::vector<double> weights;
    double total_weight = 0.0;
    for (const auto& [tag, weight] : annotation.tags) {
        if (weight < 0.0 || !std::isfinite(weight))
            throw ValidationError("invalid tag weight for '" + annotation.subject + "'");
        if (weight == 0.0) continue;
        std::vector<double> tag_vector(dim, 0.0);
        std::size_t known = 0;
        for (auto word : split_whitespace(tag)) {
            const auto* v = dictionary.find(std::string(word));
            if (!v) continue;
            for (std::size_t j = 0; j < dim; ++j) tag_vector[j] += (*v)[j];
            ++known;
        }
        if (known == 0) continue;
        for (double& x : tag_vector) x /= static_cast<double>(known);
        usable.push_back(std::move(tag_vector));
        weights.push_back(weight);
        total_weight += weight;
    }
    if (usable.empty()) throw MissingFeatureError("no usable tags for '" + annotation.subject + "'");

    std::vector<double> out(dim, 0.0);
    for (std::size_t t = 0; t < usable.size(); ++t) {
        const double w = weights[t] / total_weight;
        for (std::size_t j = 0; j < dim; ++j) out[j] += w * usable[t][j];
    }
    return out;
}

}  // namespace plcont
