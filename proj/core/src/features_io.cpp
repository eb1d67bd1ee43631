#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "plcont/error.hpp"
#include "plcont/features.hpp"
#include "plcont/text.hpp"

namespace plcont {

namespace {

constexpr std::string_view header_tag = "# plcont-features";

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    return in;
}

bool is_integer(std::string_view token) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    return ec == std::errc() && ptr == token.data() + token.size();
}

}  // namespace

std::string format_double(double value) {
    char buffer[64];
    auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, ptr);
}

std::vector<TimbreFrames> read_timbre_frames(std::istream& in) {
    std::vector<TimbreFrames> out;
    std::unordered_set<SongId> finished;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        const auto tokens = split_whitespace(line);
        if (tokens.empty() || tokens[0].front() == '#') continue;
        if (tokens.size() != timbre_dim + 1)
            throw FormatError("expected song id and " + std::to_string(timbre_dim) + " values", line_no);
        std::string song(tokens[0]);
        if (out.empty() || out.back().song != song) {
            if (!out.empty()) finished.insert(out.back().song);
            if (finished.contains(song)) throw FormatError("frames of song '" + song + "' are not contiguous", line_no);
            out.push_back({song, {}});
        }
        TimbreFrame frame{};
        for (std::size_t j = 0; j < timbre_dim; ++j) frame[j] = parse_double(tokens[j + 1], line_no);
        out.back().frames.push_back(frame);
    }
    return out;
}

std::vector<TimbreFrames> load_timbre_frames(const std::string& path) {
    auto in = open_input(path);
    return read_timbre_frames(in);
}

std::vector<TagAnnotation> read_tags(std::istream& in) {
    std::vector<TagAnnotation> out;
    std::unordered_map<std::string, std::size_t> index;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split_fields(line, '\t');
        if (fields.size() != 3) throw FormatError("expected subject<TAB>tag<TAB>weight", line_no);
        const double weight = parse_double(fields[2], line_no);
        if (weight < 0.0) throw FormatError("negative tag weight", line_no);
        std::string subject(fields[0]);
        auto [it, inserted] = index.try_emplace(subject, out.size());
        if (inserted) out.push_back({subject, {}});
        out[it->second].tags.emplace_back(std::string(fields[1]), weight);
    }
    return out;
}

std::vector<TagAnnotation> load_tags(const std::string& path) {
    auto in = open_input(path);
    return read_tags(in);
}

EmbeddingDictionary read_embeddings(std::istream& in) {
    EmbeddingDictionary dict;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        const auto tokens = split_whitespace(line);
        if (tokens.empty()) continue;
        // word2vec text files start with a "<count> <dim>" header.
        if (line_no == 1 && tokens.size() == 2 && is_integer(tokens[0]) && is_integer(tokens[1])) continue;
        if (tokens.size() < 2) throw FormatError("embedding line without values", line_no);
        std::vector<double> v;
        v.reserve(tokens.size() - 1);
        for (std::size_t j = 1; j < tokens.size(); ++j) v.push_back(parse_double(tokens[j], line_no));
        if (dict.dim() != 0 && v.size() != dict.dim())
            throw FormatError("expected " + std::to_string(dict.dim()) + " values", line_no);
        dict.insert(std::string(tokens[0]), std::move(v));
    }
    return dict;
}

EmbeddingDictionary load_embeddings(const std::string& path) {
    auto in = open_input(path);
    return read_embeddings(in);
}

ImportResult read_feature_matrix(std::istream& in, const std::string& kind, const std::unordered_set<SongId>* known) {
    std::string file_kind;
    std::vector<std::string> steps;
    std::vector<std::pair<SongId, std::vector<double>>> rows;
    std::size_t dim = 0;
    ImportResult result;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.starts_with(header_tag)) {
            const auto fields = split_fields(line, '\t');
            if (fields.size() >= 2) file_kind = std::string(fields[1]);
            for (std::size_t i = 2; i < fields.size(); ++i) steps.emplace_back(fields[i]);
            continue;
        }
        const auto tokens = split_whitespace(line);
        if (tokens.empty() || tokens[0].front() == '#') continue;
        if (tokens.size() < 2) throw FormatError("feature row without values", line_no);
        const std::size_t arity = tokens.size() - 1;
        if (dim == 0) dim = arity;
        if (arity != dim)
            throw FormatError("row has " + std::to_string(arity) + " values, expected " + std::to_string(dim), line_no);
        std::string song(tokens[0]);
        if (known && !known->contains(song)) {
            ++result.skipped;
            continue;
        }
        std::vector<double> values;
        values.reserve(arity);
        for (std::size_t j = 1; j < tokens.size(); ++j) values.push_back(parse_double(tokens[j], line_no));
        rows.emplace_back(std::move(song), std::move(values));
    }
    if (dim == 0) throw FormatError("feature file has no rows");

    const std::string name = !kind.empty() ? kind : (!file_kind.empty() ? file_kind : "import");
    result.features = FeatureMatrix(name, dim);
    for (const auto& [song, values] : rows) result.features.add_row(song, values);
    for (auto& step : steps) result.features.add_step(std::move(step));
    return result;
}

ImportResult import_precomputed(const std::string& path, const std::string& kind,
                                const std::unordered_set<SongId>* known) {
    auto in = open_input(path);
    return read_feature_matrix(in, kind, known);
}

void write_feature_matrix(std::ostream& out, const FeatureMatrix& m, std::string_view comment) {
    out << header_tag << '\t' << m.kind();
    for (const auto& step : m.steps()) out << '\t' << step;
    out << '\n';
    if (!comment.empty()) out << "# " << comment << '\n';
    for (std::size_t i = 0; i < m.n_rows(); ++i) {
        out << m.ids().id(i);
        for (double v : m.row(i)) out << '\t' << format_double(v);
        out << '\n';
    }
}

void save_feature_matrix(const std::string& path, const FeatureMatrix& m, std::string_view comment) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    write_feature_matrix(out, m, comment);
}

}  // namespace plcont
