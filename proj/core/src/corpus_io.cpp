#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include "plcont/corpus.hpp"
#include "plcont/error.hpp"
#include "plcont/text.hpp"

namespace plcont {

namespace {

struct Record {
    long long position;
    Entry entry;
};

}  // namespace

PlaylistCorpus read_corpus(std::istream& in) {
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<Record>> grouped;
    std::unordered_map<std::string, std::unordered_set<std::string>> seen;

    std::string line;
    std::size_t line_no = 0;
    bool first_record = true;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_fields(line, '\t');
        if (first_record && !fields.empty() && fields[0] == "playlist_id") {
            first_record = false;
            continue;
        }
        first_record = false;
        if (fields.size() != 4)
            throw FormatError("expected 4 tab-separated fields, got " + std::to_string(fields.size()), line_no);
        const std::string_view pos_text = fields[1];
        long long position = 0;
        auto [ptr, ec] = std::from_chars(pos_text.data(), pos_text.data() + pos_text.size(), position);
        if (ec != std::errc() || ptr != pos_text.data() + pos_text.size())
            throw FormatError("bad position '" + std::string(pos_text) + "'", line_no);
        if (fields[0].empty() || fields[2].empty() || fields[3].empty())
            throw FormatError("empty identifier", line_no);

        std::string playlist_id(fields[0]);
        std::string song(fields[2]);
        if (!seen[playlist_id].insert(song).second)
            throw ValidationError("line " + std::to_string(line_no) + ": song '" + song +
                                  "' repeated in playlist '" + playlist_id + "'");
        auto [it, inserted] = grouped.try_emplace(playlist_id);
        if (inserted) order.push_back(playlist_id);
        it->second.push_back({position, {std::move(song), std::string(fields[3])}});
    }

    std::vector<Playlist> playlists;
    playlists.reserve(order.size());
    for (const auto& id : order) {
        auto& records = grouped[id];
        std::stable_sort(records.begin(), records.end(),
                         [](const Record& a, const Record& b) { return a.position < b.position; });
        Playlist playlist{id, {}};
        for (auto& r : records) playlist.entries.push_back(std::move(r.entry));
        playlists.push_back(std::move(playlist));
    }
    return PlaylistCorpus(std::move(playlists));
}

PlaylistCorpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open corpus file '" + path + "'");
    return read_corpus(in);
}

void write_corpus(std::ostream& out, const PlaylistCorpus& corpus) {
    out << "playlist_id\tposition\tsong_id\tartist_id\n";
    for (const auto& playlist : corpus.playlists()) {
        std::size_t position = 0;
        for (const auto& e : playlist.entries)
            out << playlist.id << '\t' << position++ << '\t' << e.song << '\t' << e.artist << '\n';
    }
}

void save_corpus(const std::string& path, const PlaylistCorpus& corpus) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    write_corpus(out, corpus);
}

}  // namespace plcont
