#include "plcont/factorization.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>

#include "plcont/error.hpp"
#include "plcont/parallel.hpp"
#include "plcont/text.hpp"

namespace plcont {

namespace {

// Solves every row of `target` against fixed `other` factors:
//   (w0 O^T O + sum_obs (w - w0) o o^T + l2 I) x = sum_obs w o
template <typename Adjacency>
void solve_side(RowMatrix& target, const RowMatrix& other, Adjacency&& cells_of, double w0, double l2,
                std::size_t threads) {
    const Eigen::Index d = other.cols();
    Eigen::MatrixXd base = w0 * (other.transpose() * other);
    base.diagonal().array() += l2;

    parallel_for(static_cast<std::size_t>(target.rows()), threads, [&](std::size_t r) {
        Eigen::MatrixXd a = base;
        Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
        for (const Cell& cell : cells_of(r)) {
            const auto o = other.row(cell.index).transpose();
            a.selfadjointView<Eigen::Lower>().rankUpdate(o, cell.weight - w0);
            b += cell.weight * o;
        }
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() != Eigen::Success || llt.rcond() < 1e-13)
            throw NumericalError("singular normal equations in ALS half-sweep (l2_weight = " + std::to_string(l2) + ")");
        target.row(static_cast<Eigen::Index>(r)) = llt.solve(b).transpose();
    });
}

}  // namespace

FactorModel wmf_fit(const InteractionMatrix& input, const WmfConfig& config, const SweepObserver& observer) {
    if (config.depth == 0) throw ConfigError("factor depth must be at least 1");
    if (config.sweeps == 0) throw ConfigError("at least one ALS sweep is required");
    if (config.l2_weight < 0.0) throw ConfigError("l2 weight must be non-negative");
    if (config.weight_observed && *config.weight_observed < 1.0) throw ConfigError("observed weight must be >= 1");
    if (input.n_pairs() == 0) throw ValidationError("interaction matrix has no observed pairs");

    const InteractionMatrix reweighted =
        config.weight_observed ? input.reweighted(*config.weight_observed, input.weight_unobserved()) : InteractionMatrix{};
    const InteractionMatrix& m = config.weight_observed ? reweighted : input;

    FactorModel model;
    model.l2_weight = config.l2_weight;
    const auto depth = static_cast<Eigen::Index>(config.depth);
    model.row_factors.resize(static_cast<Eigen::Index>(m.n_rows()), depth);
    model.col_factors.resize(static_cast<Eigen::Index>(m.n_cols()), depth);

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> init(-config.init_scale, config.init_scale);
    for (Eigen::Index i = 0; i < model.row_factors.size(); ++i) model.row_factors.data()[i] = init(rng);
    for (Eigen::Index i = 0; i < model.col_factors.size(); ++i) model.col_factors.data()[i] = init(rng);

    const double w0 = m.weight_unobserved();
    for (std::size_t sweep = 0; sweep < config.sweeps; ++sweep) {
        solve_side(model.row_factors, model.col_factors, [&](std::size_t r) { return m.row(r); }, w0,
                   config.l2_weight, config.threads);
        if (observer) observer(sweep, HalfSweep::rows, model);
        solve_side(model.col_factors, model.row_factors, [&](std::size_t c) { return m.col(c); }, w0,
                   config.l2_weight, config.threads);
        if (observer) observer(sweep, HalfSweep::cols, model);
    }
    if (!model.row_factors.allFinite() || !model.col_factors.allFinite())
        throw NumericalError("non-finite factors after ALS");
    return model;
}

double wmf_objective(const InteractionMatrix& m, const FactorModel& model) {
    const double w0 = m.weight_unobserved();
    const Eigen::MatrixXd pp = model.row_factors.transpose() * model.row_factors;
    const Eigen::MatrixXd qq = model.col_factors.transpose() * model.col_factors;
    // Every cell treated as unobserved with target 0, then observed cells corrected.
    double loss = w0 * (pp.cwiseProduct(qq)).sum();
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
        for (const Cell& cell : m.row(r)) {
            const double pred = model.row_factors.row(static_cast<Eigen::Index>(r)).dot(model.col_factors.row(cell.index));
            loss += cell.weight * (1.0 - pred) * (1.0 - pred) - w0 * pred * pred;
        }
    }
    return loss + model.l2_weight * (model.row_factors.squaredNorm() + model.col_factors.squaredNorm());
}

RowMatrix wmf_scores(const FactorModel& model) { return model.row_factors * model.col_factors.transpose(); }

Eigen::VectorXd wmf_score_row(const FactorModel& model, std::size_t row) {
    if (row >= model.n_rows()) throw IndexError("factor row " + std::to_string(row) + " out of range");
    return model.col_factors * model.row_factors.row(static_cast<Eigen::Index>(row)).transpose();
}

FeatureMatrix song_factors_as_features(const FactorModel& model, std::span<const SongId> song_ids) {
    if (song_ids.size() != model.n_cols())
        throw ShapeError("got " + std::to_string(song_ids.size()) + " song ids for " + std::to_string(model.n_cols()) +
                         " factor columns");
    FeatureMatrix out("listening-logs", model.depth());
    for (std::size_t c = 0; c < song_ids.size(); ++c) {
        const auto row = model.col_factors.row(static_cast<Eigen::Index>(c));
        out.add_row(song_ids[c], std::span<const double>(row.data(), model.depth()));
    }
    return out;
}

ModelFormat parse_model_format(const std::string& name) {
    if (name == "text") return ModelFormat::text;
    if (name == "binary") return ModelFormat::binary;
    throw ConfigError("unknown model format '" + name + "'");
}

namespace {

constexpr char binary_magic[8] = {'P', 'L', 'W', 'M', 'F', 'B', '1', '\n'};
constexpr std::string_view text_magic = "plcont-wmf";

void write_block(std::ostream& out, const RowMatrix& m, ModelFormat format) {
    if (format == ModelFormat::binary) {
        out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
        return;
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "\t" : "") << format_double(m(r, c));
        out << '\n';
    }
}

}  // namespace

void write_factor_model(std::ostream& out, const FactorModel& model, ModelFormat format) {
    if (format == ModelFormat::binary) {
        out.write(binary_magic, sizeof binary_magic);
        const std::uint64_t header[3] = {model.n_rows(), model.n_cols(), model.depth()};
        out.write(reinterpret_cast<const char*>(header), sizeof header);
        out.write(reinterpret_cast<const char*>(&model.l2_weight), sizeof model.l2_weight);
    } else {
        out << text_magic << '\t' << model.n_rows() << '\t' << model.n_cols() << '\t' << model.depth() << '\t'
            << format_double(model.l2_weight) << '\n';
    }
    write_block(out, model.row_factors, format);
    write_block(out, model.col_factors, format);
    if (model.provenance.find('\n') != std::string::npos) throw ConfigError("model provenance must be a single line");
    if (model.provenance.empty()) return;
    if (format == ModelFormat::binary) {
        const std::uint64_t size = model.provenance.size();
        out.write(reinterpret_cast<const char*>(&size), sizeof size);
        out.write(model.provenance.data(), static_cast<std::streamsize>(size));
    } else {
        out << "# " << model.provenance << '\n';
    }
}

void save_factor_model(const std::string& path, const FactorModel& model, ModelFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    write_factor_model(out, model, format);
}

FactorModel read_factor_model(std::istream& in) {
    char magic[sizeof binary_magic];
    in.read(magic, sizeof magic);
    FactorModel model;
    if (in && std::memcmp(magic, binary_magic, sizeof magic) == 0) {
        std::uint64_t header[3];
        in.read(reinterpret_cast<char*>(header), sizeof header);
        in.read(reinterpret_cast<char*>(&model.l2_weight), sizeof model.l2_weight);
        if (!in || header[2] == 0) throw FormatError("truncated binary factor model header");
        model.row_factors.resize(static_cast<Eigen::Index>(header[0]), static_cast<Eigen::Index>(header[2]));
        model.col_factors.resize(static_cast<Eigen::Index>(header[1]), static_cast<Eigen::Index>(header[2]));
        in.read(reinterpret_cast<char*>(model.row_factors.data()),
                static_cast<std::streamsize>(model.row_factors.size() * sizeof(double)));
        in.read(reinterpret_cast<char*>(model.col_factors.data()),
                static_cast<std::streamsize>(model.col_factors.size() * sizeof(double)));
        if (!in) throw FormatError("truncated binary factor model");
        std::uint64_t size = 0;
        if (in.read(reinterpret_cast<char*>(&size), sizeof size)) {
            if (size > (1u << 20)) throw FormatError("oversized factor model trailer");
            model.provenance.resize(size);
            if (!in.read(model.provenance.data(), static_cast<std::streamsize>(size)))
                throw FormatError("truncated factor model trailer");
        }
        return model;
    }

    in.clear();
    in.seekg(0);
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw FormatError("empty factor model file");
    strip_cr(line);
    const auto head = split_whitespace(line);
    if (head.size() != 5 || head[0] != text_magic) throw FormatError("not a factor model file", 1);
    const auto n_rows = static_cast<Eigen::Index>(parse_double(head[1], 1));
    const auto n_cols = static_cast<Eigen::Index>(parse_double(head[2], 1));
    const auto depth = static_cast<Eigen::Index>(parse_double(head[3], 1));
    model.l2_weight = parse_double(head[4], 1);
    model.row_factors.resize(n_rows, depth);
    model.col_factors.resize(n_cols, depth);
    for (RowMatrix* block : {&model.row_factors, &model.col_factors}) {
        for (Eigen::Index r = 0; r < block->rows(); ++r) {
            ++line_no;
            if (!std::getline(in, line)) throw FormatError("truncated factor model", line_no);
            strip_cr(line);
            const auto tokens = split_whitespace(line);
            if (static_cast<Eigen::Index>(tokens.size()) != depth)
                throw FormatError("expected " + std::to_string(depth) + " factors", line_no);
            for (Eigen::Index c = 0; c < depth; ++c)
                (*block)(r, c) = parse_double(tokens[static_cast<std::size_t>(c)], line_no);
        }
    }
    if (std::getline(in, line)) {
        strip_cr(line);
        if (line.rfind("# ", 0) == 0) model.provenance = line.substr(2);
    }
    return model;
}

FactorModel load_factor_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    return read_factor_model(in);
}

}  // namespace plcont
