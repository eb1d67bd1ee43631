#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Core>

#include "plcont/features.hpp"
#include "plcont/interactions.hpp"

namespace plcont {

/// Row (playlist or user) and column (song) latent factors.
struct FactorModel {
    RowMatrix row_factors;  // n_rows x depth
    RowMatrix col_factors;  // n_cols x depth
    double l2_weight = 0.0;
    /// Free-form single-line tag stored with the file (no newlines).
    std::string provenance;

    std::size_t n_rows() const noexcept { return static_cast<std::size_t>(row_factors.rows()); }
    std::size_t n_cols() const noexcept { return static_cast<std::size_t>(col_factors.rows()); }
    std::size_t depth() const noexcept { return static_cast<std::size_t>(row_factors.cols()); }
};

struct WmfConfig {
    std::size_t depth = 200;
    /// Overrides the matrix's observed weight when set.
    std::optional<double> weight_observed = 2.0;
    double l2_weight = 10.0;
    std::size_t sweeps = 15;
    std::uint64_t seed = 0;
    double init_scale = 0.01;
    std::size_t threads = 1;
};

enum class HalfSweep { rows, cols };

/// Called after each half-sweep with the current factors.
using SweepObserver = std::function<void(std::size_t sweep, HalfSweep half, const FactorModel&)>;

/// Weighted matrix factorization by alternating least squares:
///   min  sum_{t,s} w_ts (y_ts - p_t . q_s)^2 + l2 (sum |p_t|^2 + sum |q_s|^2)
/// with y = 1 on observed cells. Each half-sweep solves the per-row normal
/// equations exactly. Throws NumericalError when a system is singular
/// (only possible with l2_weight = 0).
FactorModel wmf_fit(const InteractionMatrix& m, const WmfConfig& config, const SweepObserver& observer = {});

/// The weighted objective above, evaluated in O(nnz * depth + depth^2 (rows + cols)).
double wmf_objective(const InteractionMatrix& m, const FactorModel& model);

/// Dense score matrix, score(t, s) = p_t . q_s.
RowMatrix wmf_scores(const FactorModel& model);

/// One playlist's scores, computed on demand.
Eigen::VectorXd wmf_score_row(const FactorModel& model, std::size_t row);

/// Column factors as a "listening-logs" feature matrix; `song_ids[c]` names column c.
FeatureMatrix song_factors_as_features(const FactorModel& model, std::span<const SongId> song_ids);

enum class ModelFormat { text, binary };

ModelFormat parse_model_format(const std::string& name);

void write_factor_model(std::ostream& out, const FactorModel& model, ModelFormat format);
void save_factor_model(const std::string& path, const FactorModel& model, ModelFormat format);
/// Reads either format (detected from the leading magic).
FactorModel read_factor_model(std::istream& in);
FactorModel load_factor_model(const std::string& path);

}  // namespace plcont
