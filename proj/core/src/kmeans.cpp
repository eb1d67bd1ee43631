#include <cmath>
#include <random>

#include "plcont/error.hpp"
#include "plcont/features.hpp"

namespace plcont {

namespace {

double squared_distance(const double* a, const double* b, std::size_t dim) {
    double d = 0.0;
    for (std::size_t j = 0; j < dim; ++j) d += (a[j] - b[j]) * (a[j] - b[j]);
    return d;
}

std::size_t nearest_row(const RowMatrix& centroids, const double* point, double* best_distance = nullptr) {
    const auto dim = static_cast<std::size_t>(centroids.cols());
    std::size_t best = 0;
    double best_d = squared_distance(centroids.row(0).data(), point, dim);
    for (Eigen::Index c = 1; c < centroids.rows(); ++c) {
        const double d = squared_distance(centroids.row(c).data(), point, dim);
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::size_t>(c);
        }
    }
    if (best_distance) *best_distance = best_d;
    return best;
}

// k-means++: first center uniform, each next one drawn with probability
// proportional to the squared distance to the closest chosen center.
RowMatrix seed_centers(const RowMatrix& points, std::size_t k, std::mt19937_64& rng) {
    const auto n = static_cast<std::size_t>(points.rows());
    const auto dim = static_cast<std::size_t>(points.cols());
    RowMatrix centers(static_cast<Eigen::Index>(k), points.cols());

    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    centers.row(0) = points.row(static_cast<Eigen::Index>(pick(rng)));

    std::vector<double> closest(n);
    for (std::size_t i = 0; i < n; ++i)
        closest[i] = squared_distance(points.row(static_cast<Eigen::Index>(i)).data(), centers.row(0).data(), dim);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double d : closest) total += d;
        if (total <= 0.0)
            throw ValidationError("only " + std::to_string(c) + " distinct points for k = " + std::to_string(k));
        const double target = unit(rng) * total;
        double acc = 0.0;
        std::size_t chosen = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (closest[i] <= 0.0) continue;
            acc += closest[i];
            chosen = i;
            if (acc > target) break;
        }
        centers.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(chosen));
        for (std::size_t i = 0; i < n; ++i) {
            const double d = squared_distance(points.row(static_cast<Eigen::Index>(i)).data(),
                                              centers.row(static_cast<Eigen::Index>(c)).data(), dim);
            if (d < closest[i]) closest[i] = d;
        }
    }
    return centers;
}

}  // namespace

std::size_t Codebook::nearest(std::span<const double> point) const {
    if (point.size() != dim()) throw ShapeError("point dimension does not match codebook");
    return nearest_row(centroids, point.data());
}

KMeansResult fit_codebook(const RowMatrix& points, const KMeansOptions& options) {
    const auto n = static_cast<std::size_t>(points.rows());
    const std::size_t k = options.k;
    if (k == 0) throw ConfigError("k must be at least 1");
    if (n < k)
        throw ValidationError("k-means needs at least k = " + std::to_string(k) + " points, got " + std::to_string(n));

    std::mt19937_64 rng(options.seed);
    KMeansResult result;
    RowMatrix centers = seed_centers(points, k, rng);

    std::vector<std::size_t> assignment(n);
    RowMatrix sums(centers.rows(), centers.cols());
    std::vector<std::size_t> counts(k);

    for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = 0.0;
            assignment[i] = nearest_row(centers, points.row(static_cast<Eigen::Index>(i)).data(), &d);
            inertia += d;
        }
        result.inertia.push_back(inertia);

        sums.setZero();
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(static_cast<Eigen::Index>(assignment[i])) += points.row(static_cast<Eigen::Index>(i));
            ++counts[assignment[i]];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its center
            const auto row = static_cast<Eigen::Index>(c);
            const Eigen::RowVectorXd updated = sums.row(row) / static_cast<double>(counts[c]);
            shift = std::max(shift, (updated - centers.row(row)).norm());
            centers.row(row) = updated;
        }
        result.iterations = iter + 1;
        if (shift < options.tolerance) {
            result.converged = true;
            break;
        }
    }
    result.codebook.centroids = std::move(centers);
    return result;
}

KMeansResult fit_codebook(std::span<const TimbreFrames> songs, const KMeansOptions& options) {
    std::size_t total = 0;
    for (const auto& s : songs) total += s.frames.size();
    RowMatrix pool(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(timbre_dim));
    Eigen::Index r = 0;
    for (const auto& s : songs)
        for (const auto& frame : s.frames) {
            for (std::size_t j = 0; j < timbre_dim; ++j) pool(r, static_cast<Eigen::Index>(j)) = frame[j];
            ++r;
        }
    return fit_codebook(pool, options);
}

}  // namespace plcont
