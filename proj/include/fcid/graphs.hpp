#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "fcid/model.hpp"

namespace fcid {

/// Keeps the first floor(window / TR) columns; the full matrix when the window
/// exceeds the scan. Throws ArgumentError when fewer than 2 samples would remain.
TimeSeriesMatrix window_truncate(const TimeSeriesMatrix& ts, double window_seconds);

/// Per-cell arithmetic mean of the member rows (C x N). Rows of ts must follow
/// the parcellation's labeled-voxel order.
TimeSeriesMatrix extract_mean(const TimeSeriesMatrix& ts, const Parcellation& parc);

struct EigenvariateOptions {
    double tolerance = 1e-10;
    int max_iterations = 1000;
};

/// Per-cell projection of the row-centered submatrix onto its leading principal
/// component, computed by block power iteration with Rayleigh-Ritz refinement.
/// Sign is chosen so the result correlates nonnegatively with the cell mean.
TimeSeriesMatrix extract_eigenvariate(const TimeSeriesMatrix& ts, const Parcellation& parc,
                                      const EigenvariateOptions& options = {});

/// Sample Pearson correlation between every pair of rows, clamped to [-1, 1],
/// diagonal stored as 0.
Connectome pearson_adjacency(const TimeSeriesMatrix& roi_ts);

/// q-th percentile (linear interpolation) of the strict upper triangle.
double upper_triangle_percentile(const Eigen::MatrixXd& m, double q, bool absolute = false);

/// Zeroes every weight w <= tau, where tau is the q-th percentile of this
/// connectome's own upper-triangle weights. q == 0 means tau = -inf (identity).
/// With absolute = true, |w| is compared against the percentile of |w|.
Connectome percentile_threshold(const Connectome& g, double q, bool absolute = false);

std::string format_connectome_csv(const Connectome& g);

/// Compact binary cache entry keyed by (scan_id, config hash).
struct CachedConnectome {
    std::string scan_id;
    std::string config_hash;
    Connectome graph;
};

void write_connectome_cache(const std::filesystem::path& path, const CachedConnectome& entry);
/// Returns nullopt when the file is missing, malformed, or keyed differently.
std::optional<CachedConnectome> read_connectome_cache(const std::filesystem::path& path, const std::string& scan_id,
                                                      const std::string& config_hash);

}  // namespace fcid
