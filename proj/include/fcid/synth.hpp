#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fcid/model.hpp"
#include "fcid/rng.hpp"

namespace fcid {

struct CohortSpec {
    int n_subjects = 20;
    int n_sessions = 2;
    int n_rois = 64;
    int n_timepoints = 300;
    double tr_seconds = 2.0;
    double subject_signal = 1.0;  // latent connectome distinctiveness
    double session_noise = 0.05;  // within-subject perturbation of the latent matrix
    std::uint64_t seed = 1;
    /// When set, subjects differ only in this edge's latent correlation, drawn uniformly
    /// from +-informative_edge_range * subject_signal; the pair is uncorrelated with other ROIs.
    std::optional<std::pair<int, int>> informative_edge;

    void validate() const;
};

/// Per-entry standard deviation of a unit-strength latent perturbation.
inline constexpr double perturbation_scale = 0.2;
inline constexpr double informative_edge_range = 0.8;

struct NearestCorrelationOptions {
    int max_iterations = 100;
    double tolerance = 1e-8;
};

/// Nearest correlation matrix by alternating projections (eigenvalue clipping and
/// unit-diagonal resets, with Dykstra's correction), finished with a final clip and
/// diagonal rescale so the result is exactly unit-diagonal and PSD.
Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& a, const NearestCorrelationOptions& options = {});

/// One latent correlation matrix per subject: shared base plus a subject-specific
/// rank-2 symmetric update scaled by subject_signal, then projected.
std::vector<Eigen::MatrixXd> generate_latent_connectomes(const CohortSpec& spec);

/// Population correlation for one session: latent plus symmetric noise scaled by
/// session_noise, projected. Equals latent when session_noise is 0.
Eigen::MatrixXd perturb_session(const Eigen::MatrixXd& latent, const CohortSpec& spec, Rng& session_rng);

/// C x N draws whose population correlation is perturb_session(latent), via a
/// Cholesky factor applied to standard normal draws.
TimeSeriesMatrix sample_session_timeseries(const Eigen::MatrixXd& latent, const CohortSpec& spec, Rng& session_rng);

struct Cohort {
    std::vector<ScanRecord> scans;
    std::vector<TimeSeriesMatrix> series;
    Pairing truth;
    std::vector<Eigen::MatrixXd> latents;
};

/// 2 * n_subjects scans ordered subject-major (sub-01 ses 1, sub-01 ses 2, ...),
/// with manifest-ready records pointing at series/<scan_id>.csv.
Cohort generate_cohort(const CohortSpec& spec);

}  // namespace fcid
