#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fcid/model.hpp"

namespace fcid {

/// Tie rule used by rank_matrix; recorded in reports.
inline constexpr const char* tie_rule_name = "ascending_scan_index";

struct DistanceMatrix {
    Eigen::MatrixXd values;  // symmetric, zero diagonal
    std::vector<std::string> scan_ids;

    Eigen::Index size() const { return values.rows(); }
};

/// Row k ranks every other scan by its distance to scan k, 1 = nearest.
/// Diagonal holds 0. Not symmetric in general.
class RankMatrix {
public:
    RankMatrix() = default;
    /// Row-major n x n ranks; validated so each row is a permutation of 1..n-1.
    RankMatrix(int n, std::vector<int> ranks, std::vector<std::string> scan_ids = {});

    int size() const { return n_; }
    int operator()(int row, int col) const { return ranks_[static_cast<std::size_t>(row) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(col)]; }
    const std::vector<std::string>& scan_ids() const { return scan_ids_; }
    Eigen::MatrixXi to_matrix() const;

private:
    int n_ = 0;
    std::vector<int> ranks_;
    std::vector<std::string> scan_ids_;
};

struct ReliabilityResult {
    long long rank_sum = 0;
    std::vector<int> per_scan_rank;
    int n_scans = 0;
    std::optional<std::vector<long long>> null_samples;
    std::optional<double> p_value;
};

struct EdgeRankSum {
    int roi_i;
    int roi_j;
    long long rank_sum;
};

struct EdgeLocalization {
    std::vector<EdgeRankSum> edges;  // (i, j) with i < j, row-major order
    double low_edge_threshold = 0.0;
    std::vector<int> roi_scores;     // incident edges with rank_sum below the cutoff
};

/// Distance over the strict upper triangle, doubled to cover both symmetric halves.
double graph_distance(const Connectome& a, const Connectome& b, DistanceMetric metric);

DistanceMatrix distance_matrix(std::span<const Connectome> graphs, DistanceMetric metric,
                               std::vector<std::string> scan_ids = {}, int jobs = 1);

/// Ascending distance ranks per row; equal distances ranked by ascending scan index.
RankMatrix rank_matrix(const DistanceMatrix& d);

/// Sum over scans of the rank each scan assigns to its partner.
ReliabilityResult rank_sum(const RankMatrix& r, const Pairing& pairing);

/// Uniform random re-pairing of the scans, B replicates. Replicate b draws from
/// the stream (seed, b). p = (1 + #{null <= observed}) / (B + 1).
ReliabilityResult permutation_null(const RankMatrix& r, const Pairing& observed, int B, std::uint64_t seed, int jobs = 1);
ReliabilityResult permutation_null(const RankMatrix& r, std::span<const ScanRecord> scans, int B, std::uint64_t seed,
                                   int jobs = 1);

/// Uniformly random fixed-point-free pairing of n (even) scans.
template <typename URBG>
Pairing random_pairing(int n, URBG& rng)
{
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> partner(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i + 1 < order.size(); i += 2) {
        partner[static_cast<std::size_t>(order[i])] = order[i + 1];
        partner[static_cast<std::size_t>(order[i + 1])] = order[i];
    }
    return Pairing(std::move(partner));
}

/// Per-edge rank sums: each edge value is a scalar per scan, compared by squared difference.
/// The low-edge cutoff is the 5th percentile (linear interpolation) of all edge rank sums.
EdgeLocalization edgewise_rank_sums(std::span<const Connectome> graphs, const Pairing& pairing, int jobs = 1,
                                    double low_percentile = 5.0);

nlohmann::json report_to_json(const ReliabilityResult& result, const PipelineConfig& config, int B,
                              std::uint64_t seed);

/// Plain static SVG heatmap for distance or rank matrices.
std::string heatmap_svg(const Eigen::MatrixXd& m, const std::string& title);

}  // namespace fcid
