#include "fcid/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "fcid/errors.hpp"
#include "fcid/parallel.hpp"
#include "fcid/rng.hpp"
#include "fcid/stats.hpp"

namespace fcid {

// --- RankMatrix -------------------------------------------------------------

RankMatrix::RankMatrix(int n, std::vector<int> ranks, std::vector<std::string> scan_ids)
    : n_(n), ranks_(std::move(ranks)), scan_ids_(std::move(scan_ids))
{
    if (n_ < 2) throw ArgumentError("rank matrix needs at least 2 scans");
    if (ranks_.size() != static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_)) {
        throw ShapeError("rank matrix data has the wrong size");
    }
    if (!scan_ids_.empty() && scan_ids_.size() != static_cast<std::size_t>(n_)) {
        throw ShapeError("rank matrix scan id count mismatch");
    }
    std::vector<char> seen(static_cast<std::size_t>(n_));
    for (int k = 0; k < n_; ++k) {
        std::fill(seen.begin(), seen.end(), 0);
        for (int j = 0; j < n_; ++j) {
            const int v = (*this)(k, j);
            if (j == k) {
                if (v != 0) throw ValueError("rank matrix diagonal must be 0");
                continue;
            }
            if (v < 1 || v > n_ - 1 || seen[static_cast<std::size_t>(v)]) {
                throw ValueError("rank matrix row " + std::to_string(k) + " is not a permutation of 1..n-1");
            }
            seen[static_cast<std::size_t>(v)] = 1;
        }
    }
}

Eigen::MatrixXi RankMatrix::to_matrix() const
{
    Eigen::MatrixXi m(n_, n_);
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < n_; ++j) m(i, j) = (*this)(i, j);
    }
    return m;
}

// --- distances --------------------------------------------------------------

double graph_distance(const Connectome& a, const Connectome& b, DistanceMetric metric)
{
    if (a.n_rois() != b.n_rois()) {
        throw ShapeError("connectome sizes differ: " + std::to_string(a.n_rois()) + " vs " + std::to_string(b.n_rois()));
    }
    const auto& wa = a.weights();
    const auto& wb = b.weights();
    const Eigen::Index c = wa.rows();
    double sum = 0.0;
    for (Eigen::Index j = 1; j < c; ++j) {
        for (Eigen::Index i = 0; i < j; ++i) {
            const double d = wa(i, j) - wb(i, j);
            sum += metric == DistanceMetric::squared_frobenius ? d * d : std::abs(d);
        }
    }
    return 2.0 * sum;
}

DistanceMatrix distance_matrix(std::span<const Connectome> graphs, DistanceMetric metric,
                               std::vector<std::string> scan_ids, int jobs)
{
    const auto n = static_cast<Eigen::Index>(graphs.size());
    if (n < 2) throw ArgumentError("distance matrix needs at least 2 graphs");
    if (!scan_ids.empty() && static_cast<Eigen::Index>(scan_ids.size()) != n) {
        throw ShapeError("scan id count does not match graph count");
    }
    if (scan_ids.empty()) {
        for (Eigen::Index k = 0; k < n; ++k) scan_ids.push_back(std::to_string(k));
    }
    DistanceMatrix d{Eigen::MatrixXd::Zero(n, n), std::move(scan_ids)};
    parallel_for(static_cast<std::size_t>(n), jobs, [&](std::size_t row) {
        const auto i = static_cast<Eigen::Index>(row);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            try {
                d.values(i, j) = graph_distance(graphs[static_cast<std::size_t>(i)], graphs[static_cast<std::size_t>(j)], metric);
            } catch (const ShapeError& e) {
                throw ShapeError("scans " + d.scan_ids[static_cast<std::size_t>(i)] + " and " +
                                 d.scan_ids[static_cast<std::size_t>(j)] + ": " + e.what());
            }
        }
    });
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) d.values(j, i) = d.values(i, j);
    }
    return d;
}

RankMatrix rank_matrix(const DistanceMatrix& d)
{
    const Eigen::Index n = d.size();
    if (n < 2 || d.values.cols() != n) throw ShapeError("distance matrix must be square with n >= 2");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (d.values(i, i) != 0.0) throw ValueError("distance matrix diagonal must be 0");
        for (Eigen::Index j = 0; j < n; ++j) {
            const double v = d.values(i, j);
            if (!std::isfinite(v) || v < 0.0) throw ValueError("distances must be finite and nonnegative");
            if (v != d.values(j, i)) throw ValueError("distance matrix must be symmetric");
        }
    }
    const auto un = static_cast<std::size_t>(n);
    std::vector<int> ranks(un * un, 0);
    std::vector<Eigen::Index> order;
    for (Eigen::Index k = 0; k < n; ++k) {
        order.clear();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != k) order.push_back(j);
        }
        // Candidates start in ascending index, so a stable sort realises the tie rule.
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return d.values(k, a) < d.values(k, b); });
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            ranks[static_cast<std::size_t>(k) * un + static_cast<std::size_t>(order[pos])] = static_cast<int>(pos) + 1;
        }
    }
    return RankMatrix(static_cast<int>(n), std::move(ranks), d.scan_ids);
}

// --- rank sums --------------------------------------------------------------

namespace {

long long sum_partner_ranks(const RankMatrix& r, const std::vector<int>& partner)
{
    long long s = 0;
    for (int k = 0; k < r.size(); ++k) s += r(k, partner[static_cast<std::size_t>(k)]);
    return s;
}

}  // namespace

ReliabilityResult rank_sum(const RankMatrix& r, const Pairing& pairing)
{
    if (static_cast<int>(pairing.size()) != r.size()) {
        throw StructuralError("pairing covers " + std::to_string(pairing.size()) + " scans but rank matrix has " +
                              std::to_string(r.size()));
    }
    ReliabilityResult out;
    out.n_scans = r.size();
    out.per_scan_rank.resize(static_cast<std::size_t>(r.size()));
    for (int k = 0; k < r.size(); ++k) {
        const int rank = r(k, pairing[static_cast<std::size_t>(k)]);
        out.per_scan_rank[static_cast<std::size_t>(k)] = rank;
        out.rank_sum += rank;
    }
    return out;
}

ReliabilityResult permutation_null(const RankMatrix& r, const Pairing& observed, int B, std::uint64_t seed, int jobs)
{
    if (B < 100) throw ArgumentError("permutation test needs B >= 100 replicates, got " + std::to_string(B));
    auto out = rank_sum(r, observed);
    std::vector<long long> null(static_cast<std::size_t>(B));
    parallel_for(null.size(), jobs, [&](std::size_t b) {
        auto rng = derive_rng(seed, {0x6e756c6cULL, b});
        const auto p = random_pairing(r.size(), rng);
        null[b] = sum_partner_ranks(r, p.partner());
    });
    const auto at_most = std::count_if(null.begin(), null.end(), [&](long long v) { return v <= out.rank_sum; });
    out.p_value = (1.0 + static_cast<double>(at_most)) / (static_cast<double>(B) + 1.0);
    out.null_samples = std::move(null);
    return out;
}

ReliabilityResult permutation_null(const RankMatrix& r, std::span<const ScanRecord> scans, int B, std::uint64_t seed,
                                   int jobs)
{
    if (static_cast<int>(scans.size()) != r.size()) throw ShapeError("scan list does not match rank matrix");
    return permutation_null(r, true_pairing(scans), B, seed, jobs);
}

// --- edge-wise localization -------------------------------------------------

EdgeLocalization edgewise_rank_sums(std::span<const Connectome> graphs, const Pairing& pairing, int jobs,
                                    double low_percentile)
{
    const auto n = static_cast<int>(graphs.size());
    if (n < 2) throw ArgumentError("edge-wise rank sums need at least 2 graphs");
    if (static_cast<int>(pairing.size()) != n) throw StructuralError("pairing does not cover every graph");
    const int c = graphs[0].n_rois();
    if (c < 2) throw ArgumentError("connectomes need at least 2 ROIs");
    for (const auto& g : graphs) {
        if (g.n_rois() != c) throw ShapeError("connectomes differ in size");
        if (g.thresholded() && std::isfinite(g.threshold_applied()->tau)) {
            throw StateError("edge-wise rank sums need unthresholded connectomes; thresholding zero-inflates edge distances");
        }
    }

    EdgeLocalization out;
    for (int i = 0; i < c; ++i) {
        for (int j = i + 1; j < c; ++j) out.edges.push_back({i, j, 0});
    }
    const auto& partner = pairing.partner();
    parallel_for(out.edges.size(), jobs, [&](std::size_t e) {
        auto& edge = out.edges[e];
        std::vector<double> x(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) x[static_cast<std::size_t>(k)] = graphs[static_cast<std::size_t>(k)].weights()(edge.roi_i, edge.roi_j);
        long long total = 0;
        for (int k = 0; k < n; ++k) {
            const int p = partner[static_cast<std::size_t>(k)];
            const double xk = x[static_cast<std::size_t>(k)];
            const double dp = (xk - x[static_cast<std::size_t>(p)]) * (xk - x[static_cast<std::size_t>(p)]);
            int rank = 1;
            for (int j = 0; j < n; ++j) {
                if (j == k || j == p) continue;
                const double dj = (xk - x[static_cast<std::size_t>(j)]) * (xk - x[static_cast<std::size_t>(j)]);
                if (dj < dp || (dj == dp && j < p)) ++rank;
            }
            total += rank;
        }
        edge.rank_sum = total;
    });

    std::vector<double> sums;
    sums.reserve(out.edges.size());
    for (const auto& e : out.edges) sums.push_back(static_cast<double>(e.rank_sum));
    out.low_edge_threshold = percentile_linear(sums, low_percentile);
    out.roi_scores.assign(static_cast<std::size_t>(c), 0);
    for (const auto& e : out.edges) {
        if (static_cast<double>(e.rank_sum) < out.low_edge_threshold) {
            ++out.roi_scores[static_cast<std::size_t>(e.roi_i)];
            ++out.roi_scores[static_cast<std::size_t>(e.roi_j)];
        }
    }
    return out;
}

// --- reporting --------------------------------------------------------------

nlohmann::json report_to_json(const ReliabilityResult& result, const PipelineConfig& config, int B, std::uint64_t seed)
{
    nlohmann::json j;
    j["config"] = config.to_json();
    j["config_hash"] = config.hash();
    j["n_scans"] = result.n_scans;
    j["rank_sum"] = result.rank_sum;
    j["min_rank_sum"] = result.n_scans;
    j["max_rank_sum"] = static_cast<long long>(result.n_scans) * (result.n_scans - 1);
    j["per_scan_rank"] = result.per_scan_rank;
    j["p_value"] = result.p_value ? nlohmann::json(*result.p_value) : nlohmann::json(nullptr);
    j["B"] = B;
    j["seed"] = seed;
    j["tie_rule"] = tie_rule_name;
    j["metric"] = to_string(config.distance_metric);
    if (result.null_samples && !result.null_samples->empty()) {
        const auto& ns = *result.null_samples;
        const double mean = std::accumulate(ns.begin(), ns.end(), 0.0) / static_cast<double>(ns.size());
        double var = 0.0;
        for (auto v : ns) var += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
        var /= static_cast<double>(ns.size() > 1 ? ns.size() - 1 : 1);
        j["null_mean"] = mean;
        j["null_sd"] = std::sqrt(var);
    }
    return j;
}

std::string heatmap_svg(const Eigen::MatrixXd& m, const std::string& title)
{
    const Eigen::Index n = m.rows();
    const int cell = std::max(4, 480 / static_cast<int>(std::max<Eigen::Index>(n, 1)));
    const int margin = 30;
    const int side = cell * static_cast<int>(n);
    const double lo = n ? m.minCoeff() : 0.0;
    const double hi = n ? m.maxCoeff() : 1.0;
    const double span = hi > lo ? hi - lo : 1.0;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << side + 2 * margin << "\" height=\""
        << side + 2 * margin << "\">\n";
    svg << "<text x=\"" << margin << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double t = (m(i, j) - lo) / span;
            // Dark blue (low) to yellow (high).
            const int r = static_cast<int>(std::lround(255 * t));
            const int g = static_cast<int>(std::lround(40 + 200 * t));
            const int b = static_cast<int>(std::lround(120 * (1.0 - t)));
            svg << "<rect x=\"" << margin + cell * j << "\" y=\"" << margin + cell * i << "\" width=\"" << cell
                << "\" height=\"" << cell << "\" fill=\"rgb(" << r << ',' << g << ',' << b << ")\"/>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace fcid
