#include "fcid/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "fcid/errors.hpp"
#include "fcid/io_util.hpp"
#include "fcid/stats.hpp"

namespace fcid {

TimeSeriesMatrix window_truncate(const TimeSeriesMatrix& ts, double window_seconds)
{
    if (!(window_seconds > 0.0)) throw ArgumentError("window must be positive");
    // The small slack absorbs representation error in window/TR ratios such as 0.3/0.1.
    const double ratio = window_seconds / ts.tr_seconds();
    const auto keep = static_cast<Eigen::Index>(std::floor(ratio + 1e-9));
    if (keep < 2) {
        throw ArgumentError("window of " + std::to_string(window_seconds) + " s holds fewer than 2 samples at TR " +
                            std::to_string(ts.tr_seconds()) + " s");
    }
    if (keep >= ts.cols()) return ts;
    return TimeSeriesMatrix(ts.values().leftCols(keep), ts.row_ids(), ts.tr_seconds());
}

namespace {

// Member rows per cell, each list ascending.
std::vector<std::vector<Eigen::Index>> cell_members(const TimeSeriesMatrix& ts, const Parcellation& parc)
{
    const auto cells = parc.row_cells();
    if (static_cast<Eigen::Index>(cells.size()) != ts.rows()) {
        throw ShapeError("series has " + std::to_string(ts.rows()) + " rows but parcellation labels " +
                         std::to_string(cells.size()) + " voxels");
    }
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(parc.n_cells()));
    for (std::size_t r = 0; r < cells.size(); ++r) {
        members[static_cast<std::size_t>(cells[r] - 1)].push_back(static_cast<Eigen::Index>(r));
    }
    return members;
}

std::vector<std::string> cell_ids(int n)
{
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(n));
    for (int c = 1; c <= n; ++c) ids.push_back("roi" + std::to_string(c));
    return ids;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows)
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

// Leading right singular vector of x (m x N) scaled by its singular value.
// Block power iteration in R^N with a Rayleigh-Ritz step each round.
Eigen::VectorXd leading_projection(const Eigen::MatrixXd& x, const EigenvariateOptions& opt)
{
    const Eigen::Index m = x.rows();
    const Eigen::Index n = x.cols();
    const Eigen::Index k = std::min<Eigen::Index>({4, m, n});

    // Start from the k largest-norm rows: deterministic, and exact when m <= k.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return x.row(a).squaredNorm() > x.row(b).squaredNorm(); });
    Eigen::MatrixXd basis(n, k);
    for (Eigen::Index j = 0; j < k; ++j) basis.col(j) = x.row(order[static_cast<std::size_t>(j)]).transpose();

    Eigen::VectorXd lead = Eigen::VectorXd::Zero(n);
    for (int it = 0; it < opt.max_iterations; ++it) {
        Eigen::MatrixXd w = x.transpose() * (x * basis);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
        Eigen::MatrixXd xq = x * q;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(xq.transpose() * xq);
        // Eigenvalues ascend; reverse so column 0 is the leading Ritz vector.
        basis = q * es.eigenvectors().rowwise().reverse();
        Eigen::VectorXd v = basis.col(0);
        const double change = std::min((v - lead).norm(), (v + lead).norm());
        lead = v;
        if (it > 0 && change <= opt.tolerance) break;
    }
    const double sigma = (x * lead).norm();
    return sigma * lead;
}

}  // namespace

TimeSeriesMatrix extract_mean(const TimeSeriesMatrix& ts, const Parcellation& parc)
{
    const auto members = cell_members(ts, parc);
    Eigen::MatrixXd out(parc.n_cells(), ts.cols());
    for (std::size_t c = 0; c < members.size(); ++c) {
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(ts.cols());
        for (auto r : members[c]) acc += ts.values().row(r);
        out.row(static_cast<Eigen::Index>(c)) = acc / static_cast<double>(members[c].size());
    }
    return TimeSeriesMatrix(std::move(out), cell_ids(parc.n_cells()), ts.tr_seconds());
}

TimeSeriesMatrix extract_eigenvariate(const TimeSeriesMatrix& ts, const Parcellation& parc,
                                      const EigenvariateOptions& options)
{
    const auto members = cell_members(ts, parc);
    Eigen::MatrixXd out(parc.n_cells(), ts.cols());
    for (std::size_t c = 0; c < members.size(); ++c) {
        Eigen::MatrixXd x = gather_rows(ts.values(), members[c]);
        Eigen::RowVectorXd mean = x.colwise().mean();
        x.colwise() -= x.rowwise().mean();
        if (x.cwiseAbs().maxCoeff() == 0.0) {
            throw DegenerateError("cell " + std::to_string(c + 1) + " has no varying voxel; eigenvariate undefined");
        }
        Eigen::VectorXd p = leading_projection(x, options);
        mean.array() -= mean.mean();
        double agreement = mean.dot(p);
        if (std::abs(agreement) <= 1e-12 * mean.norm() * p.norm()) {
            // Mean carries no direction (e.g. perfectly anti-correlated voxels):
            // orient by the loading vector's sum instead.
            agreement = (x * p).sum();
        }
        if (agreement < 0.0) p = -p;
        out.row(static_cast<Eigen::Index>(c)) = p.transpose();
    }
    return TimeSeriesMatrix(std::move(out), cell_ids(parc.n_cells()), ts.tr_seconds());
}

Connectome pearson_adjacency(const TimeSeriesMatrix& roi_ts)
{
    const Eigen::Index c = roi_ts.rows();
    const Eigen::Index n = roi_ts.cols();
    if (c < 2) throw ArgumentError("correlation needs at least 2 ROIs");
    if (n < 3) throw ArgumentError("correlation needs at least 3 timepoints");

    Eigen::MatrixXd z = roi_ts.values();
    z.colwise() -= z.rowwise().mean();
    for (Eigen::Index i = 0; i < c; ++i) {
        const double norm = z.row(i).norm();
        const double scale = roi_ts.values().row(i).cwiseAbs().maxCoeff();
        if (norm == 0.0 || norm <= 1e-13 * std::sqrt(static_cast<double>(n)) * scale) {
            throw DegenerateError("ROI " + roi_ts.row_ids()[static_cast<std::size_t>(i)] + " (row " + std::to_string(i) +
                                  ") is constant; correlation undefined");
        }
        z.row(i) /= norm;
    }
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(c, c);
    w.triangularView<Eigen::StrictlyUpper>() = z * z.transpose();
    for (Eigen::Index i = 0; i < c; ++i) {
        for (Eigen::Index j = i + 1; j < c; ++j) {
            const double r = std::clamp(w(i, j), -1.0, 1.0);
            w(i, j) = r;
            w(j, i) = r;
        }
    }
    return Connectome(std::move(w));
}

double upper_triangle_percentile(const Eigen::MatrixXd& m, double q, bool absolute)
{
    const Eigen::Index c = m.rows();
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(c * (c - 1) / 2));
    for (Eigen::Index i = 0; i < c; ++i) {
        for (Eigen::Index j = i + 1; j < c; ++j) v.push_back(absolute ? std::abs(m(i, j)) : m(i, j));
    }
    if (v.empty()) throw ArgumentError("percentile of an empty upper triangle");
    return percentile_linear(v, q);
}

Connectome percentile_threshold(const Connectome& g, double q, bool absolute)
{
    if (g.thresholded()) throw StateError("connectome is already thresholded");
    if (!(q >= 0.0 && q < 100.0)) throw ArgumentError("percentile must lie in [0, 100)");
    if (q == 0.0) {
        return Connectome(g.weights(), ThresholdInfo{0.0, -std::numeric_limits<double>::infinity(), absolute});
    }
    const double tau = upper_triangle_percentile(g.weights(), q, absolute);
    Eigen::MatrixXd w = g.weights();
    const Eigen::Index c = w.rows();
    for (Eigen::Index i = 0; i < c; ++i) {
        for (Eigen::Index j = i + 1; j < c; ++j) {
            const double key = absolute ? std::abs(w(i, j)) : w(i, j);
            if (key <= tau) {
                w(i, j) = 0.0;
                w(j, i) = 0.0;
            }
        }
    }
    return Connectome(std::move(w), ThresholdInfo{q, tau, absolute});
}

std::string format_connectome_csv(const Connectome& g)
{
    std::ostringstream out;
    out.precision(17);
    const auto& w = g.weights();
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            if (j) out << ',';
            out << w(i, j);
        }
        out << '\n';
    }
    return out.str();
}

namespace {

constexpr char cache_magic[8] = {'F', 'C', 'I', 'D', 'C', 'O', 'N', '1'};

template <typename T>
void put(std::string& buf, const T& v)
{
    buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::string& buf, const std::string& s)
{
    put(buf, static_cast<std::uint32_t>(s.size()));
    buf.append(s);
}

struct Reader {
    std::string_view data;
    std::size_t pos = 0;

    template <typename T>
    bool get(T& v)
    {
        if (pos + sizeof(T) > data.size()) return false;
        std::memcpy(&v, data.data() + pos, sizeof(T));
        pos += sizeof(T);
        return true;
    }

    bool get_string(std::string& s)
    {
        std::uint32_t len = 0;
        if (!get(len) || pos + len > data.size()) return false;
        s.assign(data.substr(pos, len));
        pos += len;
        return true;
    }
};

}  // namespace

void write_connectome_cache(const std::filesystem::path& path, const CachedConnectome& entry)
{
    std::string buf(cache_magic, sizeof cache_magic);
    const auto& w = entry.graph.weights();
    const auto c = static_cast<std::uint32_t>(w.rows());
    put(buf, c);
    const auto& th = entry.graph.threshold_applied();
    put(buf, static_cast<std::uint8_t>(th.has_value()));
    put(buf, th ? th->percentile : 0.0);
    put(buf, th ? th->tau : 0.0);
    put(buf, static_cast<std::uint8_t>(th && th->absolute));
    put_string(buf, entry.scan_id);
    put_string(buf, entry.config_hash);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < w.cols(); ++j) put(buf, w(i, j));
    }
    write_file_atomic(path, buf);
}

std::optional<CachedConnectome> read_connectome_cache(const std::filesystem::path& path, const std::string& scan_id,
                                                      const std::string& config_hash)
{
    if (!std::filesystem::exists(path)) return std::nullopt;
    const std::string raw = read_file(path);
    if (raw.size() < sizeof cache_magic || std::memcmp(raw.data(), cache_magic, sizeof cache_magic) != 0) {
        return std::nullopt;
    }
    Reader rd{raw, sizeof cache_magic};
    std::uint32_t c = 0;
    std::uint8_t has_th = 0, absolute = 0;
    double percentile = 0, tau = 0;
    CachedConnectome out;
    if (!rd.get(c) || !rd.get(has_th) || !rd.get(percentile) || !rd.get(tau) || !rd.get(absolute) ||
        !rd.get_string(out.scan_id) || !rd.get_string(out.config_hash)) {
        return std::nullopt;
    }
    if (out.scan_id != scan_id || out.config_hash != config_hash) return std::nullopt;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(c, c);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < w.cols(); ++j) {
            double v;
            if (!rd.get(v)) return std::nullopt;
            w(i, j) = v;
            w(j, i) = v;
        }
    }
    if (rd.pos != raw.size()) return std::nullopt;
    std::optional<ThresholdInfo> th;
    if (has_th) th = ThresholdInfo{percentile, tau, absolute != 0};
    out.graph = Connectome(std::move(w), th);
    return out;
}

}  // namespace fcid
