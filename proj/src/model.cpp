#include "fcid/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "fcid/errors.hpp"
#include "fcid/io_util.hpp"

namespace fcid {

std::string to_string(SourceFormat f)
{
    return f == SourceFormat::nifti1 ? "nifti1" : "csv";
}

SourceFormat source_format_from_string(const std::string& s)
{
    if (s == "nifti1") return SourceFormat::nifti1;
    if (s == "csv") return SourceFormat::csv;
    throw ManifestError("unknown source format '" + s + "' (expected nifti1 or csv)");
}

// --- TimeSeriesMatrix -------------------------------------------------------

TimeSeriesMatrix::TimeSeriesMatrix(Eigen::MatrixXd values, std::vector<std::string> row_ids, double tr_seconds)
    : values_(std::move(values)), row_ids_(std::move(row_ids)), tr_seconds_(tr_seconds)
{
    if (!(tr_seconds_ > 0.0) || !std::isfinite(tr_seconds_)) {
        throw ArgumentError("tr_seconds must be positive");
    }
    if (static_cast<Eigen::Index>(row_ids_.size()) != values_.rows()) {
        throw ShapeError("row id count " + std::to_string(row_ids_.size()) + " does not match " +
                         std::to_string(values_.rows()) + " rows");
    }
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
        for (Eigen::Index i = 0; i < values_.rows(); ++i) {
            if (!std::isfinite(values_(i, j))) {
                throw ValueError("non-finite value at row " + std::to_string(i) + ", column " + std::to_string(j));
            }
        }
    }
}

static std::vector<std::string> default_row_ids(Eigen::Index n)
{
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        ids.push_back("r" + std::to_string(i));
    }
    return ids;
}

TimeSeriesMatrix::TimeSeriesMatrix(Eigen::MatrixXd values, double tr_seconds)
    : TimeSeriesMatrix(values, default_row_ids(values.rows()), tr_seconds)
{
}

// --- Parcellation -----------------------------------------------------------

std::string to_string(ParcellationScheme s)
{
    switch (s) {
    case ParcellationScheme::uniform: return "uniform";
    case ParcellationScheme::functional: return "functional";
    case ParcellationScheme::external: return "external";
    case ParcellationScheme::identity: return "identity";
    }
    return "?";
}

Parcellation::Parcellation(std::array<int, 3> grid, std::vector<std::int32_t> labels, ParcellationScheme scheme,
                           std::map<int, int> remap)
    : grid_(grid), labels_(std::move(labels)), scheme_(scheme), remap_(std::move(remap))
{
    std::size_t expected = 1;
    for (int d : grid_) {
        if (d < 1) throw ShapeError("parcellation grid dimensions must be >= 1");
        expected *= static_cast<std::size_t>(d);
    }
    if (labels_.size() != expected) {
        throw ShapeError("label count " + std::to_string(labels_.size()) + " does not match grid size " +
                         std::to_string(expected));
    }
    int max_label = 0;
    for (auto l : labels_) {
        if (l < 0) throw FormatError("negative label " + std::to_string(l));
        max_label = std::max(max_label, static_cast<int>(l));
    }
    n_cells_ = max_label;
    std::vector<char> seen(static_cast<std::size_t>(n_cells_) + 1, 0);
    for (auto l : labels_) seen[static_cast<std::size_t>(l)] = 1;
    for (int c = 1; c <= n_cells_; ++c) {
        if (!seen[static_cast<std::size_t>(c)]) {
            throw FormatError("cell " + std::to_string(c) + " has no voxels");
        }
    }
}

Parcellation Parcellation::identity(int n_rows)
{
    if (n_rows < 1) throw ArgumentError("identity parcellation needs at least one row");
    std::vector<std::int32_t> labels(static_cast<std::size_t>(n_rows));
    for (int i = 0; i < n_rows; ++i) labels[static_cast<std::size_t>(i)] = i + 1;
    return Parcellation({n_rows, 1, 1}, std::move(labels), ParcellationScheme::identity);
}

Parcellation Parcellation::full_mask(std::array<int, 3> grid)
{
    std::size_t n = static_cast<std::size_t>(grid[0]) * static_cast<std::size_t>(grid[1]) * static_cast<std::size_t>(grid[2]);
    return Parcellation(grid, std::vector<std::int32_t>(n, 1), ParcellationScheme::external);
}

std::size_t Parcellation::labeled_voxel_count() const
{
    return static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(), [](auto l) { return l != 0; }));
}

std::vector<std::size_t> Parcellation::labeled_voxels() const
{
    std::vector<std::size_t> out;
    out.reserve(labeled_voxel_count());
    for (std::size_t v = 0; v < labels_.size(); ++v) {
        if (labels_[v] != 0) out.push_back(v);
    }
    return out;
}

std::vector<int> Parcellation::row_cells() const
{
    std::vector<int> out;
    out.reserve(labeled_voxel_count());
    for (auto l : labels_) {
        if (l != 0) out.push_back(l);
    }
    return out;
}

std::vector<std::size_t> Parcellation::cell_sizes() const
{
    std::vector<std::size_t> sizes(static_cast<std::size_t>(n_cells_), 0);
    for (auto l : labels_) {
        if (l != 0) ++sizes[static_cast<std::size_t>(l - 1)];
    }
    return sizes;
}

// --- Connectome -------------------------------------------------------------

Connectome::Connectome(Eigen::MatrixXd weights, std::optional<ThresholdInfo> threshold)
    : weights_(std::move(weights)), threshold_(threshold)
{
    if (weights_.rows() != weights_.cols()) {
        throw ShapeError("connectome must be square");
    }
    const Eigen::Index n = weights_.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (weights_(i, i) != 0.0) throw ValueError("connectome diagonal must be 0");
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double w = weights_(i, j);
            if (w != weights_(j, i)) throw ValueError("connectome must be symmetric");
            if (!std::isfinite(w) || std::abs(w) > 1.0) {
                throw ValueError("connectome weight out of [-1, 1] at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
            }
        }
    }
}

// --- PipelineConfig ---------------------------------------------------------

std::string to_string(Extraction e)
{
    return e == Extraction::mean ? "mean" : "eigenvariate";
}

std::string to_string(DistanceMetric m)
{
    return m == DistanceMetric::squared_frobenius ? "squared_frobenius" : "l1";
}

void PipelineConfig::validate() const
{
    if (parcellation_source.empty()) {
        throw ArgumentError("parcellation_source must be set");
    }
    if (parcellation_source == "uniform" && n_rois_target < 1) {
        throw ArgumentError("uniform parcellation needs n_rois_target >= 1");
    }
    if (threshold_percentile && !(*threshold_percentile >= 0.0 && *threshold_percentile < 100.0)) {
        throw ArgumentError("threshold percentile must lie in [0, 100)");
    }
    if (window_seconds && !(*window_seconds > 0.0)) {
        throw ArgumentError("window_seconds must be positive");
    }
}

void PipelineConfig::validate(double shortest_scan_seconds) const
{
    validate();
    if (window_seconds && *window_seconds > shortest_scan_seconds) {
        throw ArgumentError("window_seconds " + std::to_string(*window_seconds) + " exceeds shortest scan duration " +
                            std::to_string(shortest_scan_seconds));
    }
}

nlohmann::json PipelineConfig::to_json() const
{
    nlohmann::json j;
    j["n_rois_target"] = n_rois_target;
    j["extraction"] = to_string(extraction);
    j["threshold_percentile"] = threshold_percentile ? nlohmann::json(*threshold_percentile) : nlohmann::json(nullptr);
    j["absolute_threshold"] = absolute_threshold;
    j["window_seconds"] = window_seconds ? nlohmann::json(*window_seconds) : nlohmann::json(nullptr);
    j["distance_metric"] = to_string(distance_metric);
    j["parcellation_source"] = parcellation_source;
    j["mask_path"] = mask_path ? nlohmann::json(mask_path->string()) : nlohmann::json(nullptr);
    return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j)
{
    PipelineConfig c;
    try {
        if (j.contains("n_rois_target")) c.n_rois_target = j.at("n_rois_target").get<int>();
        if (j.contains("extraction")) {
            auto e = j.at("extraction").get<std::string>();
            if (e == "mean") c.extraction = Extraction::mean;
            else if (e == "eigenvariate" || e == "eig") c.extraction = Extraction::eigenvariate;
            else throw ArgumentError("unknown extraction '" + e + "'");
        }
        if (j.contains("threshold_percentile") && !j.at("threshold_percentile").is_null()) {
            c.threshold_percentile = j.at("threshold_percentile").get<double>();
        }
        if (j.contains("absolute_threshold")) c.absolute_threshold = j.at("absolute_threshold").get<bool>();
        if (j.contains("window_seconds") && !j.at("window_seconds").is_null()) {
            c.window_seconds = j.at("window_seconds").get<double>();
        }
        if (j.contains("distance_metric")) {
            auto m = j.at("distance_metric").get<std::string>();
            if (m == "squared_frobenius") c.distance_metric = DistanceMetric::squared_frobenius;
            else if (m == "l1") c.distance_metric = DistanceMetric::l1;
            else throw ArgumentError("unknown distance_metric '" + m + "'");
        }
        if (j.contains("parcellation_source")) c.parcellation_source = j.at("parcellation_source").get<std::string>();
        if (j.contains("mask_path") && !j.at("mask_path").is_null()) {
            c.mask_path = j.at("mask_path").get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string PipelineConfig::hash() const
{
    return hex64(fnv1a64(to_json().dump()));
}

PipelineConfig load_config(const std::filesystem::path& path)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError("config " + path.string() + ": " + e.what());
    }
    auto c = PipelineConfig::from_json(j);
    // Relative label-map and mask paths are taken relative to the config file.
    auto base = path.parent_path();
    if (c.parcellation_source != "identity" && c.parcellation_source != "uniform") {
        std::filesystem::path p(c.parcellation_source);
        if (p.is_relative()) c.parcellation_source = (base / p).string();
    }
    if (c.mask_path && c.mask_path->is_relative()) c.mask_path = base / *c.mask_path;
    return c;
}

// --- Pairing ----------------------------------------------------------------

bool Pairing::is_valid(std::span<const int> partner)
{
    const auto n = static_cast<int>(partner.size());
    if (n % 2 != 0) return false;
    for (int k = 0; k < n; ++k) {
        const int p = partner[static_cast<std::size_t>(k)];
        if (p < 0 || p >= n || p == k) return false;
        if (partner[static_cast<std::size_t>(p)] != k) return false;
    }
    return true;
}

Pairing::Pairing(std::vector<int> partner) : partner_(std::move(partner))
{
    if (!is_valid(partner_)) {
        throw StructuralError("pairing is not a fixed-point-free involution over " + std::to_string(partner_.size()) +
                              " scans");
    }
}

Pairing Pairing::from_pairs(int n, std::span<const std::pair<int, int>> pairs)
{
    std::vector<int> partner(static_cast<std::size_t>(std::max(n, 0)), -1);
    for (auto [a, b] : pairs) {
        if (a < 0 || b < 0 || a >= n || b >= n) throw StructuralError("pair index out of range");
        if (partner[static_cast<std::size_t>(a)] != -1 || partner[static_cast<std::size_t>(b)] != -1) {
            throw StructuralError("scan listed in more than one pair");
        }
        partner[static_cast<std::size_t>(a)] = b;
        partner[static_cast<std::size_t>(b)] = a;
    }
    return Pairing(std::move(partner));
}

std::vector<std::pair<int, int>> Pairing::pairs() const
{
    std::vector<std::pair<int, int>> out;
    for (std::size_t k = 0; k < partner_.size(); ++k) {
        if (static_cast<int>(k) < partner_[k]) out.emplace_back(static_cast<int>(k), partner_[k]);
    }
    return out;
}

// --- dataset validation -----------------------------------------------------

std::string to_string(Violation::Kind k)
{
    switch (k) {
    case Violation::Kind::empty_scan_id: return "empty_scan_id";
    case Violation::Kind::duplicate_scan_id: return "duplicate_scan_id";
    case Violation::Kind::duplicate_session: return "duplicate_session";
    case Violation::Kind::nonpositive_tr: return "nonpositive_tr";
    case Violation::Kind::too_few_timepoints: return "too_few_timepoints";
    case Violation::Kind::bad_session: return "bad_session";
    case Violation::Kind::missing_file: return "missing_file";
    }
    return "?";
}

std::vector<Violation> validate_dataset(std::span<const ScanRecord> scans, bool check_files)
{
    std::vector<Violation> out;
    std::map<std::string, int> id_count;
    std::map<std::pair<std::string, int>, int> pair_count;
    for (const auto& s : scans) {
        if (s.scan_id.empty()) {
            out.push_back({Violation::Kind::empty_scan_id, s.scan_id, "scan with empty scan_id"});
        }
        ++id_count[s.scan_id];
        if (s.labeled()) ++pair_count[{s.subject_id, s.session_index}];
        if (!(s.tr_seconds > 0.0)) {
            out.push_back({Violation::Kind::nonpositive_tr, s.scan_id, "tr_seconds must be > 0"});
        }
        if (s.n_timepoints != 0 && s.n_timepoints < 2) {
            out.push_back({Violation::Kind::too_few_timepoints, s.scan_id, "n_timepoints must be >= 2"});
        }
        if (s.session_index < 1) {
            out.push_back({Violation::Kind::bad_session, s.scan_id, "session index must be >= 1"});
        }
        if (check_files && !std::filesystem::exists(s.path)) {
            out.push_back({Violation::Kind::missing_file, s.scan_id, "missing file " + s.path.string()});
        }
    }
    for (const auto& [id, count] : id_count) {
        if (count > 1 && !id.empty()) {
            out.push_back({Violation::Kind::duplicate_scan_id, id, "scan_id appears " + std::to_string(count) + " times"});
        }
    }
    for (const auto& [key, count] : pair_count) {
        if (count > 1) {
            out.push_back({Violation::Kind::duplicate_session, key.first + "/" + std::to_string(key.second),
                           "subject " + key.first + " session " + std::to_string(key.second) + " appears " +
                               std::to_string(count) + " times"});
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Pairing true_pairing(std::span<const ScanRecord> scans)
{
    std::map<std::string, std::vector<int>> by_subject;
    for (std::size_t k = 0; k < scans.size(); ++k) {
        if (!scans[k].labeled()) {
            throw StructuralError("scan " + scans[k].scan_id + " has no subject label");
        }
        by_subject[scans[k].subject_id].push_back(static_cast<int>(k));
    }
    std::vector<int> partner(scans.size(), -1);
    for (const auto& [subject, idx] : by_subject) {
        if (idx.size() != 2) {
            throw StructuralError("subject " + subject + " has " + std::to_string(idx.size()) +
                                  " sessions; exactly 2 are required");
        }
        if (scans[static_cast<std::size_t>(idx[0])].session_index == scans[static_cast<std::size_t>(idx[1])].session_index) {
            throw StructuralError("subject " + subject + " has two scans with the same session index");
        }
        partner[static_cast<std::size_t>(idx[0])] = idx[1];
        partner[static_cast<std::size_t>(idx[1])] = idx[0];
    }
    return Pairing(std::move(partner));
}

// --- manifest ---------------------------------------------------------------

std::vector<ScanRecord> load_manifest(const std::filesystem::path& path)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ManifestError("manifest " + path.string() + ": " + e.what());
    }
    if (!j.is_array() || j.empty()) {
        throw ManifestError("manifest must be a nonempty JSON array");
    }
    const auto base = path.parent_path();
    std::vector<ScanRecord> scans;
    for (const auto& e : j) {
        try {
            ScanRecord s;
            s.scan_id = e.at("scan_id").get<std::string>();
            if (e.contains("subject_id") && !e.at("subject_id").is_null()) s.subject_id = e.at("subject_id").get<std::string>();
            if (e.contains("session") && !e.at("session").is_null()) s.session_index = e.at("session").get<int>();
            s.tr_seconds = e.at("tr_seconds").get<double>();
            std::filesystem::path p = e.at("path").get<std::string>();
            s.path = p.is_relative() ? base / p : p;
            s.format = source_format_from_string(e.value("format", std::string("csv")));
            scans.push_back(std::move(s));
        } catch (const nlohmann::json::exception& ex) {
            throw ManifestError("manifest entry " + e.dump() + ": " + ex.what());
        }
    }
    return scans;
}

nlohmann::json manifest_to_json(std::span<const ScanRecord> scans, const std::filesystem::path& relative_to)
{
    auto arr = nlohmann::json::array();
    for (const auto& s : scans) {
        nlohmann::json e;
        e["scan_id"] = s.scan_id;
        e["subject_id"] = s.labeled() ? nlohmann::json(s.subject_id) : nlohmann::json(nullptr);
        e["session"] = s.session_index;
        e["tr_seconds"] = s.tr_seconds;
        auto p = relative_to.empty() ? s.path : s.path.lexically_relative(relative_to);
        e["path"] = p.generic_string();
        e["format"] = to_string(s.format);
        arr.push_back(std::move(e));
    }
    return arr;
}

}  // namespace fcid
