#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace fcid {

enum class SourceFormat { nifti1, csv };

std::string to_string(SourceFormat f);
SourceFormat source_format_from_string(const std::string& s);

struct ScanRecord {
    std::string scan_id;
    std::string subject_id;  // empty when the manifest carries no labels
    int session_index = 1;   // 1 = test, 2 = retest
    double tr_seconds = 0.0;
    std::filesystem::path path;
    SourceFormat format = SourceFormat::csv;
    int n_timepoints = 0;  // 0 until the series has been read

    bool labeled() const { return !subject_id.empty(); }
};

/// Rows are signals (voxels or ROIs), columns are timepoints.
class TimeSeriesMatrix {
public:
    TimeSeriesMatrix() = default;
    TimeSeriesMatrix(Eigen::MatrixXd values, std::vector<std::string> row_ids, double tr_seconds);
    /// Row ids default to "r0", "r1", ...
    TimeSeriesMatrix(Eigen::MatrixXd values, double tr_seconds);

    const Eigen::MatrixXd& values() const { return values_; }
    const std::vector<std::string>& row_ids() const { return row_ids_; }
    double tr_seconds() const { return tr_seconds_; }
    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index cols() const { return values_.cols(); }
    double duration_seconds() const { return static_cast<double>(cols()) * tr_seconds_; }

private:
    Eigen::MatrixXd values_;
    std::vector<std::string> row_ids_;
    double tr_seconds_ = 1.0;
};

enum class ParcellationScheme { uniform, functional, external, identity };

std::string to_string(ParcellationScheme s);

/// Voxel -> cell label map over a 3-D grid (linear index x fastest). Label 0 is
/// background; cells are 1..n_cells and each holds at least one voxel.
class Parcellation {
public:
    Parcellation() = default;
    Parcellation(std::array<int, 3> grid, std::vector<std::int32_t> labels, ParcellationScheme scheme,
                 std::map<int, int> remap = {});

    /// One cell per row of a P-row series (rows are already ROIs).
    static Parcellation identity(int n_rows);
    /// All-ones mask over a grid.
    static Parcellation full_mask(std::array<int, 3> grid);

    const std::array<int, 3>& grid() const { return grid_; }
    const std::vector<std::int32_t>& labels() const { return labels_; }
    int n_cells() const { return n_cells_; }
    ParcellationScheme scheme() const { return scheme_; }
    /// Original label -> dense label, populated only when gaps were closed.
    const std::map<int, int>& remap() const { return remap_; }

    std::size_t voxel_count() const { return labels_.size(); }
    std::size_t labeled_voxel_count() const;
    /// Linear indices of labeled voxels, ascending. This is the row order of ingested series.
    std::vector<std::size_t> labeled_voxels() const;
    /// Cell id (1..C) for each labeled voxel, in labeled_voxels() order.
    std::vector<int> row_cells() const;
    std::vector<std::size_t> cell_sizes() const;

private:
    std::array<int, 3> grid_{0, 0, 0};
    std::vector<std::int32_t> labels_;
    int n_cells_ = 0;
    ParcellationScheme scheme_ = ParcellationScheme::external;
    std::map<int, int> remap_;
};

struct ThresholdInfo {
    double percentile = 0.0;
    double tau = 0.0;  // -inf when percentile == 0
    bool absolute = false;
};

/// Symmetric weighted adjacency matrix with a zero diagonal.
class Connectome {
public:
    Connectome() = default;
    explicit Connectome(Eigen::MatrixXd weights, std::optional<ThresholdInfo> threshold = std::nullopt);

    const Eigen::MatrixXd& weights() const { return weights_; }
    int n_rois() const { return static_cast<int>(weights_.rows()); }
    const std::optional<ThresholdInfo>& threshold_applied() const { return threshold_; }
    bool thresholded() const { return threshold_.has_value(); }

private:
    Eigen::MatrixXd weights_;
    std::optional<ThresholdInfo> threshold_;
};

enum class Extraction { mean, eigenvariate };
enum class DistanceMetric { squared_frobenius, l1 };

std::string to_string(Extraction e);
std::string to_string(DistanceMetric m);

struct PipelineConfig {
    int n_rois_target = 0;  // used by the uniform parcellation
    Extraction extraction = Extraction::mean;
    std::optional<double> threshold_percentile;  // nullopt = no threshold
    bool absolute_threshold = false;
    std::optional<double> window_seconds;
    DistanceMetric distance_metric = DistanceMetric::squared_frobenius;
    // "identity" (rows are ROIs), "uniform", or a label-map path.
    std::string parcellation_source = "identity";
    // Gray-matter mask for uniform parcellation of volumetric inputs.
    std::optional<std::filesystem::path> mask_path;

    /// Throws ArgumentError on the first violated invariant.
    void validate() const;
    /// Additionally checks the window against the shortest scan duration.
    void validate(double shortest_scan_seconds) const;

    nlohmann::json to_json() const;
    static PipelineConfig from_json(const nlohmann::json& j);
    /// Stable 16-hex-digit hash of the canonical JSON form.
    std::string hash() const;
};

PipelineConfig load_config(const std::filesystem::path& path);

/// Fixed-point-free involution over scan indices.
class Pairing {
public:
    Pairing() = default;
    /// Throws StructuralError unless partner is a fixed-point-free involution.
    explicit Pairing(std::vector<int> partner);
    static Pairing from_pairs(int n, std::span<const std::pair<int, int>> pairs);

    const std::vector<int>& partner() const { return partner_; }
    int operator[](std::size_t k) const { return partner_[k]; }
    std::size_t size() const { return partner_.size(); }
    /// Pairs (k, partner[k]) with k < partner[k], ascending by k.
    std::vector<std::pair<int, int>> pairs() const;

    bool operator==(const Pairing&) const = default;

    static bool is_valid(std::span<const int> partner);

private:
    std::vector<int> partner_;
};

struct Violation {
    enum class Kind { empty_scan_id, duplicate_scan_id, duplicate_session, nonpositive_tr, too_few_timepoints, bad_session, missing_file };
    Kind kind;
    std::string scan_id;
    std::string message;

    bool operator==(const Violation&) const = default;
    auto operator<=>(const Violation&) const = default;
};

std::string to_string(Violation::Kind k);

/// Report-style validation; an empty result means the dataset is valid.
std::vector<Violation> validate_dataset(std::span<const ScanRecord> scans, bool check_files = true);

/// Same-subject other-session partner for every scan.
Pairing true_pairing(std::span<const ScanRecord> scans);

/// Dataset manifest: JSON array of {scan_id, subject_id, session, tr_seconds, path, format}.
/// Relative paths resolve against the manifest's directory.
std::vector<ScanRecord> load_manifest(const std::filesystem::path& path);
nlohmann::json manifest_to_json(std::span<const ScanRecord> scans, const std::filesystem::path& relative_to = {});

}  // namespace fcid
