#include "fcid/pipeline.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "fcid/errors.hpp"
#include "fcid/graphs.hpp"
#include "fcid/ingest.hpp"
#include "fcid/parallel.hpp"

namespace fcid {

bool Dataset::labeled() const
{
    return !scans.empty() && std::all_of(scans.begin(), scans.end(), [](const auto& s) { return s.labeled(); });
}

double Dataset::shortest_duration_seconds() const
{
    double shortest = std::numeric_limits<double>::infinity();
    for (const auto& ts : series) shortest = std::min(shortest, ts.duration_seconds());
    return shortest;
}

std::vector<std::string> Dataset::subjects() const
{
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& s : scans) {
        if (s.labeled() && seen.insert(s.subject_id).second) out.push_back(s.subject_id);
    }
    return out;
}

Dataset Dataset::subset_subjects(const std::vector<std::string>& subjects) const
{
    const std::set<std::string> keep(subjects.begin(), subjects.end());
    Dataset out{name, {}, {}, voxel_mask};
    for (std::size_t k = 0; k < scans.size(); ++k) {
        if (keep.count(scans[k].subject_id)) {
            out.scans.push_back(scans[k]);
            out.series.push_back(series[k]);
        }
    }
    return out;
}

Dataset make_dataset(std::vector<ScanRecord> scans, std::vector<TimeSeriesMatrix> series, std::string name)
{
    if (scans.size() != series.size()) throw ShapeError("scan and series counts differ");
    for (std::size_t k = 0; k < scans.size(); ++k) scans[k].n_timepoints = static_cast<int>(series[k].cols());
    return Dataset{std::move(name), std::move(scans), std::move(series), std::nullopt};
}

namespace {

bool is_label_map_source(const PipelineConfig& c)
{
    return c.parcellation_source != "identity" && c.parcellation_source != "uniform";
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest, const PipelineConfig& config, int jobs)
{
    Dataset ds;
    ds.name = manifest.stem().string();
    // A generic "manifest.json" is named after its directory instead.
    if (ds.name == "manifest" && manifest.has_parent_path()) ds.name = std::filesystem::absolute(manifest).parent_path().filename().string();
    ds.scans = load_manifest(manifest);
    const auto violations = validate_dataset(ds.scans);
    if (!violations.empty()) {
        std::string msg = "manifest " + manifest.string() + " is invalid:";
        for (const auto& v : violations) msg += "\n  " + v.scan_id + ": " + v.message;
        throw ManifestError(msg);
    }

    const bool any_nifti = std::any_of(ds.scans.begin(), ds.scans.end(),
                                       [](const auto& s) { return s.format == SourceFormat::nifti1; });
    if (any_nifti) {
        if (is_label_map_source(config)) {
            ds.voxel_mask = read_label_map(config.parcellation_source);
        } else if (config.mask_path) {
            ds.voxel_mask = read_label_map(*config.mask_path);
        }
    }

    ds.series.resize(ds.scans.size());
    parallel_for(ds.scans.size(), jobs, [&](std::size_t k) {
        const auto& s = ds.scans[k];
        try {
            if (s.format == SourceFormat::csv) {
                ds.series[k] = read_csv_timeseries(s.path, s.tr_seconds);
            } else {
                const auto h = read_nifti_header(s.path);
                const auto mask = ds.voxel_mask ? *ds.voxel_mask : Parcellation::full_mask(h.spatial_dims());
                ds.series[k] = read_nifti_timeseries(s.path, h, mask, s.tr_seconds);
            }
        } catch (const Error& e) {
            throw ManifestError("scan " + s.scan_id + ": " + e.what());
        }
    });
    for (std::size_t k = 0; k < ds.scans.size(); ++k) {
        ds.scans[k].n_timepoints = static_cast<int>(ds.series[k].cols());
        if (ds.series[k].rows() != ds.series[0].rows()) {
            throw ShapeError("scan " + ds.scans[k].scan_id + " has " + std::to_string(ds.series[k].rows()) +
                             " rows; expected " + std::to_string(ds.series[0].rows()));
        }
    }
    return ds;
}

Parcellation build_parcellation(const Dataset& ds, const PipelineConfig& config)
{
    config.validate();
    if (ds.series.empty()) throw ArgumentError("empty dataset");
    const auto rows = static_cast<int>(ds.series.front().rows());
    if (config.parcellation_source == "identity") {
        return Parcellation::identity(rows);
    }
    if (config.parcellation_source == "uniform") {
        if (ds.voxel_mask) return uniform_partition(*ds.voxel_mask, config.n_rois_target);
        // Tabular rows have no geometry; treat them as a 1-D strip.
        std::vector<VoxelCoord> coords;
        coords.reserve(static_cast<std::size_t>(rows));
        for (int i = 0; i < rows; ++i) coords.push_back({i, 0, 0});
        return uniform_partition(coords, config.n_rois_target);
    }
    auto parc = ds.voxel_mask ? *ds.voxel_mask : read_label_map(config.parcellation_source);
    if (static_cast<int>(parc.labeled_voxel_count()) != rows) {
        throw ShapeError("label map labels " + std::to_string(parc.labeled_voxel_count()) + " voxels but series have " +
                         std::to_string(rows) + " rows");
    }
    return parc;
}

Connectome infer_connectome(const TimeSeriesMatrix& ts, const Parcellation& parc, const PipelineConfig& config)
{
    const TimeSeriesMatrix windowed = config.window_seconds ? window_truncate(ts, *config.window_seconds) : ts;
    const TimeSeriesMatrix roi = config.extraction == Extraction::mean ? extract_mean(windowed, parc)
                                                                      : extract_eigenvariate(windowed, parc);
    auto g = pearson_adjacency(roi);
    if (config.threshold_percentile) {
        g = percentile_threshold(g, *config.threshold_percentile, config.absolute_threshold);
    }
    return g;
}

std::vector<Connectome> infer_connectomes(const Dataset& ds, const Parcellation& parc, const PipelineConfig& config,
                                          int jobs)
{
    std::vector<Connectome> out(ds.size());
    parallel_for(ds.size(), jobs, [&](std::size_t k) {
        try {
            out[k] = infer_connectome(ds.series[k], parc, config);
        } catch (const Error& e) {
            throw Error("scan " + ds.scans[k].scan_id + ": " + e.what());
        }
    });
    return out;
}

std::vector<std::string> scan_ids(const Dataset& ds)
{
    std::vector<std::string> ids;
    ids.reserve(ds.size());
    for (const auto& s : ds.scans) ids.push_back(s.scan_id);
    return ids;
}

Analysis analyze(const Dataset& ds, const Parcellation& parc, const PipelineConfig& config, int jobs)
{
    Analysis a;
    a.graphs = infer_connectomes(ds, parc, config, jobs);
    a.distances = distance_matrix(a.graphs, config.distance_metric, scan_ids(ds), jobs);
    a.ranks = rank_matrix(a.distances);
    return a;
}

}  // namespace fcid
