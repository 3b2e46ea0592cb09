#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fcid/model.hpp"
#include "fcid/reliability.hpp"

namespace fcid {

/// Scans plus their loaded series. Volumetric series hold one row per voxel of
/// `voxel_mask`; tabular series hold whatever rows the file had.
struct Dataset {
    std::string name;
    std::vector<ScanRecord> scans;
    std::vector<TimeSeriesMatrix> series;
    std::optional<Parcellation> voxel_mask;

    std::size_t size() const { return scans.size(); }
    bool labeled() const;
    double shortest_duration_seconds() const;
    /// Scans of the listed subjects, original order preserved.
    Dataset subset_subjects(const std::vector<std::string>& subjects) const;
    std::vector<std::string> subjects() const;
};

/// Reads every scan in the manifest. NIfTI inputs are masked by the config's label
/// map, its mask_path, or (failing both) the full image grid.
Dataset load_dataset(const std::filesystem::path& manifest, const PipelineConfig& config, int jobs = 1);
Dataset make_dataset(std::vector<ScanRecord> scans, std::vector<TimeSeriesMatrix> series, std::string name = "dataset");

/// Parcellation implied by the config, aligned with the dataset's row order.
Parcellation build_parcellation(const Dataset& ds, const PipelineConfig& config);

/// window -> extraction -> Pearson -> optional percentile threshold, per scan.
Connectome infer_connectome(const TimeSeriesMatrix& ts, const Parcellation& parc, const PipelineConfig& config);
std::vector<Connectome> infer_connectomes(const Dataset& ds, const Parcellation& parc, const PipelineConfig& config,
                                          int jobs = 1);

struct Analysis {
    std::vector<Connectome> graphs;
    DistanceMatrix distances;
    RankMatrix ranks;
};

Analysis analyze(const Dataset& ds, const Parcellation& parc, const PipelineConfig& config, int jobs = 1);
std::vector<std::string> scan_ids(const Dataset& ds);

}  // namespace fcid
