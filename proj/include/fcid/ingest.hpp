#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fcid/model.hpp"

namespace fcid {

enum class ByteOrder { native, swapped };

/// NIfTI-1 datatype codes accepted by the reader.
enum class NiftiDatatype : std::int16_t {
    uint8 = 2,
    int16 = 4,
    int32 = 8,
    float32 = 16,
    float64 = 64,
};

int bytes_per_voxel(NiftiDatatype dt);

struct NiftiHeader {
    static constexpr std::size_t size = 348;

    std::int32_t sizeof_hdr = 348;
    std::array<std::int16_t, 8> dim{};
    NiftiDatatype datatype = NiftiDatatype::float32;
    std::int16_t bitpix = 32;
    std::array<float, 8> pixdim{};
    float vox_offset = 352.0f;
    float scl_slope = 0.0f;
    float scl_inter = 0.0f;
    std::uint8_t xyzt_units = 0;
    ByteOrder byte_order = ByteOrder::native;

    std::array<int, 3> spatial_dims() const { return {dim[1], dim[2], dim[3]}; }
    std::size_t voxels_per_volume() const;
    int n_volumes() const { return dim[0] >= 4 ? dim[4] : 1; }
    /// pixdim[4] converted to seconds using xyzt_units; 0 when unknown.
    double tr_seconds_from_header() const;
};

/// Decodes the first 348 bytes of a single-file NIfTI-1 image. The byte order is
/// whichever makes sizeof_hdr read 348.
NiftiHeader parse_nifti_header(std::span<const std::byte> bytes);
NiftiHeader read_nifti_header(const std::filesystem::path& path);

/// Voxel values of every volume, scaled by scl_slope/scl_inter when slope != 0.
/// Layout: voxel index fastest, then volume.
std::vector<double> read_nifti_data(const std::filesystem::path& path, const NiftiHeader& header);

/// Rows are mask-labeled voxels in ascending linear index; columns are volumes.
/// tr_seconds comes from the manifest; a mismatching pixdim[4] only produces a warning on stderr.
TimeSeriesMatrix read_nifti_timeseries(const std::filesystem::path& path, const NiftiHeader& header,
                                       const Parcellation& mask, double tr_seconds);

/// Test-fixture writer: single-file .nii with data at offset 352.
struct NiftiWriteOptions {
    NiftiDatatype datatype = NiftiDatatype::float32;
    ByteOrder byte_order = ByteOrder::native;
    float scl_slope = 0.0f;
    float scl_inter = 0.0f;
    float tr_seconds = 0.0f;
};

void write_nifti(const std::filesystem::path& path, std::span<const int> dims, std::span<const double> data,
                 const NiftiWriteOptions& options = {});

/// Rectangular numeric CSV, one row per signal. A first row whose first cell is
/// non-numeric is treated as a header and skipped.
TimeSeriesMatrix read_csv_timeseries(const std::filesystem::path& path, double tr_seconds = 1.0);
std::string format_csv_timeseries(const TimeSeriesMatrix& ts);

/// Integer NIfTI-1 volume (.nii) or "voxel_index,label" CSV. Label gaps are closed
/// densely and the mapping recorded in Parcellation::remap().
Parcellation read_label_map(const std::filesystem::path& path);

using VoxelCoord = std::array<int, 3>;

/// C spatially compact cells whose sizes differ by at most one voxel. Seeds are
/// chosen by farthest-point sampling, then voxels go to the nearest seed with
/// remaining capacity (ties: lower linear index first), and a few centroid
/// refinement passes repeat that assignment. Output grid is the bounding box of the points.
Parcellation uniform_partition(std::span<const VoxelCoord> voxels, int n_cells);
/// Same, over the labeled voxels of a mask; the result shares the mask's grid and row order.
Parcellation uniform_partition(const Parcellation& mask, int n_cells);

}  // namespace fcid
