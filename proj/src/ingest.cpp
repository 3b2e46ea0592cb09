#include "fcid/ingest.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "fcid/errors.hpp"
#include "fcid/io_util.hpp"

namespace fcid {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T byteswap_value(T v)
{
    std::array<std::byte, sizeof(T)> raw;
    std::memcpy(raw.data(), &v, sizeof(T));
    std::reverse(raw.begin(), raw.end());
    std::memcpy(&v, raw.data(), sizeof(T));
    return v;
}

template <typename T>
T load(const std::byte* p, ByteOrder order)
{
    T v;
    std::memcpy(&v, p, sizeof(T));
    return order == ByteOrder::swapped ? byteswap_value(v) : v;
}

template <typename T>
void store(std::byte* p, T v, ByteOrder order)
{
    if (order == ByteOrder::swapped) v = byteswap_value(v);
    std::memcpy(p, &v, sizeof(T));
}

// NIfTI-1 header field offsets.
constexpr std::size_t off_dim = 40;
constexpr std::size_t off_datatype = 70;
constexpr std::size_t off_bitpix = 72;
constexpr std::size_t off_pixdim = 76;
constexpr std::size_t off_vox_offset = 108;
constexpr std::size_t off_scl_slope = 112;
constexpr std::size_t off_scl_inter = 116;
constexpr std::size_t off_xyzt_units = 123;
constexpr std::size_t off_magic = 344;

bool supported_datatype(std::int16_t code)
{
    switch (code) {
    case 2: case 4: case 8: case 16: case 64: return true;
    default: return false;
    }
}

double decode_voxel(const std::byte* p, NiftiDatatype dt, ByteOrder order)
{
    switch (dt) {
    case NiftiDatatype::uint8: return static_cast<double>(std::to_integer<std::uint8_t>(*p));
    case NiftiDatatype::int16: return static_cast<double>(load<std::int16_t>(p, order));
    case NiftiDatatype::int32: return static_cast<double>(load<std::int32_t>(p, order));
    case NiftiDatatype::float32: return static_cast<double>(load<float>(p, order));
    case NiftiDatatype::float64: return load<double>(p, order);
    }
    return 0.0;
}

void encode_voxel(std::byte* p, double v, NiftiDatatype dt, ByteOrder order)
{
    switch (dt) {
    case NiftiDatatype::uint8: *p = static_cast<std::byte>(static_cast<std::uint8_t>(v)); break;
    case NiftiDatatype::int16: store(p, static_cast<std::int16_t>(v), order); break;
    case NiftiDatatype::int32: store(p, static_cast<std::int32_t>(v), order); break;
    case NiftiDatatype::float32: store(p, static_cast<float>(v), order); break;
    case NiftiDatatype::float64: store(p, v, order); break;
    }
}

bool is_nifti_path(const std::filesystem::path& p)
{
    return p.extension() == ".nii";
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

// Accepts anything from_chars accepts, including nan/inf, so the caller can
// distinguish "not a number" from "non-finite number".
bool parse_double(std::string_view s, double& out)
{
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string> read_lines(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) lines.push_back(line);
    }
    return lines;
}

Parcellation densify(std::array<int, 3> grid, std::vector<std::int32_t> labels, ParcellationScheme scheme)
{
    std::set<std::int32_t> present;
    for (auto l : labels) {
        if (l < 0) throw FormatError("negative label " + std::to_string(l));
        if (l != 0) present.insert(l);
    }
    std::map<int, int> remap;
    int next = 1;
    bool gaps = false;
    for (auto l : present) {
        remap[l] = next;
        if (l != next) gaps = true;
        ++next;
    }
    if (gaps) {
        for (auto& l : labels) {
            if (l != 0) l = remap[l];
        }
    } else {
        remap.clear();
    }
    return Parcellation(grid, std::move(labels), scheme, std::move(remap));
}

}  // namespace

int bytes_per_voxel(NiftiDatatype dt)
{
    switch (dt) {
    case NiftiDatatype::uint8: return 1;
    case NiftiDatatype::int16: return 2;
    case NiftiDatatype::int32: return 4;
    case NiftiDatatype::float32: return 4;
    case NiftiDatatype::float64: return 8;
    }
    return 0;
}

std::size_t NiftiHeader::voxels_per_volume() const
{
    std::size_t n = 1;
    for (int d = 1; d <= std::min<int>(dim[0], 3); ++d) n *= static_cast<std::size_t>(dim[static_cast<std::size_t>(d)]);
    return n;
}

double NiftiHeader::tr_seconds_from_header() const
{
    const double v = pixdim[4];
    switch (xyzt_units & 0x38) {
    case 8: return v;
    case 16: return v / 1e3;
    case 24: return v / 1e6;
    default: return v;  // unknown units; most writers use seconds
    }
}

NiftiHeader parse_nifti_header(std::span<const std::byte> bytes)
{
    if (bytes.size() < NiftiHeader::size) {
        throw UnsupportedFormatError("NIfTI header needs 348 bytes, got " + std::to_string(bytes.size()));
    }
    const std::byte* p = bytes.data();
    NiftiHeader h;
    if (load<std::int32_t>(p, ByteOrder::native) == 348) {
        h.byte_order = ByteOrder::native;
    } else if (load<std::int32_t>(p, ByteOrder::swapped) == 348) {
        h.byte_order = ByteOrder::swapped;
    } else {
        throw UnsupportedFormatError("sizeof_hdr is not 348 in either byte order; not a NIfTI-1 file");
    }
    const auto order = h.byte_order;
    h.sizeof_hdr = 348;
    for (std::size_t i = 0; i < 8; ++i) {
        h.dim[i] = load<std::int16_t>(p + off_dim + 2 * i, order);
        h.pixdim[i] = load<float>(p + off_pixdim + 4 * i, order);
    }
    const auto dt = load<std::int16_t>(p + off_datatype, order);
    if (!supported_datatype(dt)) {
        throw UnsupportedDatatypeError("NIfTI datatype code " + std::to_string(dt) +
                                       " not supported (uint8, int16, int32, float32, float64)");
    }
    h.datatype = static_cast<NiftiDatatype>(dt);
    h.bitpix = load<std::int16_t>(p + off_bitpix, order);
    h.vox_offset = load<float>(p + off_vox_offset, order);
    h.scl_slope = load<float>(p + off_scl_slope, order);
    h.scl_inter = load<float>(p + off_scl_inter, order);
    h.xyzt_units = std::to_integer<std::uint8_t>(p[off_xyzt_units]);

    if (h.dim[0] < 1 || h.dim[0] > 7) {
        throw UnsupportedFormatError("dim[0] = " + std::to_string(h.dim[0]) + " outside [1, 7]");
    }
    for (int d = 1; d <= h.dim[0]; ++d) {
        if (h.dim[static_cast<std::size_t>(d)] < 1) {
            throw UnsupportedFormatError("dim[" + std::to_string(d) + "] must be >= 1");
        }
    }
    if (h.vox_offset < 348.0f) {
        throw UnsupportedFormatError("vox_offset below 348; only single-file images are supported");
    }
    if (h.bitpix != 8 * bytes_per_voxel(h.datatype)) {
        throw UnsupportedFormatError("bitpix " + std::to_string(h.bitpix) + " inconsistent with datatype");
    }
    return h;
}

NiftiHeader read_nifti_header(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::array<std::byte, NiftiHeader::size> buf{};
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
        throw IoError(path.string() + ": file shorter than a NIfTI-1 header");
    }
    return parse_nifti_header(buf);
}

std::vector<double> read_nifti_data(const std::filesystem::path& path, const NiftiHeader& header)
{
    std::size_t total = header.voxels_per_volume();
    for (int d = 4; d <= header.dim[0]; ++d) total *= static_cast<std::size_t>(header.dim[static_cast<std::size_t>(d)]);
    const auto bpv = static_cast<std::size_t>(bytes_per_voxel(header.datatype));

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    in.seekg(static_cast<std::streamoff>(header.vox_offset));
    std::vector<std::byte> raw(total * bpv);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw IoError(path.string() + ": truncated data section (expected " + std::to_string(raw.size()) +
                      " bytes, got " + std::to_string(in.gcount()) + ")");
    }
    std::vector<double> out(total);
    const bool scale = header.scl_slope != 0.0f;
    const double slope = header.scl_slope;
    const double inter = header.scl_inter;
    for (std::size_t i = 0; i < total; ++i) {
        double v = decode_voxel(raw.data() + i * bpv, header.datatype, header.byte_order);
        out[i] = scale ? v * slope + inter : v;
    }
    return out;
}

TimeSeriesMatrix read_nifti_timeseries(const std::filesystem::path& path, const NiftiHeader& header,
                                       const Parcellation& mask, double tr_seconds)
{
    if (header.dim[0] != 4) {
        throw ShapeError(path.string() + ": expected a 4-D image, dim[0] = " + std::to_string(header.dim[0]));
    }
    if (mask.grid() != header.spatial_dims()) {
        throw ShapeError(path.string() + ": mask grid does not match image dimensions");
    }
    const auto voxels = mask.labeled_voxels();
    if (voxels.empty()) {
        throw ShapeError("mask has no labeled voxels; nothing to extract");
    }
    const double header_tr = header.tr_seconds_from_header();
    if (header_tr > 0.0 && std::abs(header_tr - tr_seconds) > 1e-3 * tr_seconds) {
        std::cerr << "warning: " << path.string() << ": header TR " << header_tr << " s differs from manifest TR "
                  << tr_seconds << " s; using manifest value\n";
    }
    const auto data = read_nifti_data(path, header);
    const std::size_t nv = header.voxels_per_volume();
    const int nt = header.dim[4];
    Eigen::MatrixXd values(static_cast<Eigen::Index>(voxels.size()), nt);
    std::vector<std::string> ids;
    ids.reserve(voxels.size());
    for (std::size_t r = 0; r < voxels.size(); ++r) {
        for (int t = 0; t < nt; ++t) {
            values(static_cast<Eigen::Index>(r), t) = data[static_cast<std::size_t>(t) * nv + voxels[r]];
        }
        ids.push_back("v" + std::to_string(voxels[r]));
    }
    return TimeSeriesMatrix(std::move(values), std::move(ids), tr_seconds);
}

void write_nifti(const std::filesystem::path& path, std::span<const int> dims, std::span<const double> data,
                 const NiftiWriteOptions& options)
{
    if (dims.empty() || dims.size() > 7) throw ArgumentError("NIfTI images have 1 to 7 dimensions");
    std::size_t total = 1;
    for (int d : dims) {
        if (d < 1 || d > std::numeric_limits<std::int16_t>::max()) throw ArgumentError("bad NIfTI dimension");
        total *= static_cast<std::size_t>(d);
    }
    if (total != data.size()) throw ShapeError("data size does not match dimensions");

    const auto order = options.byte_order;
    const auto bpv = static_cast<std::size_t>(bytes_per_voxel(options.datatype));
    constexpr std::size_t offset = 352;
    std::string buf(offset + total * bpv, '\0');
    auto* p = reinterpret_cast<std::byte*>(buf.data());
    store<std::int32_t>(p, 348, order);
    store<std::int16_t>(p + off_dim, static_cast<std::int16_t>(dims.size()), order);
    for (std::size_t i = 0; i < 7; ++i) {
        const std::int16_t d = i < dims.size() ? static_cast<std::int16_t>(dims[i]) : 1;
        store<std::int16_t>(p + off_dim + 2 * (i + 1), d, order);
    }
    store<std::int16_t>(p + off_datatype, static_cast<std::int16_t>(options.datatype), order);
    store<std::int16_t>(p + off_bitpix, static_cast<std::int16_t>(8 * bpv), order);
    store<float>(p + off_pixdim, 1.0f, order);
    for (std::size_t i = 1; i < 4; ++i) store<float>(p + off_pixdim + 4 * i, 1.0f, order);
    store<float>(p + off_pixdim + 16, options.tr_seconds, order);
    store<float>(p + off_vox_offset, static_cast<float>(offset), order);
    store<float>(p + off_scl_slope, options.scl_slope, order);
    store<float>(p + off_scl_inter, options.scl_inter, order);
    p[off_xyzt_units] = static_cast<std::byte>(2 | 8);  // mm, seconds
    std::memcpy(p + off_magic, "n+1\0", 4);
    for (std::size_t i = 0; i < total; ++i) {
        encode_voxel(p + offset + i * bpv, data[i], options.datatype, order);
    }
    write_file_atomic(path, buf);
}

TimeSeriesMatrix read_csv_timeseries(const std::filesystem::path& path, double tr_seconds)
{
    const auto lines = read_lines(path);
    std::size_t first = 0;
    if (!lines.empty()) {
        double dummy;
        if (!parse_double(split_commas(lines[0]).front(), dummy)) first = 1;
    }
    if (lines.size() <= first) throw FormatError(path.string() + ": no data rows");

    const std::size_t n_rows = lines.size() - first;
    std::size_t n_cols = 0;
    std::vector<double> flat;
    for (std::size_t r = 0; r < n_rows; ++r) {
        const auto cells = split_commas(lines[first + r]);
        if (r == 0) {
            n_cols = cells.size();
            flat.reserve(n_rows * n_cols);
        } else if (cells.size() != n_cols) {
            throw FormatError(path.string() + ": ragged row " + std::to_string(r + 1) + " has " +
                              std::to_string(cells.size()) + " cells, expected " + std::to_string(n_cols));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v;
            if (!parse_double(cells[c], v) || !std::isfinite(v)) {
                throw ValueError(path.string() + ": invalid value '" + std::string(cells[c]) + "' at row " +
                                 std::to_string(r + 1) + ", column " + std::to_string(c + 1));
            }
            flat.push_back(v);
        }
    }
    Eigen::MatrixXd values(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
    for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t c = 0; c < n_cols; ++c) {
            values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = flat[r * n_cols + c];
        }
    }
    return TimeSeriesMatrix(std::move(values), tr_seconds);
}

std::string format_csv_timeseries(const TimeSeriesMatrix& ts)
{
    std::ostringstream out;
    out.precision(17);
    const auto& v = ts.values();
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        for (Eigen::Index c = 0; c < v.cols(); ++c) {
            if (c) out << ',';
            out << v(r, c);
        }
        out << '\n';
    }
    return out.str();
}

Parcellation read_label_map(const std::filesystem::path& path)
{
    if (is_nifti_path(path)) {
        const auto h = read_nifti_header(path);
        if (h.dim[0] > 4 || (h.dim[0] == 4 && h.dim[4] != 1)) {
            throw FormatError(path.string() + ": label map must be a 3-D volume");
        }
        const auto data = read_nifti_data(path, h);
        std::vector<std::int32_t> labels(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data[i] != std::floor(data[i])) {
                throw FormatError(path.string() + ": non-integer label at voxel " + std::to_string(i));
            }
            if (data[i] < 0) throw FormatError(path.string() + ": negative label at voxel " + std::to_string(i));
            labels[i] = static_cast<std::int32_t>(data[i]);
        }
        std::array<int, 3> grid{1, 1, 1};
        for (int d = 1; d <= std::min<int>(h.dim[0], 3); ++d) grid[static_cast<std::size_t>(d - 1)] = h.dim[static_cast<std::size_t>(d)];
        return densify(grid, std::move(labels), ParcellationScheme::external);
    }

    const auto lines = read_lines(path);
    if (lines.empty()) throw FormatError(path.string() + ": empty label map");
    std::vector<std::pair<long long, long long>> entries;
    long long max_index = -1;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split_commas(lines[r]);
        long long idx = 0, label = 0;
        if (cells.size() != 2 ||
            std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), idx).ec != std::errc() ||
            std::from_chars(cells[1].data(), cells[1].data() + cells[1].size(), label).ec != std::errc()) {
            throw FormatError(path.string() + ": line " + std::to_string(r + 1) + " is not 'voxel_index,label'");
        }
        if (idx < 0) throw FormatError(path.string() + ": negative voxel index on line " + std::to_string(r + 1));
        if (label < 0) throw FormatError(path.string() + ": negative label on line " + std::to_string(r + 1));
        entries.emplace_back(idx, label);
        max_index = std::max(max_index, idx);
    }
    if (entries.empty()) throw FormatError(path.string() + ": label map has no entries");
    std::vector<std::int32_t> labels(static_cast<std::size_t>(max_index + 1), 0);
    std::vector<char> seen(labels.size(), 0);
    for (auto [idx, label] : entries) {
        if (seen[static_cast<std::size_t>(idx)]) throw FormatError(path.string() + ": voxel " + std::to_string(idx) + " listed twice");
        seen[static_cast<std::size_t>(idx)] = 1;
        labels[static_cast<std::size_t>(idx)] = static_cast<std::int32_t>(label);
    }
    const std::array<int, 3> grid{static_cast<int>(labels.size()), 1, 1};
    return densify(grid, std::move(labels), ParcellationScheme::external);
}

namespace {

struct Candidate {
    double dist2;
    std::size_t voxel;
    int seed;
    auto operator<=>(const Candidate&) const = default;
};

using Center = std::array<double, 3>;

double dist2(const VoxelCoord& a, const Center& b)
{
    double s = 0;
    for (std::size_t d = 0; d < 3; ++d) {
        const double diff = a[d] - b[d];
        s += diff * diff;
    }
    return s;
}

Center as_center(const VoxelCoord& p)
{
    return {static_cast<double>(p[0]), static_cast<double>(p[1]), static_cast<double>(p[2])};
}

// Capacity-limited nearest-center assignment: each cell holds floor(n/C), and
// n mod C cells may take one more. Candidates are processed globally by distance.
std::vector<std::int32_t> balanced_assign(std::span<const VoxelCoord> pts, const std::vector<Center>& centers)
{
    const std::size_t n = pts.size();
    const std::size_t C = centers.size();
    const std::size_t base_cap = n / C;
    std::size_t bonus_left = n % C;
    std::vector<std::size_t> size(C, 0);
    std::vector<std::int32_t> cell(n, 0);
    auto try_assign = [&](std::size_t v, int s) {
        auto& sz = size[static_cast<std::size_t>(s)];
        if (sz < base_cap) {
            ++sz;
        } else if (sz == base_cap && bonus_left > 0) {
            ++sz;
            --bonus_left;
        } else {
            return false;
        }
        cell[v] = s + 1;
        return true;
    };

    const std::size_t k = std::min<std::size_t>(C, 8);
    std::vector<Candidate> cand;
    cand.reserve(n * k);
    std::vector<Candidate> local(C);
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t s = 0; s < C; ++s) local[s] = {dist2(pts[v], centers[s]), v, static_cast<int>(s)};
        std::partial_sort(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(k), local.end());
        cand.insert(cand.end(), local.begin(), local.begin() + static_cast<std::ptrdiff_t>(k));
    }
    std::sort(cand.begin(), cand.end());
    for (const auto& c : cand) {
        if (cell[c.voxel] == 0) try_assign(c.voxel, c.seed);
    }
    // Leftovers whose K nearest centers filled up: nearest center with room.
    for (std::size_t v = 0; v < n; ++v) {
        if (cell[v] != 0) continue;
        for (std::size_t s = 0; s < C; ++s) local[s] = {dist2(pts[v], centers[s]), v, static_cast<int>(s)};
        std::sort(local.begin(), local.end());
        for (const auto& c : local) {
            if (try_assign(v, c.seed)) break;
        }
    }
    return cell;
}

constexpr int refinement_passes = 10;

// Points must be sorted by linear index; returns a cell id (1..C) per point.
std::vector<std::int32_t> partition_points(std::span<const VoxelCoord> pts, int n_cells)
{
    const std::size_t n = pts.size();
    if (n_cells < 1) throw ArgumentError("number of cells must be >= 1");
    if (static_cast<std::size_t>(n_cells) > n) {
        throw ArgumentError("cannot split " + std::to_string(n) + " voxels into " + std::to_string(n_cells) + " cells");
    }
    const auto C = static_cast<std::size_t>(n_cells);

    // Farthest-point seeding from the lowest-index voxel.
    std::vector<Center> centers{as_center(pts[0])};
    std::vector<double> nearest(n, std::numeric_limits<double>::max());
    while (centers.size() < C) {
        std::size_t best = 0;
        double best_d = -1;
        for (std::size_t v = 0; v < n; ++v) {
            nearest[v] = std::min(nearest[v], dist2(pts[v], centers.back()));
            if (nearest[v] > best_d) {
                best_d = nearest[v];
                best = v;
            }
        }
        centers.push_back(as_center(pts[best]));
    }

    auto cell = balanced_assign(pts, centers);
    // Move centers to cell centroids and reassign until stable.
    for (int pass = 0; pass < refinement_passes; ++pass) {
        std::vector<Center> sum(C, Center{0, 0, 0});
        std::vector<double> count(C, 0);
        for (std::size_t v = 0; v < n; ++v) {
            const auto c = static_cast<std::size_t>(cell[v] - 1);
            for (std::size_t d = 0; d < 3; ++d) sum[c][d] += pts[v][d];
            count[c] += 1;
        }
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t d = 0; d < 3; ++d) centers[c][d] = sum[c][d] / count[c];
        auto next = balanced_assign(pts, centers);
        if (next == cell) break;
        cell = std::move(next);
    }
    return cell;
}

}  // namespace

Parcellation uniform_partition(std::span<const VoxelCoord> voxels, int n_cells)
{
    if (voxels.empty()) throw ArgumentError("no voxels to partition");
    std::array<int, 3> grid{1, 1, 1};
    for (const auto& p : voxels) {
        for (std::size_t d = 0; d < 3; ++d) {
            if (p[d] < 0) throw ArgumentError("voxel coordinates must be nonnegative");
            grid[d] = std::max(grid[d], p[d] + 1);
        }
    }
    auto linear = [&](const VoxelCoord& p) {
        return static_cast<std::size_t>(p[0]) +
               static_cast<std::size_t>(grid[0]) * (static_cast<std::size_t>(p[1]) + static_cast<std::size_t>(grid[1]) * static_cast<std::size_t>(p[2]));
    };
    std::vector<std::pair<std::size_t, VoxelCoord>> sorted;
    sorted.reserve(voxels.size());
    for (const auto& p : voxels) sorted.emplace_back(linear(p), p);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i].first == sorted[i - 1].first) throw ArgumentError("duplicate voxel coordinate");
    }
    std::vector<VoxelCoord> pts;
    pts.reserve(sorted.size());
    for (const auto& [idx, p] : sorted) pts.push_back(p);
    const auto cells = partition_points(pts, n_cells);

    std::vector<std::int32_t> labels(static_cast<std::size_t>(grid[0]) * grid[1] * grid[2], 0);
    for (std::size_t i = 0; i < sorted.size(); ++i) labels[sorted[i].first] = cells[i];
    return Parcellation(grid, std::move(labels), ParcellationScheme::uniform);
}

Parcellation uniform_partition(const Parcellation& mask, int n_cells)
{
    const auto& g = mask.grid();
    const auto voxels = mask.labeled_voxels();
    if (voxels.empty()) throw ArgumentError("mask has no labeled voxels");
    std::vector<VoxelCoord> pts;
    pts.reserve(voxels.size());
    for (auto v : voxels) {
        const int x = static_cast<int>(v % static_cast<std::size_t>(g[0]));
        const int y = static_cast<int>((v / static_cast<std::size_t>(g[0])) % static_cast<std::size_t>(g[1]));
        const int z = static_cast<int>(v / (static_cast<std::size_t>(g[0]) * static_cast<std::size_t>(g[1])));
        pts.push_back({x, y, z});
    }
    const auto cells = partition_points(pts, n_cells);
    std::vector<std::int32_t> labels(mask.voxel_count(), 0);
    for (std::size_t i = 0; i < voxels.size(); ++i) labels[voxels[i]] = cells[i];
    return Parcellation(g, std::move(labels), ParcellationScheme::uniform);
}

}  // namespace fcid
