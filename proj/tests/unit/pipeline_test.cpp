#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "fcid/errors.hpp"
#include "fcid/graphs.hpp"
#include "fcid/ingest.hpp"
#include "fcid/io_util.hpp"
#include "fcid/pipeline.hpp"
#include "fcid/synth.hpp"
#include "oracles.hpp"

using namespace fcid;

namespace {

// Writes a labeled CSV cohort and returns the manifest path.
std::filesystem::path write_csv_cohort(const oracle::TempDir& dir, int subjects = 3, int rois = 6, int timepoints = 60)
{
    CohortSpec spec;
    spec.n_subjects = subjects;
    spec.n_rois = rois;
    spec.n_timepoints = timepoints;
    auto c = generate_cohort(spec);
    for (std::size_t k = 0; k < c.scans.size(); ++k) {
        write_file_atomic(dir.path() / c.scans[k].path, format_csv_timeseries(c.series[k]));
        c.scans[k].path = dir.path() / c.scans[k].path;
    }
    const auto manifest = dir / "cohort.json";
    write_file_atomic(manifest, manifest_to_json(c.scans, dir.path()).dump(2));
    return manifest;
}

}  // namespace

TEST(LoadDataset, CsvManifest)
{
    oracle::TempDir dir;
    const auto ds = load_dataset(write_csv_cohort(dir), PipelineConfig{}, 2);
    EXPECT_EQ(ds.name, "cohort");
    ASSERT_EQ(ds.size(), 6u);
    EXPECT_TRUE(ds.labeled());
    EXPECT_EQ(ds.scans[0].n_timepoints, 60);
    EXPECT_DOUBLE_EQ(ds.shortest_duration_seconds(), 120.0);
    EXPECT_EQ(ds.subjects(), (std::vector<std::string>{"sub-01", "sub-02", "sub-03"}));
    const auto sub = ds.subset_subjects({"sub-03", "sub-01"});
    ASSERT_EQ(sub.size(), 4u);
    EXPECT_EQ(sub.scans[0].scan_id, "sub-01_ses-1");
    EXPECT_EQ(sub.scans[3].scan_id, "sub-03_ses-2");
}

TEST(LoadDataset, MissingFileIsManifestError)
{
    oracle::TempDir dir;
    const auto manifest = write_csv_cohort(dir);
    std::filesystem::remove(dir / "series/sub-02_ses-1.csv");
    try {
        load_dataset(manifest, PipelineConfig{});
        FAIL() << "expected ManifestError";
    } catch (const ManifestError& e) {
        EXPECT_NE(std::string(e.what()).find("sub-02_ses-1"), std::string::npos) << e.what();
    }
}

TEST(LoadDataset, BadCsvNamesScan)
{
    oracle::TempDir dir;
    const auto manifest = write_csv_cohort(dir);
    std::ofstream(dir / "series/sub-01_ses-2.csv") << "1,2\n3\n";
    try {
        load_dataset(manifest, PipelineConfig{});
        FAIL() << "expected ManifestError";
    } catch (const ManifestError& e) {
        EXPECT_NE(std::string(e.what()).find("sub-01_ses-2"), std::string::npos) << e.what();
    }
}

TEST(BuildParcellation, IdentityAndUniformStrip)
{
    oracle::TempDir dir;
    const auto ds = load_dataset(write_csv_cohort(dir, 2, 10), PipelineConfig{});
    EXPECT_EQ(build_parcellation(ds, PipelineConfig{}).n_cells(), 10);
    PipelineConfig uniform;
    uniform.parcellation_source = "uniform";
    uniform.n_rois_target = 3;
    const auto p = build_parcellation(ds, uniform);
    EXPECT_EQ(p.n_cells(), 3);
    EXPECT_EQ(p.labeled_voxel_count(), 10u);
}

TEST(BuildParcellation, CsvLabelMapMustCoverRows)
{
    oracle::TempDir dir;
    const auto ds = load_dataset(write_csv_cohort(dir, 2, 6), PipelineConfig{});
    std::ofstream(dir / "labels.csv") << "voxel_index,label\n0,1\n1,1\n2,2\n3,2\n4,3\n5,3\n";
    PipelineConfig cfg;
    cfg.parcellation_source = (dir / "labels.csv").string();
    EXPECT_EQ(build_parcellation(ds, cfg).n_cells(), 3);
    std::ofstream(dir / "short.csv") << "voxel_index,label\n0,1\n1,2\n";
    cfg.parcellation_source = (dir / "short.csv").string();
    EXPECT_THROW(build_parcellation(ds, cfg), ShapeError);
}

TEST(NiftiPipeline, LabelMapMeanMatchesOracle)
{
    oracle::TempDir dir;
    const std::array<int, 3> grid{4, 3, 2};
    const int n_vox = 24, t = 40;
    // labels: background on x == 0, otherwise cell by z*2 + (y>0) + 1 -> 4 cells
    std::vector<double> labels(n_vox);
    for (int z = 0; z < 2; ++z)
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 4; ++x) labels[static_cast<std::size_t>(x + 4 * (y + 3 * z))] = x == 0 ? 0 : z * 2 + (y > 0) + 1;
    const std::vector<int> dims3{4, 3, 2};
    write_nifti(dir / "labels.nii", dims3, labels, {NiftiDatatype::int16});

    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    nlohmann::json manifest = nlohmann::json::array();
    std::vector<std::vector<double>> volumes;
    for (int s = 0; s < 4; ++s) {
        std::vector<double> data(static_cast<std::size_t>(n_vox * t));
        for (auto& v : data) v = z(rng);
        const std::vector<int> dims4{4, 3, 2, t};
        NiftiWriteOptions opt;
        opt.tr_seconds = 2.0f;
        opt.byte_order = s % 2 ? ByteOrder::swapped : ByteOrder::native;
        const std::string name = "scan" + std::to_string(s) + ".nii";
        write_nifti(dir / name, dims4, data, opt);
        volumes.push_back(data);
        manifest.push_back({{"scan_id", "scan" + std::to_string(s)}, {"subject_id", "s" + std::to_string(s / 2)},
                            {"session", s % 2 + 1}, {"tr_seconds", 2.0}, {"path", name}, {"format", "nifti1"}});
    }
    write_file_atomic(dir / "m.json", manifest.dump());

    PipelineConfig cfg;
    cfg.parcellation_source = (dir / "labels.nii").string();
    const auto ds = load_dataset(dir / "m.json", cfg);
    ASSERT_EQ(ds.series[0].rows(), 18);
    const auto parc = build_parcellation(ds, cfg);
    EXPECT_EQ(parc.n_cells(), 4);
    const auto graphs = infer_connectomes(ds, parc, cfg);

    for (int s = 0; s < 4; ++s) {
        oracle::Matrix rows;
        std::vector<int> cells;
        for (int v = 0; v < n_vox; ++v) {
            if (labels[static_cast<std::size_t>(v)] == 0) continue;
            std::vector<double> row(static_cast<std::size_t>(t));
            for (int k = 0; k < t; ++k) row[static_cast<std::size_t>(k)] = static_cast<float>(volumes[static_cast<std::size_t>(s)][static_cast<std::size_t>(k * n_vox + v)]);
            rows.push_back(row);
            cells.push_back(static_cast<int>(labels[static_cast<std::size_t>(v)]));
        }
        const auto ref = oracle::pearson_matrix(oracle::cell_means(rows, cells, 4));
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                EXPECT_NEAR(graphs[static_cast<std::size_t>(s)].weights()(i, j), ref[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], 1e-10);
    }

    PipelineConfig uniform;
    uniform.parcellation_source = "uniform";
    uniform.n_rois_target = 5;
    uniform.mask_path = dir / "labels.nii";
    const auto uds = load_dataset(dir / "m.json", uniform);
    const auto up = build_parcellation(uds, uniform);
    EXPECT_EQ(up.n_cells(), 5);
    EXPECT_EQ(up.labeled_voxels(), parc.labeled_voxels());
    EXPECT_EQ(infer_connectomes(uds, up, uniform).front().n_rois(), 5);
}

TEST(InferConnectome, WindowAndThresholdApplied)
{
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    Eigen::MatrixXd m(5, 100);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
    const TimeSeriesMatrix ts(m, 2.0);
    PipelineConfig cfg;
    cfg.window_seconds = 60;
    const auto g = infer_connectome(ts, Parcellation::identity(5), cfg);
    EXPECT_EQ(g.weights(), pearson_adjacency(TimeSeriesMatrix(m.leftCols(30), 2.0)).weights());
    cfg.threshold_percentile = 50;
    const auto t = infer_connectome(ts, Parcellation::identity(5), cfg);
    ASSERT_TRUE(t.thresholded());
    int kept = 0;
    for (int i = 0; i < 5; ++i)
        for (int j = i + 1; j < 5; ++j) kept += t.weights()(i, j) != 0.0;
    EXPECT_EQ(kept, 5);
    cfg.threshold_percentile.reset();
    cfg.extraction = Extraction::eigenvariate;
    EXPECT_EQ(infer_connectome(ts, Parcellation::identity(5), cfg).n_rois(), 5);
}

TEST(InferConnectomes, ErrorsNameScan)
{
    Eigen::MatrixXd good = Eigen::MatrixXd::Random(3, 10);
    Eigen::MatrixXd bad = good;
    bad.row(1).setConstant(2.0);
    std::vector<ScanRecord> scans(2);
    scans[0].scan_id = "ok";
    scans[1].scan_id = "flat";
    for (auto& s : scans) s.tr_seconds = 1.0;
    const auto ds = make_dataset(scans, {TimeSeriesMatrix(good, 1.0), TimeSeriesMatrix(bad, 1.0)});
    try {
        infer_connectomes(ds, Parcellation::identity(3), PipelineConfig{});
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("scan flat"), std::string::npos) << e.what();
    }
}

TEST(Analyze, JobsDoNotChangeResults)
{
    CohortSpec spec;
    spec.n_subjects = 8;
    spec.n_rois = 10;
    spec.n_timepoints = 80;
    spec.session_noise = 0.3;
    const auto c = generate_cohort(spec);
    const auto ds = make_dataset(c.scans, c.series);
    const auto a = analyze(ds, Parcellation::identity(10), PipelineConfig{}, 1);
    const auto b = analyze(ds, Parcellation::identity(10), PipelineConfig{}, 3);
    EXPECT_EQ(a.distances.values, b.distances.values);
    EXPECT_EQ(a.ranks.to_matrix(), b.ranks.to_matrix());
}
