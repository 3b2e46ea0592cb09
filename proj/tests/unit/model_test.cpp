#include <algorithm>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "fcid/errors.hpp"
#include "fcid/model.hpp"
#include "oracles.hpp"

using namespace fcid;

namespace {

ScanRecord scan(std::string id, std::string subject, int session, double tr = 2.0)
{
    ScanRecord s;
    s.scan_id = std::move(id);
    s.subject_id = std::move(subject);
    s.session_index = session;
    s.tr_seconds = tr;
    s.path = "unused.csv";
    return s;
}

std::vector<ScanRecord> cohort(int subjects)
{
    std::vector<ScanRecord> out;
    for (int s = 1; s <= subjects; ++s)
        for (int t = 1; t <= 2; ++t) out.push_back(scan("s" + std::to_string(s) + "_" + std::to_string(t), "s" + std::to_string(s), t));
    return out;
}

}  // namespace

TEST(ValidateDataset, CleanCohortHasNoViolations)
{
    EXPECT_TRUE(validate_dataset(cohort(20), false).empty());
}

TEST(ValidateDataset, DuplicateSubjectSession)
{
    std::vector<ScanRecord> scans{scan("a", "subj01", 1), scan("b", "subj01", 1)};
    const auto v = validate_dataset(scans, false);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, Violation::Kind::duplicate_session);
}

TEST(ValidateDataset, ZeroTr)
{
    auto scans = cohort(2);
    scans[1].tr_seconds = 0;
    const auto v = validate_dataset(scans, false);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, Violation::Kind::nonpositive_tr);
    EXPECT_EQ(v[0].scan_id, scans[1].scan_id);
}

TEST(ValidateDataset, MissingFileReported)
{
    auto scans = cohort(1);
    scans[0].path = "/nonexistent/fcid/file.csv";
    const auto v = validate_dataset(scans, true);
    ASSERT_FALSE(v.empty());
    EXPECT_TRUE(std::any_of(v.begin(), v.end(), [](const Violation& x) { return x.kind == Violation::Kind::missing_file; }));
}

TEST(ValidateDataset, IdempotentAndOrderInsensitive)
{
    auto scans = cohort(5);
    scans[2].tr_seconds = -1;
    scans[7].session_index = 1;
    scans[4].scan_id = scans[3].scan_id;
    const auto first = validate_dataset(scans, false);
    EXPECT_EQ(first, validate_dataset(scans, false));
    std::mt19937 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        auto shuffled = scans;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        EXPECT_EQ(validate_dataset(shuffled, false), first);
    }
}

TEST(TruePairing, SubjectMajorOrder)
{
    std::vector<ScanRecord> scans{scan("a", "s1", 1), scan("b", "s1", 2), scan("c", "s2", 1), scan("d", "s2", 2)};
    EXPECT_EQ(true_pairing(scans).partner(), (std::vector<int>{1, 0, 3, 2}));
}

TEST(TruePairing, SessionMajorOrder)
{
    std::vector<ScanRecord> scans{scan("a", "s1", 1), scan("b", "s2", 1), scan("c", "s1", 2), scan("d", "s2", 2)};
    EXPECT_EQ(true_pairing(scans).partner(), (std::vector<int>{2, 3, 0, 1}));
}

TEST(TruePairing, ThreeSessionsNamesSubject)
{
    std::vector<ScanRecord> scans{scan("a", "s1", 1), scan("b", "s1", 2), scan("c", "s1", 3)};
    try {
        true_pairing(scans);
        FAIL() << "expected StructuralError";
    } catch (const StructuralError& e) {
        EXPECT_NE(std::string(e.what()).find("s1"), std::string::npos);
    }
}

TEST(TruePairing, IsFixedPointFreeInvolution)
{
    std::mt19937 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        auto scans = cohort(1 + trial);
        std::shuffle(scans.begin(), scans.end(), rng);
        const auto p = true_pairing(scans);
        for (std::size_t k = 0; k < p.size(); ++k) {
            EXPECT_NE(p[k], static_cast<int>(k));
            EXPECT_EQ(p[static_cast<std::size_t>(p[k])], static_cast<int>(k));
            EXPECT_EQ(scans[k].subject_id, scans[static_cast<std::size_t>(p[k])].subject_id);
        }
    }
}

TEST(Pairing, RejectsInvalidPartners)
{
    EXPECT_THROW(Pairing({0, 1}), StructuralError);
    EXPECT_THROW(Pairing({1, 2, 0}), StructuralError);
    EXPECT_THROW(Pairing({1, 0, 2}), StructuralError);
    EXPECT_NO_THROW(Pairing({1, 0, 3, 2}));
}

TEST(Pairing, FromPairsAndBack)
{
    const std::vector<std::pair<int, int>> pairs{{3, 0}, {1, 2}};
    const auto p = Pairing::from_pairs(4, pairs);
    EXPECT_EQ(p.partner(), (std::vector<int>{3, 2, 1, 0}));
    EXPECT_EQ(p.pairs(), (std::vector<std::pair<int, int>>{{0, 3}, {1, 2}}));
}

TEST(TimeSeriesMatrix, RejectsNonFiniteAndBadTr)
{
    Eigen::MatrixXd m = Eigen::MatrixXd::Ones(2, 3);
    EXPECT_THROW(TimeSeriesMatrix(m, 0.0), ArgumentError);
    m(1, 2) = std::nan("");
    EXPECT_THROW(TimeSeriesMatrix(m, 1.0), ValueError);
    EXPECT_THROW(TimeSeriesMatrix(Eigen::MatrixXd::Ones(2, 3), {"a"}, 1.0), ShapeError);
}

TEST(Parcellation, PartitionInvariants)
{
    EXPECT_THROW(Parcellation({2, 1, 1}, {1, 3}, ParcellationScheme::external), FormatError);
    EXPECT_THROW(Parcellation({2, 1, 1}, {1, -1}, ParcellationScheme::external), FormatError);
    EXPECT_THROW(Parcellation({3, 1, 1}, {1, 1}, ParcellationScheme::external), ShapeError);
    Parcellation p({4, 1, 1}, {2, 0, 1, 2}, ParcellationScheme::external);
    EXPECT_EQ(p.n_cells(), 2);
    EXPECT_EQ(p.labeled_voxels(), (std::vector<std::size_t>{0, 2, 3}));
    EXPECT_EQ(p.row_cells(), (std::vector<int>{2, 1, 2}));
    EXPECT_EQ(p.cell_sizes(), (std::vector<std::size_t>{1, 2}));
}

TEST(Connectome, Invariants)
{
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 3);
    w(0, 1) = w(1, 0) = 0.5;
    EXPECT_NO_THROW(Connectome{w});
    auto asym = w;
    asym(0, 1) = 0.4;
    EXPECT_THROW(Connectome{asym}, ValueError);
    auto diag = w;
    diag(2, 2) = 1.0;
    EXPECT_THROW(Connectome{diag}, ValueError);
    auto big = w;
    big(0, 2) = big(2, 0) = 1.5;
    EXPECT_THROW(Connectome{big}, ValueError);
}

TEST(PipelineConfig, ValidationAndRoundTrip)
{
    PipelineConfig c;
    EXPECT_NO_THROW(c.validate());
    c.threshold_percentile = 100;
    EXPECT_THROW(c.validate(), ArgumentError);
    c.threshold_percentile = 25;
    c.window_seconds = 120;
    c.extraction = Extraction::eigenvariate;
    c.distance_metric = DistanceMetric::l1;
    EXPECT_THROW(c.validate(100.0), ArgumentError);
    EXPECT_NO_THROW(c.validate(300.0));
    const auto back = PipelineConfig::from_json(c.to_json());
    EXPECT_EQ(back.to_json(), c.to_json());
    EXPECT_EQ(back.hash(), c.hash());
    PipelineConfig other = c;
    other.window_seconds = 60;
    EXPECT_NE(other.hash(), c.hash());
    c.parcellation_source = "uniform";
    c.n_rois_target = 0;
    EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(PipelineConfig, LoadResolvesRelativePaths)
{
    oracle::TempDir dir;
    std::ofstream(dir / "cfg.json") << R"({"parcellation_source": "labels.csv", "extraction": "eig", "threshold_percentile": 25})";
    const auto c = load_config(dir / "cfg.json");
    EXPECT_EQ(c.extraction, Extraction::eigenvariate);
    EXPECT_EQ(std::filesystem::path(c.parcellation_source), dir.path() / "labels.csv");
    ASSERT_TRUE(c.threshold_percentile);
    EXPECT_DOUBLE_EQ(*c.threshold_percentile, 25.0);
    std::ofstream(dir / "bad.json") << R"({"extraction": "median"})";
    EXPECT_THROW(load_config(dir / "bad.json"), ArgumentError);
}

TEST(Manifest, RoundTrip)
{
    oracle::TempDir dir;
    auto scans = cohort(2);
    for (auto& s : scans) s.path = dir.path() / (s.scan_id + ".csv");
    scans[0].format = SourceFormat::nifti1;
    std::ofstream(dir / "manifest.json") << manifest_to_json(scans, dir.path()).dump(2);
    const auto back = load_manifest(dir / "manifest.json");
    ASSERT_EQ(back.size(), scans.size());
    for (std::size_t k = 0; k < scans.size(); ++k) {
        EXPECT_EQ(back[k].scan_id, scans[k].scan_id);
        EXPECT_EQ(back[k].subject_id, scans[k].subject_id);
        EXPECT_EQ(back[k].session_index, scans[k].session_index);
        EXPECT_EQ(back[k].format, scans[k].format);
        EXPECT_EQ(back[k].path, scans[k].path);
    }
    std::ofstream(dir / "broken.json") << R"([{"scan_id": "x"}])";
    EXPECT_THROW(load_manifest(dir / "broken.json"), ManifestError);
}
