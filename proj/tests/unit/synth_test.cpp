#include <random>

#include <gtest/gtest.h>

#include "fcid/errors.hpp"
#include "fcid/graphs.hpp"
#include "fcid/pipeline.hpp"
#include "fcid/reliability.hpp"
#include "fcid/stats.hpp"
#include "fcid/synth.hpp"

using namespace fcid;

namespace {

void expect_correlation_matrix(const Eigen::MatrixXd& m)
{
    ASSERT_EQ(m.rows(), m.cols());
    EXPECT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    for (Eigen::Index i = 0; i < m.rows(); ++i) EXPECT_NEAR(m(i, i), 1.0, 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
}

CohortSpec small_spec(std::uint64_t seed)
{
    CohortSpec s;
    s.n_subjects = 6;
    s.n_rois = 12;
    s.n_timepoints = 120;
    s.seed = seed;
    return s;
}

ReliabilityResult reliability_of(const Cohort& c, int B, std::uint64_t seed)
{
    const auto ds = make_dataset(c.scans, c.series);
    const auto a = analyze(ds, Parcellation::identity(static_cast<int>(c.series[0].rows())), PipelineConfig{});
    return permutation_null(a.ranks, c.truth, B, seed);
}

}  // namespace

TEST(CohortSpec, Validation)
{
    CohortSpec s;
    EXPECT_NO_THROW(s.validate());
    s.n_timepoints = s.n_rois + 1;
    EXPECT_THROW(s.validate(), ArgumentError);
    s = {};
    s.n_rois = 1;
    EXPECT_THROW(s.validate(), ArgumentError);
    s = {};
    s.session_noise = -0.1;
    EXPECT_THROW(s.validate(), ArgumentError);
    s = {};
    s.n_sessions = 3;
    EXPECT_THROW(s.validate(), ArgumentError);
}

TEST(NearestCorrelation, RepairsIndefiniteMatrix)
{
    Eigen::MatrixXd a(3, 3);
    a << 1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1;
    const auto m = nearest_correlation(a);
    expect_correlation_matrix(m);
    EXPECT_LT((m - a).norm(), (Eigen::MatrixXd::Identity(3, 3) - a).norm());
}

TEST(NearestCorrelation, ValidInputNearlyUnchanged)
{
    Eigen::MatrixXd a(3, 3);
    a << 1, 0.3, 0.2, 0.3, 1, -0.1, 0.2, -0.1, 1;
    EXPECT_LT((nearest_correlation(a) - a).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(LatentConnectomes, ZeroSignalSharesOneMatrix)
{
    auto spec = small_spec(1);
    spec.subject_signal = 0;
    const auto latents = generate_latent_connectomes(spec);
    ASSERT_EQ(latents.size(), 6u);
    for (const auto& m : latents) EXPECT_EQ(m, latents[0]);
}

TEST(LatentConnectomes, AlwaysValidCorrelation)
{
    for (double signal : {0.0, 0.5, 1.0, 3.0, 10.0}) {
        auto spec = small_spec(2);
        spec.subject_signal = signal;
        for (const auto& m : generate_latent_connectomes(spec)) expect_correlation_matrix(m);
    }
}

TEST(LatentConnectomes, SeedDeterminism)
{
    const auto a = generate_latent_connectomes(small_spec(3));
    const auto b = generate_latent_connectomes(small_spec(3));
    const auto c = generate_latent_connectomes(small_spec(4));
    EXPECT_EQ(a[0], b[0]);
    EXPECT_NE(a[0], c[0]);
    EXPECT_NE(a[0], a[1]);
}

TEST(SessionSeries, ConvergesToLatentWithoutNoise)
{
    auto spec = small_spec(5);
    spec.n_rois = 8;
    spec.n_timepoints = 10000;
    spec.session_noise = 0;
    const auto latent = generate_latent_connectomes(spec)[0];
    Rng rng(17);
    const auto ts = sample_session_timeseries(latent, spec, rng);
    ASSERT_EQ(ts.rows(), 8);
    ASSERT_EQ(ts.cols(), 10000);
    Eigen::MatrixXd target = latent;
    target.diagonal().setZero();
    EXPECT_LT((pearson_adjacency(ts).weights() - target).cwiseAbs().maxCoeff(), 0.05);
}

TEST(SessionSeries, IdentityLatentUncorrelated)
{
    auto spec = small_spec(6);
    spec.n_rois = 10;
    spec.n_timepoints = 2000;
    spec.session_noise = 0;
    Rng rng(18);
    const auto w = pearson_adjacency(sample_session_timeseries(Eigen::MatrixXd::Identity(10, 10), spec, rng)).weights();
    const double mean = w.sum() / 90.0;
    EXPECT_LT(std::abs(mean), 0.01);
    EXPECT_LT(w.cwiseAbs().maxCoeff(), 0.1);
}

TEST(SessionSeries, FixedRngStateReproduces)
{
    const auto spec = small_spec(7);
    const auto latent = generate_latent_connectomes(spec)[0];
    Rng a(5), b(5);
    EXPECT_EQ(sample_session_timeseries(latent, spec, a).values(), sample_session_timeseries(latent, spec, b).values());
}

TEST(SessionSeries, PerturbationIsValidAndScaled)
{
    auto spec = small_spec(8);
    const auto latent = generate_latent_connectomes(spec)[0];
    Rng rng(3);
    spec.session_noise = 0;
    EXPECT_EQ(perturb_session(latent, spec, rng), latent);
    spec.session_noise = 0.3;
    const auto p = perturb_session(latent, spec, rng);
    expect_correlation_matrix(p);
    EXPECT_GT((p - latent).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Cohort, CountsAndRecords)
{
    CohortSpec spec;
    spec.n_subjects = 20;
    spec.n_rois = 8;
    spec.n_timepoints = 40;
    const auto c = generate_cohort(spec);
    ASSERT_EQ(c.scans.size(), 40u);
    ASSERT_EQ(c.series.size(), 40u);
    EXPECT_EQ(c.truth.pairs().size(), 20u);
    EXPECT_EQ(c.scans[0].scan_id, "sub-01_ses-1");
    EXPECT_EQ(c.scans[1].scan_id, "sub-01_ses-2");
    EXPECT_EQ(c.scans[39].subject_id, "sub-20");
    EXPECT_EQ(c.truth, true_pairing(c.scans));
    EXPECT_TRUE(validate_dataset(c.scans, false).empty());
    for (const auto& ts : c.series) {
        EXPECT_EQ(ts.rows(), 8);
        EXPECT_EQ(ts.cols(), 40);
        EXPECT_EQ(ts.tr_seconds(), 2.0);
    }
}

TEST(Cohort, NoConstantRows)
{
    auto spec = small_spec(9);
    spec.session_noise = 0.2;
    for (const auto& ts : generate_cohort(spec).series) {
        for (Eigen::Index i = 0; i < ts.rows(); ++i) {
            const auto row = ts.values().row(i);
            EXPECT_GT(row.maxCoeff() - row.minCoeff(), 0.0);
        }
        EXPECT_NO_THROW(pearson_adjacency(ts));
    }
}

TEST(Cohort, StrongSignalIsPerfect)
{
    CohortSpec spec;
    spec.n_subjects = 20;
    spec.n_rois = 32;
    spec.n_timepoints = 200;
    spec.subject_signal = 2.0;
    spec.session_noise = 0.05;
    const auto res = reliability_of(generate_cohort(spec), 200, 1);
    EXPECT_EQ(res.rank_sum, 40);
}

TEST(Cohort, NoSignalNullCalibrated)
{
    int above = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        CohortSpec spec;
        spec.n_subjects = 10;
        spec.n_rois = 10;
        spec.n_timepoints = 60;
        spec.subject_signal = 0;
        spec.session_noise = 0.3;
        spec.seed = seed;
        above += *reliability_of(generate_cohort(spec), 200, seed).p_value > 0.05;
    }
    EXPECT_GE(above, 45);
}

TEST(Cohort, SeparabilityMonotone)
{
    const std::vector<double> signals{0.15, 0.3, 0.6};
    const std::vector<double> noises{0.1, 0.3, 0.6};
    std::vector<std::vector<double>> mean(3, std::vector<double>(3, 0.0));
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t z = 0; z < 3; ++z)
            for (std::uint64_t seed = 1; seed <= 4; ++seed) {
                CohortSpec spec;
                spec.n_subjects = 10;
                spec.n_rois = 12;
                spec.n_timepoints = 100;
                spec.subject_signal = signals[s];
                spec.session_noise = noises[z];
                spec.seed = seed;
                const auto c = generate_cohort(spec);
                const auto a = analyze(make_dataset(c.scans, c.series), Parcellation::identity(12), PipelineConfig{});
                mean[s][z] += static_cast<double>(rank_sum(a.ranks, c.truth).rank_sum) / 4.0;
            }
    for (std::size_t z = 0; z < 3; ++z) {
        const std::vector<double> col{mean[0][z], mean[1][z], mean[2][z]};
        EXPECT_LT(spearman(signals, col), 0.0) << "noise " << noises[z];
    }
    for (std::size_t s = 0; s < 3; ++s) EXPECT_GT(spearman(noises, mean[s]), 0.0) << "signal " << signals[s];
}

TEST(Cohort, InformativeEdgeOnlyDiffers)
{
    auto spec = small_spec(10);
    spec.informative_edge = std::pair{2, 5};
    const auto latents = generate_latent_connectomes(spec);
    for (std::size_t s = 1; s < latents.size(); ++s) {
        Eigen::MatrixXd d = (latents[s] - latents[0]).cwiseAbs();
        EXPECT_GT(d(2, 5), 1e-3);
        d(2, 5) = d(5, 2) = 0;
        EXPECT_LT(d.maxCoeff(), 1e-6);
    }
}
