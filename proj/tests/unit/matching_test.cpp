#include <random>

#include <gtest/gtest.h>

#include "fcid/errors.hpp"
#include "fcid/matching.hpp"
#include "fcid/synth.hpp"
#include "oracles.hpp"

using namespace fcid;

namespace {

RankMatrix to_rank_matrix(const std::vector<std::vector<int>>& r)
{
    std::vector<int> flat;
    for (const auto& row : r) flat.insert(flat.end(), row.begin(), row.end());
    return RankMatrix(static_cast<int>(r.size()), flat);
}

// Every scan ranks its partner (under `partner`) first.
std::vector<std::vector<int>> separable_ranks(const std::vector<int>& partner, std::mt19937_64& rng)
{
    auto r = oracle::random_ranks(static_cast<int>(partner.size()), rng);
    for (std::size_t k = 0; k < partner.size(); ++k) {
        auto& row = r[k];
        const auto one = static_cast<std::size_t>(std::find(row.begin(), row.end(), 1) - row.begin());
        std::swap(row[one], row[static_cast<std::size_t>(partner[k])]);
    }
    return r;
}

std::vector<int> shuffled_partner(int n, std::mt19937_64& rng)
{
    return random_pairing(n, rng).partner();
}

}  // namespace

TEST(PairingFitness, EqualsRankSum)
{
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto r = to_rank_matrix(oracle::random_ranks(10, rng));
        const auto p = random_pairing(10, rng);
        EXPECT_EQ(pairing_fitness(r, p), rank_sum(r, p).rank_sum);
    }
}

TEST(PairingFitness, TruePairingOnSeparableData)
{
    std::mt19937_64 rng(2);
    const auto partner = shuffled_partner(12, rng);
    EXPECT_EQ(pairing_fitness(to_rank_matrix(separable_ranks(partner, rng)), Pairing(partner)), 12);
}

TEST(PairingFitness, AllTiedRankMatrix)
{
    // All distances equal: rank of j in row k is its position among the other indices.
    const int n = 6;
    std::vector<std::vector<int>> r(n, std::vector<int>(n, 0));
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            if (j != k) r[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = j < k ? j + 1 : j;
    // 0-5, 1-2, 3-4: 5 + 2 + 2 + 4 + 4 + 1
    EXPECT_EQ(pairing_fitness(to_rank_matrix(r), Pairing({5, 2, 1, 4, 3, 0})), 18);
}

TEST(PairingFitness, HandSummedFixture)
{
    const std::vector<std::vector<int>> r{
        {0, 2, 5, 1, 3, 4}, {1, 0, 2, 3, 4, 5}, {5, 4, 0, 3, 2, 1},
        {2, 1, 3, 0, 5, 4}, {4, 5, 1, 2, 0, 3}, {3, 1, 2, 5, 4, 0},
    };
    // 0-2, 1-4, 3-5: 5 + 4 + 5 + 4 + 5 + 5
    EXPECT_EQ(pairing_fitness(to_rank_matrix(r), Pairing({2, 4, 0, 5, 1, 3})), 28);
}

TEST(PairingFitness, InvariantToPairListing)
{
    std::mt19937_64 rng(3);
    const auto r = to_rank_matrix(oracle::random_ranks(8, rng));
    const std::vector<std::pair<int, int>> a{{0, 5}, {1, 2}, {3, 7}, {4, 6}};
    const std::vector<std::pair<int, int>> b{{6, 4}, {7, 3}, {5, 0}, {2, 1}};
    EXPECT_EQ(pairing_fitness(r, Pairing::from_pairs(8, a)), pairing_fitness(r, Pairing::from_pairs(8, b)));
}

TEST(PairingFitness, SizeMismatch)
{
    std::mt19937_64 rng(4);
    EXPECT_THROW(pairing_fitness(to_rank_matrix(oracle::random_ranks(6, rng)), Pairing({1, 0})), StructuralError);
}

TEST(ExactPairing, TwoScans)
{
    const auto m = exact_min_pairing(RankMatrix(2, {0, 1, 1, 0}));
    EXPECT_EQ(m.pairing.partner(), (std::vector<int>{1, 0}));
    EXPECT_EQ(m.fitness, 2);
}

TEST(ExactPairing, FourScansHandEnumerated)
{
    // Costs favour {0-1, 2-3}: 1+1+1+1 = 4; {0-2,1-3}: 2+2+2+2 = 8; {0-3,1-2}: 3+3+3+3 = 12
    const RankMatrix r(4, {0, 1, 2, 3, 1, 0, 3, 2, 2, 3, 0, 1, 3, 2, 1, 0});
    const auto m = exact_min_pairing(r);
    EXPECT_EQ(m.pairing.partner(), (std::vector<int>{1, 0, 3, 2}));
    EXPECT_EQ(m.fitness, 4);
}

TEST(ExactPairing, MatchesExhaustiveEnumeration)
{
    std::mt19937_64 rng(5);
    for (int n = 2; n <= 10; n += 2) {
        for (int trial = 0; trial < 50; ++trial) {
            const auto ranks = oracle::random_ranks(n, rng);
            const auto m = exact_min_pairing(to_rank_matrix(ranks));
            const auto ref = oracle::exhaustive_min_pairing(ranks);
            ASSERT_EQ(m.fitness, ref.fitness) << "n = " << n;
            ASSERT_EQ(m.pairing.partner(), ref.partner) << "n = " << n;
        }
    }
}

TEST(ExactPairing, TiesResolvedLexicographically)
{
    // All-tied symmetric costs: every pairing has the same fitness.
    const int n = 6;
    std::vector<std::vector<int>> r(n, std::vector<int>(n, 0));
    for (int k = 0; k < n; ++k) {
        int next = 1;
        for (int j = 0; j < n; ++j)
            if (j != k) r[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = next++;
    }
    const auto m = exact_min_pairing(to_rank_matrix(r));
    EXPECT_EQ(m.pairing.partner(), oracle::exhaustive_min_pairing(r).partner);
}

TEST(ExactPairing, SizeLimits)
{
    std::mt19937_64 rng(6);
    EXPECT_THROW(exact_min_pairing(to_rank_matrix(oracle::random_ranks(5, rng))), ArgumentError);
    EXPECT_THROW(exact_min_pairing(to_rank_matrix(oracle::random_ranks(28, rng))), SizeError);
}

TEST(ExactPairing, UniqueOptimumOnSeparableData)
{
    std::mt19937_64 rng(7);
    const auto partner = shuffled_partner(10, rng);
    const auto ranks = separable_ranks(partner, rng);
    int at_n = 0;
    oracle::for_each_pairing(10, [&](const std::vector<int>& p) { at_n += oracle::rank_sum(ranks, p) == 10; });
    EXPECT_EQ(at_n, 1);
    EXPECT_EQ(exact_min_pairing(to_rank_matrix(ranks)).pairing.partner(), partner);
}

TEST(GaConfig, Validation)
{
    GaConfig c;
    EXPECT_NO_THROW(c.validate());
    c.elitism_count = 101;
    EXPECT_THROW(c.validate(), ArgumentError);
    c = {};
    c.mutation_rate = 1.5;
    EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(GaSort, SeparableFindsTruth)
{
    std::mt19937_64 rng(8);
    const auto partner = shuffled_partner(30, rng);
    const auto res = ga_sort(to_rank_matrix(separable_ranks(partner, rng)), GaConfig{});
    EXPECT_EQ(res.fitness, 30);
    EXPECT_EQ(res.pairing.partner(), partner);
}

TEST(GaSort, MatchesExactOnSmallInstances)
{
    std::mt19937_64 rng(9);
    int hits = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto r = to_rank_matrix(oracle::random_ranks(12, rng));
        GaConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(trial + 1);
        hits += ga_sort(r, cfg).fitness == exact_min_pairing(r).fitness;
    }
    EXPECT_GE(hits, 95);
}

TEST(GaSort, DeterministicGivenSeed)
{
    std::mt19937_64 rng(10);
    const auto r = to_rank_matrix(oracle::random_ranks(20, rng));
    GaConfig cfg;
    cfg.seed = 77;
    const auto a = ga_sort(r, cfg), b = ga_sort(r, cfg);
    EXPECT_EQ(a.pairing, b.pairing);
    EXPECT_EQ(a.fitness, b.fitness);
    EXPECT_EQ(a.generations_used, b.generations_used);
    EXPECT_EQ(a.best_history, b.best_history);
}

TEST(GaSort, BestFitnessNonincreasing)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        GaConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(trial);
        const auto res = ga_sort(to_rank_matrix(oracle::random_ranks(24, rng)), cfg);
        ASSERT_FALSE(res.best_history.empty());
        for (std::size_t g = 1; g < res.best_history.size(); ++g) EXPECT_LE(res.best_history[g], res.best_history[g - 1]);
        EXPECT_EQ(res.best_history.back(), res.fitness);
        EXPECT_EQ(pairing_fitness(to_rank_matrix(oracle::random_ranks(24, rng)), res.pairing) >= 24, true);
    }
}

TEST(GaSort, StopsOnStall)
{
    std::mt19937_64 rng(12);
    GaConfig cfg;
    cfg.stall_generations = 5;
    const auto res = ga_sort(to_rank_matrix(oracle::random_ranks(8, rng)), cfg);
    EXPECT_LT(res.generations_used, cfg.generations_max);
}

TEST(GaSort, OddOrTinyRejected)
{
    std::mt19937_64 rng(13);
    EXPECT_THROW(ga_sort(to_rank_matrix(oracle::random_ranks(7, rng)), GaConfig{}), ArgumentError);
    EXPECT_THROW(ga_sort(to_rank_matrix(oracle::random_ranks(2, rng)), GaConfig{}), ArgumentError);
}

TEST(MedianMinutes, MidpointAndNever)
{
    EXPECT_EQ(median_minutes({4.0, 5.0, 3.0, 6.0}), 4.5);
    EXPECT_EQ(median_minutes({2.0, std::nullopt, 3.0}), 3.0);
    EXPECT_FALSE(median_minutes({2.0, std::nullopt, std::nullopt}));
    EXPECT_FALSE(median_minutes({5.0, std::nullopt}));
}

namespace {

Dataset synthetic(int subjects, double signal, double noise, std::uint64_t seed, int rois = 16, int timepoints = 240)
{
    CohortSpec spec;
    spec.n_subjects = subjects;
    spec.n_rois = rois;
    spec.n_timepoints = timepoints;
    spec.subject_signal = signal;
    spec.session_noise = noise;
    spec.seed = seed;
    auto c = generate_cohort(spec);
    return make_dataset(c.scans, c.series, "synthetic");
}

}  // namespace

TEST(MinTime, NoiseFreeSortsAtFirstGridPoint)
{
    const auto ds = synthetic(6, 1.0, 0.0, 3);
    const auto grid = default_time_grid(ds);
    ASSERT_EQ(grid.front(), 1.0);
    EXPECT_EQ(grid.back(), 8.0);  // 240 samples at 2 s
    const auto res = min_time_to_perfect_sort(ds, Parcellation::identity(16), PipelineConfig{}, grid, GaConfig{});
    ASSERT_TRUE(res.minutes);
    EXPECT_EQ(*res.minutes, 1.0);
    ASSERT_EQ(res.points.size(), 1u);
    EXPECT_TRUE(res.points[0].perfect);
    EXPECT_TRUE(res.points[0].exact_fitness);
}

TEST(MinTime, NeverSortsWithoutSignal)
{
    const auto ds = synthetic(6, 0.0, 0.3, 4);
    const auto res = min_time_to_perfect_sort(ds, Parcellation::identity(16), PipelineConfig{}, {1, 2}, GaConfig{});
    EXPECT_FALSE(res.minutes);
    EXPECT_EQ(res.points.size(), 2u);
}

TEST(MinTime, GridErrors)
{
    const auto ds = synthetic(3, 1.0, 0.0, 5);
    EXPECT_THROW(min_time_to_perfect_sort(ds, Parcellation::identity(16), PipelineConfig{}, {}, GaConfig{}), ArgumentError);
    EXPECT_THROW(min_time_to_perfect_sort(ds, Parcellation::identity(16), PipelineConfig{}, {2, 1}, GaConfig{}), ArgumentError);
    try {
        min_time_to_perfect_sort(ds, Parcellation::identity(16), PipelineConfig{}, {0.01}, GaConfig{});
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("T = "), std::string::npos) << e.what();
    }
}

TEST(SubsampleSweep, FullCohortSingleRunAndDeterminism)
{
    const auto ds = synthetic(5, 1.0, 0.0, 6);
    const auto grid = std::vector<double>{1, 2};
    const auto a = subject_subsample_sweep(ds, PipelineConfig{}, {2, 5}, 3, 11, grid, GaConfig{});
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a[0].runs.size(), 3u);
    EXPECT_EQ(a[1].runs.size(), 1u);
    EXPECT_EQ(a[1].median_minutes, a[1].runs[0].minutes);
    const auto b = subject_subsample_sweep(ds, PipelineConfig{}, {2, 5}, 3, 11, grid, GaConfig{});
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].median_minutes, b[i].median_minutes);
        for (std::size_t k = 0; k < a[i].runs.size(); ++k) EXPECT_EQ(a[i].runs[k].minutes, b[i].runs[k].minutes);
    }
    EXPECT_THROW(subject_subsample_sweep(ds, PipelineConfig{}, {6}, 3, 11, grid, GaConfig{}), ArgumentError);
}

TEST(SubsampleSweep, MediansNondecreasingInN)
{
    // Moderate noise: small subsets sort quickly, the full cohort needs longer.
    const auto ds = synthetic(16, 0.5, 0.35, 7, 16, 300);
    std::vector<double> grid;
    for (int m = 1; m <= 10; ++m) grid.push_back(m);
    const auto sweep = subject_subsample_sweep(ds, PipelineConfig{}, {2, 8, 16}, 5, 21, grid, GaConfig{});
    auto value = [](const SubsampleSummary& s) { return s.median_minutes.value_or(1e9); };
    EXPECT_LE(value(sweep[0]), value(sweep[1]));
    EXPECT_LE(value(sweep[1]), value(sweep[2]));
    EXPECT_LT(value(sweep[0]), value(sweep[2]));
}
