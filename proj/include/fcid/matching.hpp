#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fcid/model.hpp"
#include "fcid/pipeline.hpp"
#include "fcid/reliability.hpp"

namespace fcid {

/// Directed rank sum of a pairing; identical to rank_sum(r, p).rank_sum.
long long pairing_fitness(const RankMatrix& r, const Pairing& p);

struct MatchResult {
    Pairing pairing;
    long long fitness = 0;
};

inline constexpr int exact_pairing_max_n = 26;

/// Globally optimal pairing by dynamic programming over subsets (O(2^n n)).
/// Among optimal pairings the lexicographically smallest partner array wins.
/// Throws ArgumentError for odd n and SizeError for n > 26.
MatchResult exact_min_pairing(const RankMatrix& r);

struct GaConfig {
    int population_size = 200;
    int generations_max = 500;
    double mutation_rate = 0.2;  // per individual
    int elitism_count = 4;
    std::uint64_t seed = 1;
    int stall_generations = 50;

    void validate() const;
};

struct GaResult {
    Pairing pairing;
    long long fitness = 0;
    int generations_used = 0;
    std::vector<long long> best_history;  // best fitness after each generation (index 0 = initial population)
};

/// Genetic search over pairings. Individuals are partner arrays, so every
/// chromosome is a feasible pairing. Binary tournament selection; crossover keeps
/// the parents' shared pairs and completes the rest greedily by cheapest
/// symmetric cost; mutation swaps the partners of two pairs; the best
/// `elitism_count` individuals survive unchanged. A child that duplicates one
/// already in the next generation is mutated until it is new.
GaResult ga_sort(const RankMatrix& r, const GaConfig& cfg);

struct TimePointOutcome {
    double minutes = 0;
    long long true_rank_sum = 0;
    long long ga_fitness = 0;
    std::optional<long long> exact_fitness;
    bool perfect = false;
};

struct MinTimeResult {
    std::optional<double> minutes;  // smallest grid value with a perfect sort
    std::vector<TimePointOutcome> points;
};

/// For each T (minutes, ascending): truncate to T, rebuild graphs and ranks, and
/// sort. The best pairing found (GA, or the exact optimum when n <= 26 and it is
/// strictly better) must equal the ground truth for T to count. Stops at the first success.
MinTimeResult min_time_to_perfect_sort(const Dataset& ds, const Parcellation& parc, const PipelineConfig& config,
                                       const std::vector<double>& time_grid_minutes, const GaConfig& ga, int jobs = 1);

/// Whole minutes 1..floor(shortest scan duration).
std::vector<double> default_time_grid(const Dataset& ds);

struct SubsampleRun {
    int n_subjects = 0;
    int repeat = 0;
    std::optional<double> minutes;
};

struct SubsampleSummary {
    int n_subjects = 0;
    std::optional<double> median_minutes;  // none when the median run never sorted perfectly
    std::vector<SubsampleRun> runs;
};

/// For each N: `repeats` random N-subject subsets (a single run when N equals
/// the cohort), min time per subset, and the median across runs.
std::vector<SubsampleSummary> subject_subsample_sweep(const Dataset& ds, const PipelineConfig& config,
                                                      const std::vector<int>& n_values, int repeats,
                                                      std::uint64_t seed, const std::vector<double>& time_grid_minutes,
                                                      const GaConfig& ga, int jobs = 1);

/// Median treating "never sorted" as +infinity; none if the median is infinite.
std::optional<double> median_minutes(const std::vector<std::optional<double>>& values);

}  // namespace fcid
