#include "fcid/matching.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "fcid/errors.hpp"
#include "fcid/rng.hpp"

namespace fcid {

long long pairing_fitness(const RankMatrix& r, const Pairing& p)
{
    if (static_cast<int>(p.size()) != r.size()) {
        throw StructuralError("pairing size " + std::to_string(p.size()) + " does not match rank matrix size " +
                              std::to_string(r.size()));
    }
    long long s = 0;
    for (int k = 0; k < r.size(); ++k) s += r(k, p[static_cast<std::size_t>(k)]);
    return s;
}

namespace {

int symmetric_cost(const RankMatrix& r, int a, int b)
{
    return r(a, b) + r(b, a);
}

}  // namespace

MatchResult exact_min_pairing(const RankMatrix& r)
{
    const int n = r.size();
    if (n % 2 != 0) throw ArgumentError("exact pairing needs an even number of scans, got " + std::to_string(n));
    if (n > exact_pairing_max_n) {
        throw SizeError("exact pairing is limited to n <= " + std::to_string(exact_pairing_max_n) + " (got " +
                        std::to_string(n) + "); use the genetic search for larger cohorts");
    }
    // Costs sum to at most n(n-1) <= 650, so 16 bits suffice.
    const std::uint32_t full = (1u << n) - 1u;
    std::vector<std::uint16_t> best(static_cast<std::size_t>(full) + 1, std::numeric_limits<std::uint16_t>::max());
    best[0] = 0;
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        if (std::popcount(mask) % 2 != 0) continue;
        const int low = std::countr_zero(mask);
        const std::uint32_t rest = mask & (mask - 1);
        unsigned value = std::numeric_limits<unsigned>::max();
        for (std::uint32_t bits = rest; bits; bits &= bits - 1) {
            const int j = std::countr_zero(bits);
            const unsigned v = static_cast<unsigned>(symmetric_cost(r, low, j)) + best[rest & ~(1u << j)];
            value = std::min(value, v);
        }
        best[mask] = static_cast<std::uint16_t>(value);
    }

    // Smallest partner for the lowest open index at every step gives the lexicographically smallest array.
    std::vector<int> partner(static_cast<std::size_t>(n), -1);
    std::uint32_t mask = full;
    while (mask) {
        const int low = std::countr_zero(mask);
        const std::uint32_t rest = mask & (mask - 1);
        for (std::uint32_t bits = rest; bits; bits &= bits - 1) {
            const int j = std::countr_zero(bits);
            const std::uint32_t next = rest & ~(1u << j);
            if (static_cast<unsigned>(symmetric_cost(r, low, j)) + best[next] == best[mask]) {
                partner[static_cast<std::size_t>(low)] = j;
                partner[static_cast<std::size_t>(j)] = low;
                mask = next;
                break;
            }
        }
    }
    MatchResult out{Pairing(std::move(partner)), 0};
    out.fitness = pairing_fitness(r, out.pairing);
    return out;
}

void GaConfig::validate() const
{
    if (population_size < 2) throw ArgumentError("population_size must be >= 2");
    if (elitism_count < 0 || population_size < 2 * elitism_count) {
        throw ArgumentError("population_size must be >= 2 * elitism_count");
    }
    if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ArgumentError("mutation_rate must lie in [0, 1]");
    if (generations_max < 0) throw ArgumentError("generations_max must be >= 0");
    if (stall_generations < 1) throw ArgumentError("stall_generations must be >= 1");
}

namespace {

constexpr int max_duplicate_retries = 8;

struct Individual {
    std::vector<int> partner;
    long long fitness = 0;
};

long long directed_fitness(const RankMatrix& r, const std::vector<int>& partner)
{
    long long s = 0;
    for (int k = 0; k < r.size(); ++k) s += r(k, partner[static_cast<std::size_t>(k)]);
    return s;
}

class GeneticSorter {
public:
    GeneticSorter(const RankMatrix& r, const GaConfig& cfg)
        : r_(r), cfg_(cfg), n_(r.size()), rng_(derive_rng(cfg.seed, {0x6761ULL}))
    {
    }

    GaResult run()
    {
        std::vector<Individual> pop;
        pop.reserve(static_cast<std::size_t>(cfg_.population_size));
        for (int i = 0; i < cfg_.population_size; ++i) {
            auto p = random_pairing(n_, rng_);
            pop.push_back(evaluate(std::vector<int>(p.partner())));
        }
        sort_population(pop);

        GaResult out;
        out.best_history.push_back(pop.front().fitness);
        long long best = pop.front().fitness;
        int stall = 0;
        int gen = 0;
        while (gen < cfg_.generations_max && stall < cfg_.stall_generations) {
            ++gen;
            std::vector<Individual> next(pop.begin(), pop.begin() + cfg_.elitism_count);
            std::set<std::vector<int>> seen;
            for (const auto& e : next) seen.insert(e.partner);
            while (static_cast<int>(next.size()) < cfg_.population_size) {
                const auto& a = pop[tournament(pop.size())];
                const auto& b = pop[tournament(pop.size())];
                auto child = crossover(a.partner, b.partner);
                if (std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < cfg_.mutation_rate) mutate(child);
                // Duplicates are mutated until new, keeping the population diverse.
                for (int tries = 0; tries < max_duplicate_retries && seen.count(child); ++tries) mutate(child);
                seen.insert(child);
                next.push_back(evaluate(std::move(child)));
            }
            sort_population(next);
            pop = std::move(next);
            out.best_history.push_back(pop.front().fitness);
            if (pop.front().fitness < best) {
                best = pop.front().fitness;
                stall = 0;
            } else {
                ++stall;
            }
        }
        out.pairing = Pairing(pop.front().partner);
        out.fitness = pop.front().fitness;
        out.generations_used = gen;
        return out;
    }

private:
    Individual evaluate(std::vector<int> partner) const
    {
        const long long f = directed_fitness(r_, partner);
        return {std::move(partner), f};
    }

    static void sort_population(std::vector<Individual>& pop)
    {
        std::stable_sort(pop.begin(), pop.end(), [](const auto& a, const auto& b) { return a.fitness < b.fitness; });
    }

    // Population is sorted, so the lower index is never the less fit of the two.
    std::size_t tournament(std::size_t size)
    {
        std::uniform_int_distribution<std::size_t> pick(0, size - 1);
        return std::min(pick(rng_), pick(rng_));
    }

    std::vector<int> crossover(const std::vector<int>& a, const std::vector<int>& b)
    {
        std::vector<int> child(static_cast<std::size_t>(n_), -1);
        std::vector<int> open;
        for (int k = 0; k < n_; ++k) {
            if (a[static_cast<std::size_t>(k)] == b[static_cast<std::size_t>(k)]) {
                child[static_cast<std::size_t>(k)] = a[static_cast<std::size_t>(k)];
            } else {
                open.push_back(k);
            }
        }
        if (open.empty()) return child;

        struct Edge {
            int cost;
            int i;
            int j;
        };
        std::vector<Edge> edges;
        edges.reserve(open.size() * (open.size() - 1) / 2);
        for (std::size_t x = 0; x < open.size(); ++x) {
            for (std::size_t y = x + 1; y < open.size(); ++y) {
                edges.push_back({symmetric_cost(r_, open[x], open[y]), open[x], open[y]});
            }
        }
        // Equal-cost pairs are visited in random order; this is the only source of
        // variation when both parents agree on the cheap pairs.
        std::shuffle(edges.begin(), edges.end(), rng_);
        std::stable_sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) { return x.cost < y.cost; });
        for (const auto& e : edges) {
            if (child[static_cast<std::size_t>(e.i)] == -1 && child[static_cast<std::size_t>(e.j)] == -1) {
                child[static_cast<std::size_t>(e.i)] = e.j;
                child[static_cast<std::size_t>(e.j)] = e.i;
            }
        }
        return child;
    }

    void mutate(std::vector<int>& partner)
    {
        if (n_ < 4) return;
        std::uniform_int_distribution<int> pick(0, n_ - 1);
        const int a = pick(rng_);
        int c = pick(rng_);
        while (c == a || c == partner[static_cast<std::size_t>(a)]) c = pick(rng_);
        const int b = partner[static_cast<std::size_t>(a)];
        const int d = partner[static_cast<std::size_t>(c)];
        // (a,b),(c,d) -> (a,c),(b,d) or (a,d),(b,c)
        const bool cross = std::uniform_int_distribution<int>(0, 1)(rng_) == 1;
        const int a_new = cross ? d : c;
        const int b_new = cross ? c : d;
        partner[static_cast<std::size_t>(a)] = a_new;
        partner[static_cast<std::size_t>(a_new)] = a;
        partner[static_cast<std::size_t>(b)] = b_new;
        partner[static_cast<std::size_t>(b_new)] = b;
    }

    const RankMatrix& r_;
    const GaConfig& cfg_;
    int n_;
    Rng rng_;
};

}  // namespace

GaResult ga_sort(const RankMatrix& r, const GaConfig& cfg)
{
    cfg.validate();
    if (r.size() % 2 != 0) throw ArgumentError("genetic sort needs an even number of scans, got " + std::to_string(r.size()));
    if (r.size() < 4) throw ArgumentError("genetic sort needs at least 4 scans");
    return GeneticSorter(r, cfg).run();
}

std::vector<double> default_time_grid(const Dataset& ds)
{
    const auto minutes = static_cast<int>(std::floor(ds.shortest_duration_seconds() / 60.0 + 1e-9));
    std::vector<double> grid;
    for (int t = 1; t <= minutes; ++t) grid.push_back(t);
    return grid;
}

MinTimeResult min_time_to_perfect_sort(const Dataset& ds, const Parcellation& parc, const PipelineConfig& config,
                                       const std::vector<double>& time_grid_minutes, const GaConfig& ga, int jobs)
{
    if (time_grid_minutes.empty()) throw ArgumentError("time grid is empty");
    if (!std::is_sorted(time_grid_minutes.begin(), time_grid_minutes.end())) {
        throw ArgumentError("time grid must be ascending");
    }
    const auto truth = true_pairing(ds.scans);
    MinTimeResult out;
    for (double minutes : time_grid_minutes) {
        try {
            auto cfg = config;
            cfg.window_seconds = minutes * 60.0;
            const auto analysis = analyze(ds, parc, cfg, jobs);
            TimePointOutcome point;
            point.minutes = minutes;
            point.true_rank_sum = pairing_fitness(analysis.ranks, truth);
            const auto found = ga_sort(analysis.ranks, ga);
            point.ga_fitness = found.fitness;
            Pairing best = found.pairing;
            if (analysis.ranks.size() <= exact_pairing_max_n) {
                const auto exact = exact_min_pairing(analysis.ranks);
                point.exact_fitness = exact.fitness;
                if (exact.fitness < found.fitness) best = exact.pairing;
            }
            point.perfect = best == truth;
            out.points.push_back(point);
            if (point.perfect) {
                out.minutes = minutes;
                break;
            }
        } catch (const Error& e) {
            throw Error("T = " + std::to_string(minutes) + " min: " + e.what());
        }
    }
    return out;
}

std::optional<double> median_minutes(const std::vector<std::optional<double>>& values)
{
    if (values.empty()) return std::nullopt;
    std::vector<double> v;
    v.reserve(values.size());
    for (const auto& x : values) v.push_back(x ? *x : std::numeric_limits<double>::infinity());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    const double m = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    if (!std::isfinite(m)) return std::nullopt;
    return m;
}

std::vector<SubsampleSummary> subject_subsample_sweep(const Dataset& ds, const PipelineConfig& config,
                                                      const std::vector<int>& n_values, int repeats,
                                                      std::uint64_t seed, const std::vector<double>& time_grid_minutes,
                                                      const GaConfig& ga, int jobs)
{
    if (repeats < 1) throw ArgumentError("repeats must be >= 1");
    const auto subjects = ds.subjects();
    for (int n : n_values) {
        if (n < 2 || n > static_cast<int>(subjects.size())) {
            throw ArgumentError("subset size " + std::to_string(n) + " outside [2, " + std::to_string(subjects.size()) + "]");
        }
    }
    const auto parc = build_parcellation(ds, config);
    std::vector<SubsampleSummary> out;
    for (int n : n_values) {
        SubsampleSummary summary;
        summary.n_subjects = n;
        const int runs = n == static_cast<int>(subjects.size()) ? 1 : repeats;
        std::vector<std::optional<double>> minutes;
        for (int rep = 0; rep < runs; ++rep) {
            auto rng = derive_rng(seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep)});
            std::vector<std::size_t> idx(subjects.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(static_cast<std::size_t>(n));
            std::sort(idx.begin(), idx.end());
            std::vector<std::string> chosen;
            for (auto i : idx) chosen.push_back(subjects[i]);
            auto run_ga = ga;
            run_ga.seed = rng();
            const auto result = min_time_to_perfect_sort(ds.subset_subjects(chosen), parc, config, time_grid_minutes,
                                                         run_ga, jobs);
            summary.runs.push_back({n, rep, result.minutes});
            minutes.push_back(result.minutes);
        }
        summary.median_minutes = median_minutes(minutes);
        out.push_back(std::move(summary));
    }
    return out;
}

}  // namespace fcid
