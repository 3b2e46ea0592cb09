#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fcid/matching.hpp"
#include "fcid/model.hpp"
#include "fcid/synth.hpp"

namespace fcid::cli {

inline constexpr std::uint64_t default_seed = 20140601;

struct GlobalOptions {
    std::filesystem::path manifest;
    std::filesystem::path config_path;  // empty: defaults
    std::uint64_t seed = default_seed;
    std::filesystem::path out_dir = "fcid_out";
    int jobs = 1;
    std::string invocation;  // full argv, recorded in run metadata
};

struct SynthOptions {
    CohortSpec spec;
    bool unlabeled = false;
};

struct ReliabilityOptions {
    int permutations = 1000;
    bool svg = false;
};

struct SweepOptions {
    std::string axis;  // time | rois | threshold
    std::vector<double> grid;
    bool svg = false;
};

struct SortOptions {
    GaConfig ga;
    bool min_time = false;
    std::vector<double> time_grid;  // empty: whole minutes up to the shortest scan
    std::vector<int> subsets;
    int repeats = 20;
};

int cmd_synth(const GlobalOptions& g, const SynthOptions& o);
int cmd_infer(const GlobalOptions& g, bool export_csv);
int cmd_reliability(const GlobalOptions& g, const ReliabilityOptions& o);
int cmd_sweep(const GlobalOptions& g, const SweepOptions& o);
int cmd_sort(const GlobalOptions& g, const SortOptions& o);
int cmd_localize(const GlobalOptions& g);

std::vector<double> parse_number_list(const std::string& s);

}  // namespace fcid::cli
