#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "commands.hpp"
#include "fcid/errors.hpp"

using namespace fcid::cli;

int main(int argc, char** argv)
{
    CLI::App app{"Functional connectome identifiability: graph inference, rank-sum reliability, and pairing search"};
    app.require_subcommand(1);

    GlobalOptions g;
    for (int i = 0; i < argc; ++i) g.invocation += (i ? " " : "") + std::string(argv[i]);
    std::string out_dir = g.out_dir.string();
    std::string manifest, config;
    app.add_option("--manifest", manifest, "Dataset manifest (JSON)");
    app.add_option("--config", config, "Pipeline config (JSON)");
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
    app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

    SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic two-session cohort");
    synth_cmd->add_option("--subjects", synth.spec.n_subjects, "Number of subjects")->capture_default_str();
    synth_cmd->add_option("--rois", synth.spec.n_rois, "ROIs per series")->capture_default_str();
    synth_cmd->add_option("--timepoints", synth.spec.n_timepoints, "Samples per session")->capture_default_str();
    synth_cmd->add_option("--tr", synth.spec.tr_seconds, "Repetition time (s)")->capture_default_str();
    synth_cmd->add_option("--signal", synth.spec.subject_signal, "Subject distinctiveness")->capture_default_str();
    synth_cmd->add_option("--noise", synth.spec.session_noise, "Between-session noise")->capture_default_str();
    synth_cmd->add_flag("--unlabeled", synth.unlabeled, "Omit subject labels from the manifest");
    std::vector<int> informative_edge;
    synth_cmd->add_option("--informative-edge", informative_edge, "Two ROI numbers (1-based); subjects differ only there")
        ->expected(2)->delimiter(',');

    bool export_csv = false;
    auto* infer_cmd = app.add_subcommand("infer", "Infer and cache one connectome per scan");
    infer_cmd->add_flag("--export-csv", export_csv, "Also write each connectome as CSV");

    ReliabilityOptions rel;
    auto* rel_cmd = app.add_subcommand("reliability", "Rank-sum statistic with a permutation null");
    rel_cmd->add_option("-B,--permutations", rel.permutations, "Null replicates")->check(CLI::Range(100, 100000000))
        ->capture_default_str();
    rel_cmd->add_flag("--svg", rel.svg, "Write distance and rank heatmaps");

    SweepOptions sweep;
    std::string sweep_grid;
    auto* sweep_cmd = app.add_subcommand("sweep", "Rank sum across a parameter grid");
    sweep_cmd->add_option("axis", sweep.axis, "time | rois | threshold")->required()
        ->check(CLI::IsMember({"time", "rois", "threshold"}));
    sweep_cmd->add_option("--grid", sweep_grid, "Comma-separated values (minutes, ROI counts, or percentiles)")->required();
    sweep_cmd->add_flag("--svg", sweep.svg, "Write a line chart");

    SortOptions sort;
    std::string time_grid, subsets;
    auto* sort_cmd = app.add_subcommand("sort", "Pair scans without labels by genetic search");
    sort_cmd->add_option("--population", sort.ga.population_size)->capture_default_str();
    sort_cmd->add_option("--generations", sort.ga.generations_max)->capture_default_str();
    sort_cmd->add_option("--mutation-rate", sort.ga.mutation_rate)->capture_default_str();
    sort_cmd->add_option("--elitism", sort.ga.elitism_count)->capture_default_str();
    sort_cmd->add_option("--stall", sort.ga.stall_generations)->capture_default_str();
    sort_cmd->add_flag("--min-time", sort.min_time, "Find the shortest acquisition time that sorts perfectly");
    sort_cmd->add_option("--time-grid", time_grid, "Comma-separated minutes (default: 1..shortest scan)");
    sort_cmd->add_option("--subsets", subsets, "Comma-separated subject counts for subsampling");
    sort_cmd->add_option("--repeats", sort.repeats, "Random subsets per count")->capture_default_str();

    app.add_subcommand("localize", "Edge-wise rank sums and ROI scores");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    g.manifest = manifest;
    g.config_path = config;
    g.out_dir = out_dir;

    try {
        auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "synth") {
            if (!informative_edge.empty()) synth.spec.informative_edge = std::pair{informative_edge[0] - 1, informative_edge[1] - 1};
            return cmd_synth(g, synth);
        }
        if (name == "infer") return cmd_infer(g, export_csv);
        if (name == "reliability") return cmd_reliability(g, rel);
        if (name == "sweep") {
            sweep.grid = parse_number_list(sweep_grid);
            return cmd_sweep(g, sweep);
        }
        if (name == "sort") {
            sort.ga.validate();
            if (!time_grid.empty()) sort.time_grid = parse_number_list(time_grid);
            for (double v : parse_number_list(subsets)) {
                if (v < 1 || v != static_cast<int>(v)) throw fcid::ArgumentError("--subsets takes positive integers");
                sort.subsets.push_back(static_cast<int>(v));
            }
            return cmd_sort(g, sort);
        }
        return cmd_localize(g);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
