#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <iostream>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fcid/errors.hpp"
#include "fcid/graphs.hpp"
#include "fcid/ingest.hpp"
#include "fcid/io_util.hpp"
#include "fcid/parallel.hpp"
#include "fcid/pipeline.hpp"
#include "fcid/reliability.hpp"

namespace fcid::cli {

namespace {

using nlohmann::json;

void log(const std::string& msg)
{
    static std::mutex m;
    std::lock_guard lock(m);
    std::cerr << "[fcid] " << msg << '\n';
}

std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

PipelineConfig load_pipeline_config(const GlobalOptions& g)
{
    return g.config_path.empty() ? PipelineConfig{} : load_config(g.config_path);
}

void write_json(const std::filesystem::path& path, const json& j)
{
    write_file_atomic(path, j.dump(2) + "\n");
}

void write_run_metadata(const GlobalOptions& g, const std::string& command, const PipelineConfig* config, int exit_code,
                        const json& extra = json::object())
{
    json meta;
    meta["command"] = command;
    meta["invocation"] = g.invocation;
    meta["manifest"] = g.manifest.empty() ? json(nullptr) : json(g.manifest.string());
    meta["seed"] = g.seed;
    meta["jobs"] = g.jobs;
    if (config) {
        meta["config"] = config->to_json();
        meta["config_hash"] = config->hash();
    }
    meta["exit_code"] = exit_code;
    meta["generated_at"] = utc_timestamp();
    for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
    write_json(g.out_dir / ("run_" + command + ".json"), meta);
}

struct Loaded {
    PipelineConfig config;
    Dataset dataset;
    Parcellation parcellation;
};

Loaded load_inputs(const GlobalOptions& g)
{
    if (g.manifest.empty()) throw ArgumentError("--manifest is required");
    Loaded in;
    in.config = load_pipeline_config(g);
    in.dataset = load_dataset(g.manifest, in.config, g.jobs);
    in.config.validate(in.dataset.shortest_duration_seconds());
    in.parcellation = build_parcellation(in.dataset, in.config);
    log("loaded " + std::to_string(in.dataset.size()) + " scans, " + std::to_string(in.parcellation.n_cells()) +
        " ROIs, config " + in.config.hash());
    return in;
}

std::filesystem::path cache_dir(const GlobalOptions& g, const PipelineConfig& config)
{
    return g.out_dir / "cache" / config.hash();
}

struct CacheOutcome {
    std::vector<Connectome> graphs;
    std::vector<std::string> errors;  // "scan_id: message"
    int hits = 0;
};

// Loads each scan's connectome from the cache or computes and stores it.
CacheOutcome cached_connectomes(const GlobalOptions& g, const Dataset& ds, const Parcellation& parc,
                                const PipelineConfig& config)
{
    const auto dir = cache_dir(g, config);
    const auto hash = config.hash();
    CacheOutcome out;
    out.graphs.resize(ds.size());
    std::vector<std::string> errors(ds.size());
    std::vector<char> hit(ds.size(), 0);
    parallel_for(ds.size(), g.jobs, [&](std::size_t k) {
        const auto& id = ds.scans[k].scan_id;
        const auto file = dir / (id + ".conn");
        try {
            if (auto cached = read_connectome_cache(file, id, hash)) {
                out.graphs[k] = std::move(cached->graph);
                hit[k] = 1;
                return;
            }
            out.graphs[k] = infer_connectome(ds.series[k], parc, config);
            write_connectome_cache(file, {id, hash, out.graphs[k]});
        } catch (const std::exception& e) {
            errors[k] = id + ": " + e.what();
        }
    });
    for (std::size_t k = 0; k < ds.size(); ++k) {
        if (!errors[k].empty()) out.errors.push_back(errors[k]);
        out.hits += hit[k];
    }
    json meta;
    meta["config"] = config.to_json();
    meta["config_hash"] = hash;
    meta["window_seconds"] = config.window_seconds ? json(*config.window_seconds) : json(nullptr);
    meta["n_rois"] = parc.n_cells();
    meta["scans"] = scan_ids(ds);
    write_json(dir / "meta.json", meta);
    log("connectomes: " + std::to_string(out.hits) + " cache hits, " +
        std::to_string(ds.size() - static_cast<std::size_t>(out.hits) - out.errors.size()) + " computed, " +
        std::to_string(out.errors.size()) + " failed");
    return out;
}

std::vector<Connectome> require_connectomes(const GlobalOptions& g, const Dataset& ds, const Parcellation& parc,
                                            const PipelineConfig& config)
{
    auto outcome = cached_connectomes(g, ds, parc, config);
    if (!outcome.errors.empty()) {
        std::string msg = "graph inference failed for " + std::to_string(outcome.errors.size()) + " scan(s):";
        for (const auto& e : outcome.errors) msg += "\n  " + e;
        throw Error(msg);
    }
    return std::move(outcome.graphs);
}

std::string line_chart_svg(const std::vector<double>& x, const std::vector<double>& y, double floor_value,
                           const std::string& title, const std::string& x_label)
{
    const double w = 520, h = 320, m = 50;
    double xmin = x.front(), xmax = x.front(), ymin = floor_value, ymax = floor_value;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xmin = std::min(xmin, x[i]);
        xmax = std::max(xmax, x[i]);
        ymin = std::min(ymin, y[i]);
        ymax = std::max(ymax, y[i]);
    }
    const double xs = xmax > xmin ? xmax - xmin : 1.0;
    const double ys = ymax > ymin ? ymax - ymin : 1.0;
    auto px = [&](double v) { return m + (v - xmin) / xs * (w - 2 * m); };
    auto py = [&](double v) { return h - m - (v - ymin) / ys * (h - 2 * m); };
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    s << "<text x=\"" << m << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
    s << "<text x=\"" << w / 2 << "\" y=\"" << h - 10 << "\" font-family=\"sans-serif\" font-size=\"12\">" << x_label
      << "</text>\n";
    s << "<line x1=\"" << m << "\" y1=\"" << py(floor_value) << "\" x2=\"" << w - m << "\" y2=\"" << py(floor_value)
      << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    s << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) s << px(x[i]) << ',' << py(y[i]) << ' ';
    s << "\"/>\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
        s << "<circle cx=\"" << px(x[i]) << "\" cy=\"" << py(y[i]) << "\" r=\"3\" fill=\"steelblue\"/>\n";
    }
    s << "</svg>\n";
    return s.str();
}

std::string format_number(double v)
{
    std::ostringstream s;
    s << v;
    return s.str();
}

}  // namespace

std::vector<double> parse_number_list(const std::string& s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw ArgumentError("not a number: '" + item + "'");
        }
        if (used != item.size()) throw ArgumentError("not a number: '" + item + "'");
        out.push_back(v);
    }
    return out;
}

int cmd_synth(const GlobalOptions& g, const SynthOptions& o)
{
    auto spec = o.spec;
    spec.seed = g.seed;
    auto cohort = generate_cohort(spec);
    for (std::size_t k = 0; k < cohort.scans.size(); ++k) {
        auto& rec = cohort.scans[k];
        write_file_atomic(g.out_dir / rec.path, format_csv_timeseries(cohort.series[k]));
        if (o.unlabeled) rec.subject_id.clear();
        rec.path = g.out_dir / rec.path;
    }
    write_json(g.out_dir / "manifest.json", manifest_to_json(cohort.scans, g.out_dir));
    json extra;
    extra["cohort"] = {{"n_subjects", spec.n_subjects}, {"n_rois", spec.n_rois}, {"n_timepoints", spec.n_timepoints},
                       {"tr_seconds", spec.tr_seconds}, {"subject_signal", spec.subject_signal},
                       {"session_noise", spec.session_noise}, {"unlabeled", o.unlabeled}};
    if (spec.informative_edge) extra["cohort"]["informative_edge"] = {spec.informative_edge->first, spec.informative_edge->second};
    write_run_metadata(g, "synth", nullptr, 0, extra);
    log("wrote " + std::to_string(cohort.scans.size()) + " scans to " + (g.out_dir / "manifest.json").string());
    return 0;
}

int cmd_infer(const GlobalOptions& g, bool export_csv)
{
    auto in = load_inputs(g);
    auto outcome = cached_connectomes(g, in.dataset, in.parcellation, in.config);
    for (const auto& e : outcome.errors) std::cerr << "error: " << e << '\n';
    if (export_csv) {
        for (std::size_t k = 0; k < in.dataset.size(); ++k) {
            if (outcome.graphs[k].n_rois() == 0) continue;
            write_file_atomic(g.out_dir / "connectomes" / (in.dataset.scans[k].scan_id + ".csv"),
                              format_connectome_csv(outcome.graphs[k]));
        }
    }
    const int code = outcome.errors.empty() ? 0 : 1;
    json extra;
    extra["cache_dir"] = cache_dir(g, in.config).string();
    extra["cache_hits"] = outcome.hits;
    extra["failures"] = outcome.errors;
    write_run_metadata(g, "infer", &in.config, code, extra);
    return code;
}

int cmd_reliability(const GlobalOptions& g, const ReliabilityOptions& o)
{
    auto in = load_inputs(g);
    if (!in.dataset.labeled()) throw ManifestError("reliability needs subject labels for every scan");
    const auto truth = true_pairing(in.dataset.scans);
    const auto graphs = require_connectomes(g, in.dataset, in.parcellation, in.config);
    const auto distances = distance_matrix(graphs, in.config.distance_metric, scan_ids(in.dataset), g.jobs);
    const auto ranks = rank_matrix(distances);
    const auto result = permutation_null(ranks, truth, o.permutations, g.seed, g.jobs);

    auto report = report_to_json(result, in.config, o.permutations, g.seed);
    report["scan_ids"] = scan_ids(in.dataset);
    report["n_rois"] = in.parcellation.n_cells();
    write_json(g.out_dir / "reliability.json", report);
    if (o.svg) {
        write_file_atomic(g.out_dir / "distance.svg", heatmap_svg(distances.values, "Distance matrix"));
        write_file_atomic(g.out_dir / "rank.svg", heatmap_svg(ranks.to_matrix().cast<double>(), "Rank matrix"));
    }
    log("rank sum " + std::to_string(result.rank_sum) + " (min " + std::to_string(result.n_scans) + "), p = " +
        format_number(*result.p_value));
    write_run_metadata(g, "reliability", &in.config, 0);
    return 0;
}

int cmd_sweep(const GlobalOptions& g, const SweepOptions& o)
{
    if (o.axis != "time" && o.axis != "rois" && o.axis != "threshold") {
        throw ArgumentError("sweep axis must be time, rois, or threshold");
    }
    if (o.grid.empty()) throw ArgumentError("sweep grid is empty");
    auto in = load_inputs(g);
    if (!in.dataset.labeled()) throw ManifestError("sweep needs subject labels for every scan");
    const auto truth = true_pairing(in.dataset.scans);

    std::ostringstream csv;
    csv << "axis,value,n_rois,n_datapoints,rank_sum,min_rank_sum,config_hash\n";
    std::vector<double> xs, ys;
    std::vector<std::string> failures;
    for (double value : o.grid) {
        try {
            auto cfg = in.config;
            Parcellation parc = in.parcellation;
            if (o.axis == "time") {
                cfg.window_seconds = value * 60.0;
            } else if (o.axis == "rois") {
                if (value < 1 || value != std::floor(value)) throw ArgumentError("ROI count must be a positive integer");
                cfg.parcellation_source = "uniform";
                cfg.n_rois_target = static_cast<int>(value);
                parc = build_parcellation(in.dataset, cfg);
            } else {
                cfg.threshold_percentile = value;
            }
            cfg.validate();
            const auto graphs = require_connectomes(g, in.dataset, parc, cfg);
            const auto ranks = rank_matrix(distance_matrix(graphs, cfg.distance_metric, scan_ids(in.dataset), g.jobs));
            const auto result = rank_sum(ranks, truth);
            Eigen::Index datapoints = std::numeric_limits<Eigen::Index>::max();
            for (const auto& ts : in.dataset.series) {
                datapoints = std::min(datapoints, cfg.window_seconds ? window_truncate(ts, *cfg.window_seconds).cols() : ts.cols());
            }
            csv << o.axis << ',' << format_number(value) << ',' << parc.n_cells() << ',' << datapoints << ','
                << result.rank_sum << ',' << result.n_scans << ',' << cfg.hash() << '\n';
            xs.push_back(value);
            ys.push_back(static_cast<double>(result.rank_sum));
            log(o.axis + " = " + format_number(value) + ": rank sum " + std::to_string(result.rank_sum));
        } catch (const Error& e) {
            failures.push_back(o.axis + " = " + format_number(value) + ": " + e.what());
            std::cerr << "error: " << failures.back() << " (skipped)\n";
        }
    }
    write_file_atomic(g.out_dir / ("sweep_" + o.axis + ".csv"), csv.str());
    if (o.svg && !xs.empty()) {
        const std::string label = o.axis == "time" ? "acquisition time (min)" : o.axis == "rois" ? "ROIs" : "percentile";
        write_file_atomic(g.out_dir / ("sweep_" + o.axis + ".svg"),
                          line_chart_svg(xs, ys, static_cast<double>(in.dataset.size()), "Rank sum", label));
    }
    const int code = failures.empty() ? 0 : 1;
    if (!failures.empty()) {
        std::cerr << failures.size() << " of " << o.grid.size() << " grid points failed\n";
    }
    json extra;
    extra["axis"] = o.axis;
    extra["grid"] = o.grid;
    extra["failures"] = failures;
    write_run_metadata(g, "sweep", &in.config, code, extra);
    return code;
}

int cmd_sort(const GlobalOptions& g, const SortOptions& o)
{
    auto in = load_inputs(g);
    auto ga = o.ga;
    ga.seed = g.seed;
    const auto graphs = require_connectomes(g, in.dataset, in.parcellation, in.config);
    const auto ranks = rank_matrix(distance_matrix(graphs, in.config.distance_metric, scan_ids(in.dataset), g.jobs));
    const auto found = ga_sort(ranks, ga);

    const auto ids = scan_ids(in.dataset);
    json report;
    report["n_scans"] = ranks.size();
    report["fitness"] = found.fitness;
    report["generations_used"] = found.generations_used;
    report["partner"] = found.pairing.partner();
    auto pairs = json::array();
    for (auto [a, b] : found.pairing.pairs()) pairs.push_back({ids[static_cast<std::size_t>(a)], ids[static_cast<std::size_t>(b)]});
    report["pairs"] = pairs;
    report["ga"] = {{"population_size", ga.population_size}, {"generations_max", ga.generations_max},
                    {"mutation_rate", ga.mutation_rate}, {"elitism_count", ga.elitism_count},
                    {"stall_generations", ga.stall_generations}, {"seed", ga.seed}};
    report["config_hash"] = in.config.hash();
    if (ranks.size() <= exact_pairing_max_n) {
        const auto exact = exact_min_pairing(ranks);
        report["exact_fitness"] = exact.fitness;
        report["exact_optimum_certified"] = exact.fitness == found.fitness;
    } else {
        report["exact_optimum_certified"] = nullptr;
    }
    const bool labeled = in.dataset.labeled();
    if (labeled) {
        const auto truth = true_pairing(in.dataset.scans);
        report["perfect"] = found.pairing == truth;
        report["true_rank_sum"] = pairing_fitness(ranks, truth);
    }
    write_json(g.out_dir / "sort.json", report);
    log("best pairing fitness " + std::to_string(found.fitness) + " after " + std::to_string(found.generations_used) +
        " generations" + (labeled ? (found.pairing == true_pairing(in.dataset.scans) ? " (perfect)" : " (not perfect)") : ""));

    if ((o.min_time || !o.subsets.empty()) && !labeled) {
        throw ManifestError("minimum-time sweeps need subject labels for every scan");
    }
    const auto grid = o.time_grid.empty() ? default_time_grid(in.dataset) : o.time_grid;
    const std::string parc_name = to_string(in.parcellation.scheme());
    const std::string n_rois = std::to_string(in.parcellation.n_cells());
    if (o.min_time || !o.subsets.empty()) {
        std::ostringstream csv;
        csv << "dataset,parcellation,n_rois,N,repeat,min_time_minutes,perfect\n";
        std::ostringstream table;
        table << "Minimum time (min) to perfectly sort scans\n";
        auto emit = [&](int n, int repeat, const std::optional<double>& minutes) {
            csv << in.dataset.name << ',' << parc_name << ',' << n_rois << ',' << n << ',' << repeat << ','
                << (minutes ? format_number(*minutes) : std::string()) << ',' << (minutes ? "true" : "false") << '\n';
        };
        json summary = json::object();
        const int n_subjects = static_cast<int>(in.dataset.subjects().size());
        if (o.min_time) {
            const auto result = min_time_to_perfect_sort(in.dataset, in.parcellation, in.config, grid, ga, g.jobs);
            emit(n_subjects, 0, result.minutes);
            table << "Dataset | " << parc_name << " " << n_rois << " ROIs\n";
            table << in.dataset.name << " | " << (result.minutes ? format_number(*result.minutes) : "none") << "\n";
            summary["min_time_minutes"] = result.minutes ? json(*result.minutes) : json(nullptr);
            auto points = json::array();
            for (const auto& p : result.points) {
                points.push_back({{"minutes", p.minutes}, {"true_rank_sum", p.true_rank_sum}, {"ga_fitness", p.ga_fitness},
                                  {"exact_fitness", p.exact_fitness ? json(*p.exact_fitness) : json(nullptr)},
                                  {"perfect", p.perfect}});
            }
            summary["points"] = points;
        }
        if (!o.subsets.empty()) {
            const auto sweep = subject_subsample_sweep(in.dataset, in.config, o.subsets, o.repeats, g.seed, grid, ga, g.jobs);
            table << "Dataset";
            for (const auto& s : sweep) table << " | N=" << s.n_subjects;
            table << "\n" << in.dataset.name;
            auto medians = json::object();
            for (const auto& s : sweep) {
                for (const auto& r : s.runs) emit(r.n_subjects, r.repeat, r.minutes);
                table << " | " << (s.median_minutes ? format_number(*s.median_minutes) : "none");
                medians[std::to_string(s.n_subjects)] = s.median_minutes ? json(*s.median_minutes) : json(nullptr);
            }
            table << "\n";
            summary["median_min_time_by_N"] = medians;
        }
        write_file_atomic(g.out_dir / "sort_sweep.csv", csv.str());
        write_file_atomic(g.out_dir / "sort_table.txt", table.str());
        write_json(g.out_dir / "sort_sweep.json", summary);
        std::cout << table.str();
    }
    write_run_metadata(g, "sort", &in.config, 0);
    return 0;
}

int cmd_localize(const GlobalOptions& g)
{
    const auto config = load_pipeline_config(g);
    if (config.threshold_percentile && *config.threshold_percentile > 0.0) {
        std::cerr << "error: localize refuses thresholded configs: zeroed weights make per-edge distances "
                     "meaningless. Remove threshold_percentile from the config.\n";
        write_run_metadata(g, "localize", &config, 2);
        return 2;
    }
    auto in = load_inputs(g);
    if (!in.dataset.labeled()) throw ManifestError("localize needs subject labels for every scan");
    const auto truth = true_pairing(in.dataset.scans);
    const auto graphs = require_connectomes(g, in.dataset, in.parcellation, in.config);
    const auto loc = edgewise_rank_sums(graphs, truth, g.jobs);

    std::ostringstream edges;
    edges << "roi_i,roi_j,edge_rank_sum\n";
    for (const auto& e : loc.edges) edges << e.roi_i + 1 << ',' << e.roi_j + 1 << ',' << e.rank_sum << '\n';
    std::ostringstream rois;
    rois << "roi,score\n";
    for (std::size_t i = 0; i < loc.roi_scores.size(); ++i) rois << i + 1 << ',' << loc.roi_scores[i] << '\n';
    write_file_atomic(g.out_dir / "edges.csv", edges.str());
    write_file_atomic(g.out_dir / "rois.csv", rois.str());

    json summary;
    summary["low_edge_threshold"] = loc.low_edge_threshold;
    summary["low_edge_percentile"] = 5.0;
    summary["n_edges"] = loc.edges.size();
    summary["n_rois"] = loc.roi_scores.size();
    summary["config_hash"] = in.config.hash();
    write_json(g.out_dir / "localization.json", summary);
    log("edge rank sums written; 5th-percentile cutoff " + format_number(loc.low_edge_threshold));
    write_run_metadata(g, "localize", &in.config, 0);
    return 0;
}

}  // namespace fcid::cli
