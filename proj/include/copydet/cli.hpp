#pragma once

// Command implementations behind the copydet tool. Argument parsing lives in
// tools/copydet.cpp; everything here takes a filled RunConfig.

#include <copydet/csv.hpp>
#include <copydet/detect.hpp>
#include <copydet/error.hpp>
#include <copydet/fusion.hpp>
#include <copydet/model.hpp>
#include <copydet/sampling.hpp>
#include <copydet/synth.hpp>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace copydet::cli {

inline constexpr int schema_version = 1;

enum Exit : int { ok = 0, runtime_failure = 1, usage_error = 2 };

struct RunConfig {
    std::string command;
    std::string input;
    std::string out_dir = ".";
    std::string metrics_output;  // defaults to <out-dir>/metrics.json

    std::string algorithm = "hybrid";
    std::vector<std::string> algorithms = {"pairwise", "index", "hybrid", "incremental", "scalesample"};

    ModelParams model;
    std::int64_t hybrid_cutoff = 16;
    double rho_accuracy = 0.2;
    double rho_value = 1.0;
    bool auto_rho = false;
    bool three_way = false;

    double sample_rate = 1.0;
    std::uint32_t min_per_source = 4;
    std::string sampler = "scale";
    std::uint64_t seed = 1;

    int max_rounds = 20;
    double epsilon = 1e-3;
    unsigned threads = 1;

    SynthConfig synth;

    void validate() const
    {
        model.validate();
        if (!(model.alpha > 0.0 && model.alpha < 1.0)) {
            throw ConfigError("alpha must be in (0, 1)");
        }
        if (model.n < 1) {
            throw ConfigError("n must be >= 1");
        }
        if (!(model.accuracy_init > 0.0 && model.accuracy_init < 1.0)) {
            throw ConfigError("accuracy-init must be in (0, 1)");
        }
        if (hybrid_cutoff < 0) {
            throw ConfigError("hybrid-cutoff must be >= 0");
        }
        if (!(rho_accuracy > 0.0) || !(rho_value > 0.0)) {
            throw ConfigError("rho-accuracy and rho-value must be > 0");
        }
        if (!(sample_rate > 0.0 && sample_rate <= 1.0)) {
            throw ConfigError("sample-rate must be in (0, 1]");
        }
        if (max_rounds < 1) {
            throw ConfigError("max-rounds must be >= 1");
        }
        if (!(epsilon > 0.0)) {
            throw ConfigError("epsilon must be > 0");
        }
        if (threads < 1) {
            throw ConfigError("threads must be >= 1");
        }
        if (sampler != "scale" && sampler != "by-item" && sampler != "by-cell") {
            throw ConfigError("sampler must be one of scale, by-item, by-cell");
        }
        for (const auto& a : algorithms) {
            if (a != "scalesample") {
                parse_algorithm(a);
            }
        }
        parse_algorithm(algorithm);
    }

    IterativeOptions iterative(Algorithm a) const
    {
        IterativeOptions o;
        o.detector = a;
        o.max_rounds = max_rounds;
        o.epsilon = epsilon;
        o.detect.hybrid_cutoff = hybrid_cutoff;
        o.detect.three_way = three_way;
        o.detect.threads = threads;
        o.incremental.hybrid_cutoff = hybrid_cutoff;
        o.incremental.three_way = three_way;
        o.incremental.rho_accuracy = rho_accuracy;
        o.incremental.rho_value = rho_value;
        o.incremental.auto_rho = auto_rho;
        return o;
    }
};

namespace detail {

inline std::filesystem::path out_path(const RunConfig& cfg, const std::string& name)
{
    return std::filesystem::path(cfg.out_dir) / name;
}

inline Dataset load_input(const RunConfig& cfg)
{
    if (cfg.input.empty()) {
        throw ConfigError("--input is required");
    }
    std::ifstream in(cfg.input, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open input " + cfg.input);
    }
    return load_dataset(in);
}

inline void ensure_out_dir(const RunConfig& cfg)
{
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (!std::filesystem::is_directory(cfg.out_dir)) {
        throw std::runtime_error("cannot create output directory " + cfg.out_dir);
    }
}

template <class F>
std::string render(F&& f)
{
    std::ostringstream os;
    f(os);
    return os.str();
}

inline Sample draw_sample(const Dataset& d, const RunConfig& cfg)
{
    if (cfg.sampler == "by-item") {
        return sample_by_item(d, cfg.sample_rate, cfg.seed);
    }
    if (cfg.sampler == "by-cell") {
        return sample_by_cell(d, cfg.sample_rate, cfg.seed);
    }
    return scale_sample(d, cfg.sample_rate, cfg.min_per_source, cfg.seed);
}

inline nlohmann::json round_json(const RoundSummary& r)
{
    nlohmann::json j = {{"round", r.round},
                        {"algorithm", r.algorithm},
                        {"computations", r.computations},
                        {"bound_computations", r.bound_computations},
                        {"pairs_considered", r.pairs_considered},
                        {"shared_values_examined", r.shared_values_examined},
                        {"copying_pairs", r.copying_pairs},
                        {"max_dp", r.max_dp},
                        {"max_da", r.max_da},
                        {"detect_seconds", r.detect_seconds}};
    if (r.trace) {
        j["recomputed_pairs"] = r.trace->recomputed_pairs;
        j["reused_report"] = r.trace->reused_report;
    }
    return j;
}

struct RunTotals {
    std::uint64_t computations = 0;
    std::uint64_t bound_computations = 0;
    std::uint64_t late_computations = 0;  // rounds 3 and later
    double seconds = 0.0;
};

inline RunTotals totals(const IterativeResult& r)
{
    RunTotals t;
    for (const auto& s : r.rounds) {
        t.computations += s.computations;
        t.bound_computations += s.bound_computations;
        if (s.round >= 3) {
            t.late_computations += s.computations;
        }
        t.seconds += s.detect_seconds;
    }
    return t;
}

}  // namespace detail

/// Builds the metrics document written by `detect`.
inline nlohmann::json detect_metrics(const RunConfig& cfg, const Dataset& d, const IterativeResult& r)
{
    auto t = detail::totals(r);
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& s : r.rounds) {
        rounds.push_back(detail::round_json(s));
    }
    const auto& last = r.rounds.back();
    return {{"schema_version", schema_version},
            {"command", "detect"},
            {"algorithm", cfg.algorithm},
            {"sources", d.source_count()},
            {"items", d.item_count()},
            {"claims", d.claim_count()},
            {"rounds", r.rounds.size()},
            {"converged", r.state.converged},
            {"computations", t.computations},
            {"bound_computations", t.bound_computations},
            {"wall_seconds", t.seconds},
            {"pairs_considered", last.pairs_considered},
            {"shared_values_examined", last.shared_values_examined},
            {"copying_pairs", last.copying_pairs},
            {"round_details", rounds}};
}

/// Iterative detection and fusion on one claims file.
inline int cmd_detect(const RunConfig& cfg, std::ostream& log)
{
    cfg.validate();
    auto d = detail::load_input(cfg);
    if (cfg.sample_rate < 1.0) {
        auto s = detail::draw_sample(d, cfg);
        log << "sampled " << s.plan.selected.size() << " of " << d.item_count() << " items\n";
        d = std::move(s.data);
    }
    auto algo = parse_algorithm(cfg.algorithm);
    auto r = run_iterative(d, cfg.model, cfg.iterative(algo));
    auto metrics = detect_metrics(cfg, d, r);

    auto report = detail::render([&](std::ostream& o) { write_report(o, r.report, d); });
    auto fusion = detail::render([&](std::ostream& o) { write_fusion(o, d, r.state.probs); });
    auto accuracy = detail::render([&](std::ostream& o) { write_accuracy(o, d, r.state.stats, r.state.round); });
    auto mpath = cfg.metrics_output.empty() ? detail::out_path(cfg, "metrics.json")
                                            : std::filesystem::path(cfg.metrics_output);
    detail::ensure_out_dir(cfg);
    csv::write_file_atomic(detail::out_path(cfg, "report.csv"), report);
    csv::write_file_atomic(detail::out_path(cfg, "fusion.csv"), fusion);
    csv::write_file_atomic(detail::out_path(cfg, "accuracy.csv"), accuracy);
    csv::write_file_atomic(mpath, metrics.dump(2) + "\n");

    log << cfg.algorithm << ": " << r.rounds.size() << " rounds" << (r.state.converged ? "" : " (not converged)")
        << ", " << metrics["computations"].get<std::uint64_t>() << " computations, "
        << r.report.copying_pairs().size() << " copying pairs\n";
    return ok;
}

struct BenchRow {
    std::string name;
    std::size_t rounds = 0;
    double seconds = 0.0;
    std::uint64_t computations = 0;
    std::uint64_t bound_computations = 0;
    std::uint64_t late_computations = 0;
    std::size_t copying = 0;
    Metrics vs_baseline;
    double fusion_diff = 0.0;
    double accuracy_variance = 0.0;
    std::optional<Metrics> vs_truth;
    double items_fraction = 1.0;
};

struct BenchResult {
    std::vector<BenchRow> rows;
    std::string baseline;
};

/// Runs the algorithm ladder on one instance. The first non-sampling entry
/// (pairwise when present) is the baseline the others are compared with.
inline BenchResult run_bench(const Dataset& d, const RunConfig& cfg, const GroundTruth* truth = nullptr)
{
    struct Run {
        const Dataset* data;
        IterativeResult result;
    };
    std::map<std::string, Run> runs;
    std::optional<Sample> sample;
    BenchResult out;
    for (const auto& name : cfg.algorithms) {
        if (runs.count(name)) {
            continue;
        }
        const Dataset* data = &d;
        Algorithm algo = Algorithm::hybrid;
        if (name == "scalesample") {
            sample = scale_sample(d, cfg.sample_rate, cfg.min_per_source, cfg.seed);
            data = &sample->data;
        } else {
            algo = parse_algorithm(name);
            if (out.baseline.empty()) {
                out.baseline = name;
            }
        }
        runs.emplace(name, Run{data, run_iterative(*data, cfg.model, cfg.iterative(algo))});
    }
    if (out.baseline.empty()) {
        out.baseline = cfg.algorithms.front();
    }
    const auto& base = runs.at(out.baseline);
    for (const auto& name : cfg.algorithms) {
        const auto& run = runs.at(name);
        if (std::any_of(out.rows.begin(), out.rows.end(), [&](const BenchRow& r) { return r.name == name; })) {
            continue;
        }
        auto t = detail::totals(run.result);
        BenchRow row;
        row.name = name;
        row.rounds = run.result.rounds.size();
        row.seconds = t.seconds;
        row.computations = t.computations;
        row.bound_computations = t.bound_computations;
        row.late_computations = t.late_computations;
        row.copying = run.result.report.copying_pairs().size();
        row.vs_baseline = compare_reports(*run.data, run.result.report, *base.data, base.result.report);
        row.fusion_diff = fusion_difference(*run.data, run.result.state.probs, *base.data, base.result.state.probs);
        row.accuracy_variance =
            accuracy_variance(*run.data, run.result.state.stats, *base.data, base.result.state.stats);
        if (truth != nullptr) {
            row.vs_truth = compare_to_truth(*run.data, run.result.report, *truth);
        }
        if (name == "scalesample") {
            row.items_fraction = sample->plan.item_fraction;
        }
        out.rows.push_back(row);
    }
    return out;
}

inline void write_bench_csv(std::ostream& o, const BenchResult& b)
{
    o << "algorithm,rounds,detect_seconds,computations,bound_computations,computations_after_round2,"
         "copying_pairs,precision,recall,f_measure,fusion_difference,accuracy_variance,truth_f_measure,"
         "item_fraction\n";
    for (const auto& r : b.rows) {
        csv::write_row(o, {r.name, std::to_string(r.rounds), csv::format_double(r.seconds, 6),
                           std::to_string(r.computations), std::to_string(r.bound_computations),
                           std::to_string(r.late_computations), std::to_string(r.copying),
                           csv::format_double(r.vs_baseline.precision, 6), csv::format_double(r.vs_baseline.recall, 6),
                           csv::format_double(r.vs_baseline.f_measure, 6), csv::format_double(r.fusion_diff, 6),
                           csv::format_double(r.accuracy_variance, 6),
                           r.vs_truth ? csv::format_double(r.vs_truth->f_measure, 6) : "",
                           csv::format_double(r.items_fraction, 6)});
    }
}

inline void write_bench_text(std::ostream& o, const BenchResult& b)
{
    o << "baseline: " << b.baseline << "\n";
    o << std::left << std::setw(13) << "algorithm" << std::right << std::setw(7) << "rounds" << std::setw(11)
      << "seconds" << std::setw(14) << "computations" << std::setw(12) << "after r2" << std::setw(9) << "copying"
      << std::setw(7) << "P" << std::setw(7) << "R" << std::setw(7) << "F" << std::setw(10) << "fus.diff"
      << std::setw(10) << "acc.var" << std::setw(9) << "truthF" << "\n";
    for (const auto& r : b.rows) {
        o << std::left << std::setw(13) << r.name << std::right << std::setw(7) << r.rounds << std::setw(11)
          << std::fixed << std::setprecision(4) << r.seconds << std::setw(14) << r.computations << std::setw(12)
          << r.late_computations << std::setw(9) << r.copying << std::setprecision(3) << std::setw(7)
          << r.vs_baseline.precision << std::setw(7) << r.vs_baseline.recall << std::setw(7)
          << r.vs_baseline.f_measure << std::setw(10) << r.fusion_diff << std::setw(10) << r.accuracy_variance;
        if (r.vs_truth) {
            o << std::setw(9) << r.vs_truth->f_measure;
        } else {
            o << std::setw(9) << "-";
        }
        o << "\n" << std::defaultfloat;
    }
}

/// Algorithm ladder on --input, or on a generated instance when no input
/// is given.
inline int cmd_bench(const RunConfig& cfg, std::ostream& log)
{
    cfg.validate();
    if (cfg.algorithms.empty()) {
        throw ConfigError("--algorithms must name at least one algorithm");
    }
    BenchResult b;
    if (!cfg.input.empty()) {
        auto d = detail::load_input(cfg);
        b = run_bench(d, cfg);
    } else {
        auto g = generate(cfg.synth);
        b = run_bench(g.data, cfg, &g.truth);
    }
    auto csv_text = detail::render([&](std::ostream& o) { write_bench_csv(o, b); });
    auto text = detail::render([&](std::ostream& o) { write_bench_text(o, b); });
    detail::ensure_out_dir(cfg);
    csv::write_file_atomic(detail::out_path(cfg, "bench.csv"), csv_text);
    csv::write_file_atomic(detail::out_path(cfg, "bench.txt"), text);
    log << text;
    return ok;
}

/// Synthetic claims plus ground truth.
inline int cmd_gen(const RunConfig& cfg, std::ostream& log)
{
    auto g = generate(cfg.synth);
    auto claims = detail::render([&](std::ostream& o) { write_dataset(o, g.data); });
    auto truth = detail::render([&](std::ostream& o) { write_truth(o, g.truth); });
    auto edges = detail::render([&](std::ostream& o) { write_edges(o, g.truth); });
    detail::ensure_out_dir(cfg);
    csv::write_file_atomic(detail::out_path(cfg, "claims.csv"), claims);
    csv::write_file_atomic(detail::out_path(cfg, "truth.csv"), truth);
    csv::write_file_atomic(detail::out_path(cfg, "edges.csv"), edges);
    auto sh = shape_of(g.data);
    log << sh.sources << " sources, " << sh.items << " items, " << sh.claims << " claims, "
        << g.truth.edges.size() << " copiers, " << std::setprecision(3) << sh.mean_values_per_item
        << " values per item\n";
    return ok;
}

/// Writes the reduced claims file and the plan.
inline int cmd_sample(const RunConfig& cfg, std::ostream& log)
{
    cfg.validate();
    auto d = detail::load_input(cfg);
    auto s = detail::draw_sample(d, cfg);
    auto claims = detail::render([&](std::ostream& o) { write_dataset(o, s.data); });
    auto plan = detail::render([&](std::ostream& o) { write_plan(o, s.plan, d); });
    detail::ensure_out_dir(cfg);
    csv::write_file_atomic(detail::out_path(cfg, "sample.csv"), claims);
    csv::write_file_atomic(detail::out_path(cfg, "plan.txt"), plan);
    log << s.plan.selected.size() << " of " << d.item_count() << " items, item fraction " << std::setprecision(4)
        << s.plan.item_fraction << ", cell fraction " << s.plan.cell_fraction << "\n";
    return ok;
}

/// Dispatches and maps exceptions to exit codes.
inline int run(const RunConfig& cfg, std::ostream& log, std::ostream& err)
{
    try {
        if (cfg.command == "detect") {
            return cmd_detect(cfg, log);
        }
        if (cfg.command == "bench") {
            return cmd_bench(cfg, log);
        }
        if (cfg.command == "gen") {
            return cmd_gen(cfg, log);
        }
        if (cfg.command == "sample") {
            return cmd_sample(cfg, log);
        }
        throw ConfigError("unknown command '" + cfg.command + "'");
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return usage_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return runtime_failure;
    }
}

}  // namespace copydet::cli
