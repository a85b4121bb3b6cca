#include <copydet/cli.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

void model_flags(CLI::App* app, copydet::cli::RunConfig& c)
{
    app->add_option("--alpha", c.model.alpha, "prior probability of copying");
    app->add_option("--s", c.model.s, "selectivity of copiers");
    app->add_option("--n", c.model.n, "false values per item");
    app->add_option("--accuracy-init", c.model.accuracy_init, "initial source accuracy");
    app->add_option("--hybrid-cutoff", c.hybrid_cutoff, "pairs sharing at most this many values use the bound path");
    app->add_option("--rho-accuracy", c.rho_accuracy, "accuracy change that forces a recompute");
    app->add_option("--rho-value", c.rho_value, "entry score change treated as big");
    app->add_flag("--auto-rho", c.auto_rho, "pick rho-value from the widest gap between score changes");
    app->add_flag("--three-way", c.three_way, "report uncertain pairs");
    app->add_option("--max-rounds", c.max_rounds, "iteration limit");
    app->add_option("--epsilon", c.epsilon, "convergence threshold");
    app->add_option("--threads", c.threads, "worker threads");
}

void sample_flags(CLI::App* app, copydet::cli::RunConfig& c)
{
    app->add_option("--sample-rate", c.sample_rate, "fraction of items to sample");
    app->add_option("--min-per-source", c.min_per_source, "per-source item floor");
    app->add_option("--sampler", c.sampler, "scale, by-item or by-cell");
    app->add_option("--seed", c.seed, "random seed");
}

void synth_flags(CLI::App* app, copydet::cli::RunConfig& c)
{
    auto& s = c.synth;
    app->add_option("--sources", s.n_sources);
    app->add_option("--items", s.n_items);
    app->add_option("--accuracy-low", s.accuracy_low);
    app->add_option("--accuracy-high", s.accuracy_high);
    app->add_option("--false-values", s.n_false);
    app->add_option("--copier-fraction", s.copier_fraction);
    app->add_option("--selectivity", s.selectivity);
    app->add_option("--coverage-low", s.coverage_low);
    app->add_option("--coverage-high", s.coverage_high);
    app->add_option("--coverage-skew", s.coverage_skew);
    app->add_option("--synth-seed", s.seed, "generator seed");
}

}  // namespace

int main(int argc, char** argv)
{
    copydet::cli::RunConfig cfg;
    CLI::App app{"copy detection between data sources"};
    app.require_subcommand(1);

    auto* detect = app.add_subcommand("detect", "iterative copy detection and truth finding");
    detect->add_option("--input", cfg.input, "claims CSV (source_id,item_id,value)")->required();
    detect->add_option("--out-dir", cfg.out_dir, "directory for report, fusion and accuracy CSVs");
    detect->add_option("--metrics-output", cfg.metrics_output, "metrics JSON path");
    detect->add_option("--algorithm", cfg.algorithm, "pairwise, index, bound, bound-plus, hybrid or incremental");
    model_flags(detect, cfg);
    sample_flags(detect, cfg);

    auto* bench = app.add_subcommand("bench", "compare algorithms on one instance");
    bench->add_option("--input", cfg.input, "claims CSV; a synthetic instance is generated when omitted");
    bench->add_option("--out-dir", cfg.out_dir);
    bench->add_option("--algorithms", cfg.algorithms, "ladder entries, e.g. pairwise index hybrid")->delimiter(',');
    model_flags(bench, cfg);
    sample_flags(bench, cfg);
    synth_flags(bench, cfg);

    auto* gen = app.add_subcommand("gen", "generate synthetic claims with ground truth");
    gen->add_option("--out-dir", cfg.out_dir);
    gen->add_option("--seed", cfg.seed, "random seed");
    synth_flags(gen, cfg);

    auto* sample = app.add_subcommand("sample", "sample items from a claims file");
    sample->add_option("--input", cfg.input)->required();
    sample->add_option("--out-dir", cfg.out_dir);
    sample_flags(sample, cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return copydet::cli::usage_error;
    }
    cfg.command = app.get_subcommands().front()->get_name();
    // the generator seed follows --seed unless given separately
    if (gen->count("--synth-seed") == 0 && bench->count("--synth-seed") == 0) {
        cfg.synth.seed = cfg.seed;
    }
    return copydet::cli::run(cfg, std::cout, std::cerr);
}
