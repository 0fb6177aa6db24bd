// Command-line front end: threshold calibration, search/baseline runs with
// artifact persistence, statistical comparison of result tables, and replay
// audits of persisted runs.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "orbit/adapter.hpp"
#include "orbit/fitness.hpp"
#include "orbit/harness.hpp"
#include "orbit/model.hpp"
#include "orbit/scene_sim.hpp"
#include "orbit/search.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace orbit;

namespace {

std::unique_ptr<model::Model> make_model(const std::string& desc) {
    if (desc == "builtin") {
        return std::make_unique<model::ReferenceModel>(model::ReferenceModelConfig{});
    }
    const std::string prefix = "adapter:";
    if (desc.rfind(prefix, 0) == 0) {
        model::AdapterConfig cfg;
        cfg.command = desc.substr(prefix.size());
        return std::make_unique<model::AdapterModel>(cfg);
    }
    throw CLI::ValidationError("--model", "expected 'builtin' or 'adapter:<command>'");
}

// ORBIT_OUT overrides the output root from flags or config.
std::string effective_out(const std::string& flag_value) {
    if (const char* env = std::getenv("ORBIT_OUT"); env != nullptr && *env != '\0') {
        return env;
    }
    return flag_value;
}

harness::Table read_table_any(const std::string& path) {
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
        return harness::read_table_json(path);
    }
    return harness::read_table_csv(path);
}

struct RunOptions {
    std::string variant = "flip";
    int reps = 1;
    int pop = 12;
    int gens = 20;
    double mut_prob = 0.3;
    double cross_prob = 0.7;
    double t_similarity = 12.0;
    double noise_var = 0.1;
    int mcd_passes = 5;
    double sky_threshold = 0.7;
    std::string transform = "identity";
    std::string model = "builtin";
    uint64_t seed = 1;
    std::string out;
    bool no_archive = false;
};

int do_run(const RunOptions& opt) {
    const std::string out_dir = effective_out(opt.out);
    const auto m = make_model(opt.model);

    search::SearchSettings settings;
    settings.population_size = opt.pop;
    settings.generations = opt.gens;
    settings.mutation_probability = opt.mut_prob;
    settings.crossover_probability = opt.cross_prob;
    settings.validate();

    fitness::FitnessConfig cfg;
    cfg.sky_threshold = opt.sky_threshold;
    cfg.noise_variance = opt.noise_var;
    cfg.mcd_passes = opt.mcd_passes;
    cfg.similarity_threshold = opt.t_similarity;
    const auto transform = sim::parse_transform_id(opt.transform);

    if (opt.variant == "random") {
        // Budget parity with the search: population * generations images
        // (at least one population's worth when generations is 0).
        const int n_images = settings.population_size * std::max(settings.generations, 1);
        cfg.variant = fitness::Variant::kFlip;  // accuracy metric recorded for baseline images
        const fitness::Evaluator evaluator(cfg, *m, transform);
        std::vector<harness::Table> tables;
        for (int rep = 1; rep <= opt.reps; ++rep) {
            const uint64_t seed = harness::cell_seed(opt.seed, "random", rep);
            auto cell = harness::run_random_baseline(settings, evaluator, n_images, seed,
                                                     !opt.no_archive);
            cell.rep = rep;
            if (!out_dir.empty()) {
                harness::CellMeta meta;
                meta.variant = cell.variant;
                meta.rep = rep;
                meta.seed = seed;
                meta.settings = settings;
                meta.settings.master_seed = seed;
                meta.transform = transform;
                meta.fitness_config = cfg;
                meta.model_desc = opt.model;
                meta.baseline = true;
                meta.baseline_images = n_images;
                meta.baseline_archive_policy = !opt.no_archive;
                cell.dir = harness::persist_cell(cell, *m, meta, out_dir).dir;
            }
            tables.push_back(harness::build_image_table(cell, *m));
            std::cout << "random rep " << rep << ": " << cell.search.evaluations
                      << " evaluations, archive size "
                      << cell.search.archive.entries().size() << "\n";
        }
        if (!out_dir.empty()) {
            const auto report = harness::concat_tables(tables);
            harness::write_table_csv(report, (fs::path(out_dir) / "report.csv").string());
            harness::write_table_json(report, (fs::path(out_dir) / "report.json").string());
            std::cout << "report: " << (fs::path(out_dir) / "report.csv").string() << "\n";
        }
        return 0;
    }

    cfg.variant = fitness::parse_variant(opt.variant);
    if (cfg.variant == fitness::Variant::kGroundTruth) {
        cfg.relevance_source = fitness::RelevanceSource::kGroundTruth;
    }

    harness::ExperimentPlan plan;
    plan.variants = {cfg};
    plan.repetitions = opt.reps;
    plan.settings = settings;
    plan.transform = transform;
    plan.master_seed = opt.seed;
    plan.output_dir = out_dir;
    plan.model_desc = opt.model;

    const auto cells = harness::run_experiment(plan, *m);
    for (const auto& cell : cells) {
        std::cout << cell.variant << " rep " << cell.rep << ": " << cell.search.evaluations
                  << " evaluations, archive size " << cell.search.archive.entries().size();
        if (!cell.dir.empty()) std::cout << ", dir " << cell.dir;
        std::cout << "\n";
    }
    if (!out_dir.empty()) {
        std::cout << "report: " << (fs::path(out_dir) / "report.csv").string() << "\n";
    }
    return 0;
}

int do_audit(const std::string& cell_dir) {
    const auto meta = harness::read_cell_meta((fs::path(cell_dir) / "meta.json").string());
    if (meta.model_desc != "builtin") {
        throw std::runtime_error("audit supports builtin-model runs only");
    }
    const model::ReferenceModel m{model::ReferenceModelConfig{}};
    std::vector<model::ActivationVector> corpus;
    if (meta.fitness_config.variant == fitness::Variant::kSa) {
        corpus = model::build_activation_corpus(m, meta.corpus_size, meta.corpus_seed);
    }
    const fitness::Evaluator evaluator(meta.fitness_config, m, meta.transform, corpus);
    const auto log = harness::read_run_log((fs::path(cell_dir) / "run_log.ndjson").string());

    const auto report = harness::replay_audit(log, evaluator, meta.seed);

    // Recompute the per-image table from the log alone and compare with the
    // persisted one: every reported number must be derivable from the log.
    bool table_matches = false;
    if (report.ok) {
        const double threshold = meta.baseline && !meta.baseline_archive_policy
                                     ? std::numeric_limits<double>::min()
                                     : meta.fitness_config.similarity_threshold;
        harness::CellResult cell;
        cell.variant = meta.variant;
        cell.rep = meta.rep;
        cell.search.archive =
            harness::rebuild_archive_from_log(log, evaluator, meta.seed, threshold);
        const auto rebuilt = harness::build_image_table(cell, m);
        const auto tmp = fs::path(cell_dir) / ".audit_images.csv";
        harness::write_table_csv(rebuilt, tmp.string());
        table_matches = harness::hash_file(tmp.string()) ==
                        harness::hash_file((fs::path(cell_dir) / "images.csv").string());
        fs::remove(tmp);
    }

    json j;
    j["ok"] = report.ok && table_matches;
    j["records"] = report.records;
    j["appends"] = report.appends;
    j["replacements"] = report.replacements;
    j["discards"] = report.discards;
    j["skipped_gated"] = report.skipped_gated;
    j["table_recomputable"] = table_matches;
    if (!report.message.empty()) j["violation"] = report.message;
    std::cout << j.dump(2) << "\n";
    if (!report.ok || !table_matches) throw std::runtime_error("audit failed");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Search-based test generation for terrain segmentation models"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Config file (INI/TOML; flags override file values)");

    // calibrate
    auto* calibrate = app.add_subcommand(
        "calibrate", "Estimate the similarity threshold from random scenes");
    int cal_n = 1000;
    uint64_t cal_seed = 1;
    std::string cal_out;
    calibrate->add_option("--n", cal_n, "Number of random scenes")->capture_default_str();
    calibrate->add_option("--seed", cal_seed, "Random seed")->capture_default_str();
    calibrate->add_option("--out", cal_out, "Output directory for calibration.json");

    // run
    auto* run = app.add_subcommand("run", "Run the search or the random baseline");
    RunOptions opt;
    run->add_option("--variant", opt.variant, "flip|noise|sa|mcd|ground-truth|random")
        ->check(CLI::IsMember({"flip", "noise", "sa", "mcd", "ground-truth", "random"}))
        ->capture_default_str();
    run->add_option("--reps", opt.reps, "Repetitions")->check(CLI::PositiveNumber)
        ->capture_default_str();
    run->add_option("--pop", opt.pop, "Population size")->capture_default_str();
    run->add_option("--gens", opt.gens, "Generations")->capture_default_str();
    run->add_option("--mut-prob", opt.mut_prob, "Mutation probability")->capture_default_str();
    run->add_option("--cross-prob", opt.cross_prob, "Crossover probability")
        ->capture_default_str();
    run->add_option("--t-similarity", opt.t_similarity, "Similarity/archive threshold T")
        ->capture_default_str();
    run->add_option("--noise-var", opt.noise_var, "Gaussian noise variance")
        ->capture_default_str();
    run->add_option("--mcd-passes", opt.mcd_passes, "Monte Carlo dropout passes")
        ->capture_default_str();
    run->add_option("--sky-threshold", opt.sky_threshold, "Sky-proportion relevance gate")
        ->capture_default_str();
    run->add_option("--transform", opt.transform, "identity|style-perturb")
        ->check(CLI::IsMember({"identity", "style-perturb"}))->capture_default_str();
    run->add_option("--model", opt.model, "builtin|adapter:<command>")->capture_default_str();
    run->add_option("--seed", opt.seed, "Master seed")->capture_default_str();
    run->add_option("--out", opt.out, "Output directory (ORBIT_OUT overrides)");
    run->add_flag("--no-archive", opt.no_archive,
                  "Random baseline: keep every relevant image instead of applying the "
                  "archive policy");

    // compare
    auto* compare = app.add_subcommand("compare", "Compare a metric column of two tables");
    std::string cmp_a, cmp_b, cmp_column = "raw_metric";
    bool cmp_paired = false;
    compare->add_option("--a", cmp_a, "First table (csv or json)")->required();
    compare->add_option("--b", cmp_b, "Second table (csv or json)")->required();
    compare->add_option("--column", cmp_column, "Metric column")->capture_default_str();
    compare->add_flag("--paired", cmp_paired, "Paired comparison (per-rep Wilcoxon)");

    // audit
    auto* audit = app.add_subcommand("audit", "Replay a persisted run and verify its artifacts");
    std::string audit_dir;
    audit->add_option("--dir", audit_dir, "Cell directory (contains meta.json)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" ||
            e.get_name() == "CallForVersion") {
            return app.exit(e);
        }
        std::cerr << e.what() << "\n";
        return 1;
    }

    try {
        if (calibrate->parsed()) {
            const double t = fitness::calibrate_threshold(cal_n, cal_seed);
            json j{{"n", cal_n}, {"seed", cal_seed}, {"threshold", t}};
            std::cout << j.dump() << "\n";
            const std::string out_dir = effective_out(cal_out);
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                std::ofstream f(fs::path(out_dir) / "calibration.json");
                f << j.dump(2) << "\n";
                if (!f) throw std::runtime_error("cannot write calibration.json");
            }
            return 0;
        }
        if (run->parsed()) return do_run(opt);
        if (compare->parsed()) {
            const auto result = harness::compare_runs(read_table_any(cmp_a),
                                                      read_table_any(cmp_b), cmp_column,
                                                      cmp_paired);
            std::cout << harness::comparison_to_json(result) << "\n";
            return 0;
        }
        if (audit->parsed()) return do_audit(audit_dir);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
