#include "orbit/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "orbit/pgm.hpp"
#include "orbit/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace orbit::harness {

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw std::invalid_argument("not a number: '" + s + "'");
    }
    return v;
}

std::string genome_to_string(const sim::Genome& g) {
    std::string out;
    for (size_t i = 0; i < g.genes.size(); ++i) {
        if (i > 0) out.push_back(';');
        out += format_double(g.genes[i]);
    }
    out.push_back('@');
    out += std::to_string(g.seed);
    return out;
}

sim::Genome genome_from_string(const std::string& s) {
    const size_t at = s.rfind('@');
    if (at == std::string::npos) throw std::invalid_argument("genome string missing seed");
    sim::Genome g;
    g.seed = std::stoull(s.substr(at + 1));
    std::stringstream genes(s.substr(0, at));
    std::string item;
    while (std::getline(genes, item, ';')) g.genes.push_back(parse_double(item));
    return g;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json genome_to_json(const sim::Genome& g) {
    return json{{"genes", g.genes}, {"seed", g.seed}};
}

sim::Genome genome_from_json(const json& j) {
    sim::Genome g;
    g.genes = j.at("genes").get<std::vector<double>>();
    g.seed = j.at("seed").get<uint64_t>();
    return g;
}

search::ArchiveEvent::Action parse_action(const std::string& name) {
    using Action = search::ArchiveEvent::Action;
    if (name == "appended") return Action::kAppended;
    if (name == "replaced") return Action::kReplaced;
    if (name == "discarded") return Action::kDiscarded;
    if (name == "skipped_gated") return Action::kSkippedGated;
    throw std::invalid_argument("unknown archive action: " + name);
}

}  // namespace

int Table::column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) return static_cast<int>(i);
    }
    return -1;
}

std::vector<double> Table::numeric_column(const std::string& name) const {
    const int idx = column_index(name);
    if (idx < 0) throw std::invalid_argument("table has no column '" + name + "'");
    std::vector<double> values;
    values.reserve(rows.size());
    for (const auto& row : rows) {
        const std::string& cell = row.at(idx);
        if (cell.empty()) continue;
        values.push_back(parse_double(cell));
    }
    return values;
}

void ExperimentPlan::validate() const {
    if (variants.empty()) throw std::invalid_argument("experiment plan has no variants");
    if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    std::set<std::string> ids;
    for (const auto& cfg : variants) {
        cfg.validate();
        if (!ids.insert(fitness::variant_name(cfg.variant)).second) {
            throw std::invalid_argument("duplicate variant in experiment plan");
        }
    }
    settings.validate();
    if (corpus_size < 1) throw std::invalid_argument("corpus size must be >= 1");
}

uint64_t cell_seed(uint64_t master_seed, const std::string& variant_id, int rep) {
    uint64_t h = fnv1a64(variant_id);
    h = fnv1a64(std::to_string(rep), h);
    return master_seed ^ mix64(h);
}

std::vector<double> archive_diversity(const std::vector<metrics::FeatureVector>& features) {
    if (features.size() < 2) {
        throw std::invalid_argument("archive_diversity: need at least 2 entries");
    }
    std::vector<double> out(features.size(), std::numeric_limits<double>::infinity());
    for (size_t i = 0; i < features.size(); ++i) {
        for (size_t j = 0; j < features.size(); ++j) {
            if (i == j) continue;
            out[i] = std::min(out[i], metrics::feature_distance(features[i], features[j]));
        }
    }
    return out;
}

std::vector<double> archive_diversity(const search::Archive& archive) {
    return archive_diversity(archive.feature_snapshot());
}

Table build_image_table(const CellResult& cell, const model::Model& m) {
    Table table;
    table.columns = {"variant",        "rep",        "slot",
                     "generation",     "genome",     "raw_metric",
                     "gated_accuracy", "ground_truth_miou", "nn_feature_distance"};
    const auto& entries = cell.search.archive.entries();
    std::vector<double> nn;
    if (entries.size() >= 2) nn = archive_diversity(cell.search.archive);
    for (size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        // Ground truth enters here only, after the search has finished: the
        // simulator mask scores the archived prediction for evaluation.
        const auto scene =
            sim::render_scene(sim::genome_to_scene(e.genome), e.genome.seed, m.height(), m.width());
        const double gt_miou =
            metrics::miou(m.predict(e.image).labels, scene.mask, m.num_classes());
        table.rows.push_back({cell.variant, std::to_string(cell.rep), std::to_string(i),
                              std::to_string(e.generation), genome_to_string(e.genome),
                              format_double(e.raw_metric), format_double(e.f_accuracy),
                              format_double(gt_miou),
                              entries.size() >= 2 ? format_double(nn[i]) : std::string()});
    }
    return table;
}

Table concat_tables(const std::vector<Table>& tables) {
    Table out;
    for (const auto& t : tables) {
        if (out.columns.empty()) {
            out.columns = t.columns;
        } else if (out.columns != t.columns) {
            throw std::invalid_argument("concat_tables: column mismatch");
        }
        out.rows.insert(out.rows.end(), t.rows.begin(), t.rows.end());
    }
    return out;
}

stats::ComparisonResult compare_runs(const Table& a, const Table& b,
                                     const std::string& metric_column, bool paired) {
    stats::ComparisonResult result;
    result.paired = paired;
    if (!paired) {
        const auto x = a.numeric_column(metric_column);
        const auto y = b.numeric_column(metric_column);
        const auto mwu = stats::mann_whitney_u(x, y);
        result.statistic = mwu.u;
        result.p_value = mwu.p_two_sided;
        result.effect = stats::vargha_delaney_a12(x, y);
        result.effect_class = stats::classify_a12(result.effect);
        result.n_x = static_cast<int>(x.size());
        result.n_y = static_cast<int>(y.size());
        return result;
    }

    // Paired: aggregate the column per repetition and pair reps across tables.
    auto per_rep = [&](const Table& t) {
        const int rep_idx = t.column_index("rep");
        const int col_idx = t.column_index(metric_column);
        if (rep_idx < 0 || col_idx < 0) {
            throw std::invalid_argument("paired comparison needs 'rep' and metric columns");
        }
        std::map<int, std::pair<double, int>> acc;
        for (const auto& row : t.rows) {
            const std::string& cell = row.at(col_idx);
            if (cell.empty()) continue;
            auto& [sum, count] = acc[static_cast<int>(parse_double(row.at(rep_idx)))];
            sum += parse_double(cell);
            ++count;
        }
        std::map<int, double> means;
        for (const auto& [rep, sc] : acc) means[rep] = sc.first / sc.second;
        return means;
    };
    const auto means_a = per_rep(a);
    const auto means_b = per_rep(b);
    if (means_a.size() != means_b.size()) {
        throw std::invalid_argument("paired comparison: repetition sets differ");
    }
    std::vector<double> diffs;
    for (const auto& [rep, ma] : means_a) {
        const auto it = means_b.find(rep);
        if (it == means_b.end()) {
            throw std::invalid_argument("paired comparison: repetition sets differ");
        }
        diffs.push_back(ma - it->second);
    }
    result.n_x = static_cast<int>(diffs.size());
    result.n_y = result.n_x;
    const bool any_signal = std::any_of(diffs.begin(), diffs.end(),
                                        [](double d) { return d != 0.0; });
    if (!any_signal) {
        result.statistic = 0.0;
        result.p_value = 1.0;
        result.effect = 0.5;
        result.effect_class = stats::EffectClass::kNegligible;
        return result;
    }
    const auto wil = stats::wilcoxon_signed_rank(diffs);
    result.statistic = wil.r_plus;
    result.p_value = wil.p_two_sided;
    result.r_plus = wil.r_plus;
    result.r_minus = wil.r_minus;
    result.effect = stats::e_hat(wil.r_plus, wil.r_minus);
    result.effect_class = stats::classify_a12(result.effect);
    return result;
}

void write_table_csv(const Table& table, const std::string& path) {
    std::string out;
    auto append_row = [&](const std::vector<std::string>& row) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (row[i].find_first_of(",\n") != std::string::npos) {
                throw std::invalid_argument("csv cell contains a separator: " + row[i]);
            }
            if (i > 0) out.push_back(',');
            out += row[i];
        }
        out.push_back('\n');
    };
    append_row(table.columns);
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size()) {
            throw std::invalid_argument("csv row width differs from header");
        }
        append_row(row);
    }
    write_text_file(path, out);
}

Table read_table_csv(const std::string& path) {
    const std::string content = read_text_file(path);
    Table table;
    std::stringstream lines(content);
    std::string line;
    bool header = true;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream cols(line);
        std::string cell;
        while (std::getline(cols, cell, ',')) cells.push_back(cell);
        // getline drops a trailing empty field; restore it.
        if (!line.empty() && line.back() == ',') cells.push_back("");
        if (header) {
            table.columns = std::move(cells);
            header = false;
        } else {
            if (cells.size() != table.columns.size()) {
                throw std::runtime_error("csv row width differs from header: " + path);
            }
            table.rows.push_back(std::move(cells));
        }
    }
    if (table.columns.empty()) throw std::runtime_error("csv has no header row: " + path);
    return table;
}

void write_table_json(const Table& table, const std::string& path) {
    json j;
    j["schema_version"] = 1;
    j["columns"] = table.columns;
    j["rows"] = table.rows;
    write_text_file(path, j.dump() + "\n");
}

Table read_table_json(const std::string& path) {
    const json j = json::parse(read_text_file(path));
    if (j.at("schema_version").get<int>() != 1) {
        throw std::runtime_error("unsupported table schema version in " + path);
    }
    Table table;
    table.columns = j.at("columns").get<std::vector<std::string>>();
    table.rows = j.at("rows").get<std::vector<std::vector<std::string>>>();
    return table;
}

std::string comparison_to_json(const stats::ComparisonResult& result) {
    json j;
    j["statistic"] = result.statistic;
    j["p_value"] = result.p_value;
    j["effect"] = result.effect;
    j["effect_class"] = stats::effect_class_name(result.effect_class);
    j["n_x"] = result.n_x;
    j["n_y"] = result.n_y;
    j["paired"] = result.paired;
    if (result.paired) {
        j["r_plus"] = result.r_plus;
        j["r_minus"] = result.r_minus;
    }
    return j.dump();
}

void write_run_log(const std::vector<search::LogRecord>& log, const std::string& path) {
    std::string out;
    for (const auto& rec : log) {
        json j;
        j["generation"] = rec.generation;
        j["individual"] = rec.individual;
        j["genome"] = genome_to_json(rec.genome);
        j["f_accuracy_raw"] = rec.f_accuracy_raw;
        j["f_accuracy_gated"] = rec.f_accuracy_gated;
        j["f_similarity"] = rec.f_similarity;
        j["archive_event"] = {{"action", search::archive_action_name(rec.archive_event.action)},
                              {"index", rec.archive_event.index},
                              {"distance", rec.archive_event.distance}};
        out += j.dump();
        out.push_back('\n');
    }
    write_text_file(path, out);
}

std::vector<search::LogRecord> read_run_log(const std::string& path) {
    const std::string content = read_text_file(path);
    std::vector<search::LogRecord> log;
    std::stringstream lines(content);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        search::LogRecord rec;
        rec.generation = j.at("generation").get<int>();
        rec.individual = j.at("individual").get<int>();
        rec.genome = genome_from_json(j.at("genome"));
        rec.f_accuracy_raw = j.at("f_accuracy_raw").get<double>();
        rec.f_accuracy_gated = j.at("f_accuracy_gated").get<double>();
        rec.f_similarity = j.at("f_similarity").get<double>();
        const auto& ev = j.at("archive_event");
        rec.archive_event.action = parse_action(ev.at("action").get<std::string>());
        rec.archive_event.index = ev.at("index").get<int>();
        rec.archive_event.distance = ev.at("distance").get<double>();
        log.push_back(std::move(rec));
    }
    return log;
}

void write_cell_meta(const CellMeta& meta, const std::string& path) {
    json j;
    j["schema_version"] = 1;
    j["variant"] = meta.variant;
    j["rep"] = meta.rep;
    j["seed"] = meta.seed;
    j["settings"] = {{"population_size", meta.settings.population_size},
                     {"generations", meta.settings.generations},
                     {"mutation_probability", meta.settings.mutation_probability},
                     {"crossover_probability", meta.settings.crossover_probability},
                     {"sbx_eta", meta.settings.sbx_eta},
                     {"mutation_eta", meta.settings.mutation_eta}};
    j["transform"] = sim::transform_id_name(meta.transform);
    j["fitness"] = {{"variant", fitness::variant_name(meta.fitness_config.variant)},
                    {"sky_threshold", meta.fitness_config.sky_threshold},
                    {"noise_variance", meta.fitness_config.noise_variance},
                    {"mcd_passes", meta.fitness_config.mcd_passes},
                    {"similarity_threshold", meta.fitness_config.similarity_threshold},
                    {"relevance_source",
                     meta.fitness_config.relevance_source == fitness::RelevanceSource::kGroundTruth
                         ? "ground_truth"
                         : "prediction"}};
    j["model"] = meta.model_desc;
    j["corpus_size"] = meta.corpus_size;
    j["corpus_seed"] = meta.corpus_seed;
    j["baseline"] = meta.baseline;
    j["baseline_images"] = meta.baseline_images;
    j["baseline_archive_policy"] = meta.baseline_archive_policy;
    write_text_file(path, j.dump(2) + "\n");
}

CellMeta read_cell_meta(const std::string& path) {
    const json j = json::parse(read_text_file(path));
    if (j.at("schema_version").get<int>() != 1) {
        throw std::runtime_error("unsupported meta schema version in " + path);
    }
    CellMeta meta;
    meta.variant = j.at("variant").get<std::string>();
    meta.rep = j.at("rep").get<int>();
    meta.seed = j.at("seed").get<uint64_t>();
    const auto& s = j.at("settings");
    meta.settings.population_size = s.at("population_size").get<int>();
    meta.settings.generations = s.at("generations").get<int>();
    meta.settings.mutation_probability = s.at("mutation_probability").get<double>();
    meta.settings.crossover_probability = s.at("crossover_probability").get<double>();
    meta.settings.sbx_eta = s.at("sbx_eta").get<double>();
    meta.settings.mutation_eta = s.at("mutation_eta").get<double>();
    meta.settings.master_seed = meta.seed;
    meta.transform = sim::parse_transform_id(j.at("transform").get<std::string>());
    const auto& f = j.at("fitness");
    meta.fitness_config.variant = fitness::parse_variant(f.at("variant").get<std::string>());
    meta.fitness_config.sky_threshold = f.at("sky_threshold").get<double>();
    meta.fitness_config.noise_variance = f.at("noise_variance").get<double>();
    meta.fitness_config.mcd_passes = f.at("mcd_passes").get<int>();
    meta.fitness_config.similarity_threshold = f.at("similarity_threshold").get<double>();
    meta.fitness_config.relevance_source =
        f.at("relevance_source").get<std::string>() == "ground_truth"
            ? fitness::RelevanceSource::kGroundTruth
            : fitness::RelevanceSource::kPrediction;
    meta.model_desc = j.at("model").get<std::string>();
    meta.corpus_size = j.at("corpus_size").get<int>();
    meta.corpus_seed = j.at("corpus_seed").get<uint64_t>();
    meta.baseline = j.at("baseline").get<bool>();
    meta.baseline_images = j.at("baseline_images").get<int>();
    meta.baseline_archive_policy = j.at("baseline_archive_policy").get<bool>();
    return meta;
}

uint64_t hash_file(const std::string& path) {
    const std::string content = read_text_file(path);
    return fnv1a64(content.data(), content.size());
}

RunArtifacts persist_cell(const CellResult& cell, const model::Model& m, const CellMeta& meta,
                          const std::string& out_root) {
    RunArtifacts artifacts;
    const fs::path dir = fs::path(out_root) / cell.variant / ("rep" + std::to_string(cell.rep));
    fs::create_directories(dir / "archive");
    artifacts.dir = dir.string();

    auto relative = [&](const fs::path& p) { return fs::relative(p, dir).string(); };

    const auto& entries = cell.search.archive.entries();
    for (size_t i = 0; i < entries.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%03zu.pgm", i);
        const fs::path img_path = dir / "archive" / name;
        write_image_pgm(img_path, entries[i].image);
        artifacts.files.push_back(relative(img_path));

        std::snprintf(name, sizeof(name), "mask_%03zu.pgm", i);
        const fs::path mask_path = dir / "archive" / name;
        const auto scene = sim::render_scene(sim::genome_to_scene(entries[i].genome),
                                             entries[i].genome.seed, m.height(), m.width());
        write_mask_pgm(mask_path, scene.mask);
        artifacts.files.push_back(relative(mask_path));
    }

    const fs::path log_path = dir / "run_log.ndjson";
    write_run_log(cell.search.log, log_path.string());
    artifacts.files.push_back(relative(log_path));

    const fs::path table_path = dir / "images.csv";
    write_table_csv(build_image_table(cell, m), table_path.string());
    artifacts.files.push_back(relative(table_path));

    const fs::path meta_path = dir / "meta.json";
    write_cell_meta(meta, meta_path.string());
    artifacts.files.push_back(relative(meta_path));

    std::sort(artifacts.files.begin(), artifacts.files.end());
    json manifest;
    manifest["schema_version"] = 1;
    manifest["files"] = json::array();
    for (const auto& rel : artifacts.files) {
        char hex[32];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(hash_file((dir / rel).string())));
        manifest["files"].push_back({{"path", rel}, {"fnv1a64", hex}});
    }
    write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
    return artifacts;
}

namespace {

// The baseline shares the search's seed derivations so replay tooling treats
// both uniformly.
sim::Genome random_genome(uint64_t seed, uint64_t scenario_seed, int index) {
    Rng rng(derive_seed(seed, "baseline-genes", static_cast<uint64_t>(index)));
    sim::Genome g;
    g.genes.resize(sim::kSceneGenomeLength);
    for (double& v : g.genes) v = rng.uniform();
    g.seed = scenario_seed;
    return g;
}

}  // namespace

CellResult run_random_baseline(const search::SearchSettings& settings,
                               const fitness::Evaluator& evaluator, int n_images, uint64_t seed,
                               bool apply_archive_policy) {
    if (n_images < 1) throw std::invalid_argument("baseline needs at least 1 image");
    const uint64_t scenario_seed = derive_seed(seed, "scenario");
    const uint64_t run_seed = derive_seed(seed, "run");
    // Without the policy every non-gated image is kept: a threshold below any
    // realistic feature distance makes the append branch always taken.
    const double threshold = apply_archive_policy ? evaluator.config().similarity_threshold
                                                  : std::numeric_limits<double>::min();
    CellResult cell;
    cell.variant = "random";
    cell.rep = 1;
    cell.search.archive = search::Archive(threshold);
    const int pop = settings.population_size;
    for (int i = 0; i < n_images; ++i) {
        const auto genome = random_genome(seed, scenario_seed, i);
        const auto inputs = evaluator.prepare(genome, run_seed);
        const auto snapshot = cell.search.archive.feature_snapshot();
        const auto objectives = evaluator.evaluate(inputs, snapshot, run_seed);
        ++cell.search.evaluations;

        search::LogRecord rec;
        rec.generation = i / pop + 1;
        rec.individual = i % pop;
        rec.genome = genome;
        rec.f_accuracy_raw = objectives.raw_metric;
        rec.f_accuracy_gated = objectives.f_accuracy;
        rec.f_similarity = objectives.f_similarity;
        if (objectives.gated) {
            rec.archive_event.action = search::ArchiveEvent::Action::kSkippedGated;
        } else {
            search::ArchiveEntry entry;
            entry.genome = genome;
            entry.image = inputs.image;
            entry.features = metrics::extract_features(inputs.image);
            entry.f_accuracy = objectives.f_accuracy;
            entry.raw_metric = objectives.raw_metric;
            entry.generation = rec.generation;
            rec.archive_event = cell.search.archive.update(std::move(entry));
        }
        cell.search.log.push_back(std::move(rec));
    }
    return cell;
}

std::vector<CellResult> run_experiment(const ExperimentPlan& plan, const model::Model& m) {
    plan.validate();
    const bool persist = !plan.output_dir.empty();
    if (persist) {
        std::error_code ec;
        fs::create_directories(plan.output_dir, ec);
        const fs::path probe = fs::path(plan.output_dir) / ".write_probe";
        std::ofstream test(probe);
        if (ec || !test) {
            throw std::runtime_error("output directory is not writable: " + plan.output_dir);
        }
        test.close();
        fs::remove(probe);
    }

    std::vector<model::ActivationVector> corpus;
    const bool needs_corpus =
        std::any_of(plan.variants.begin(), plan.variants.end(), [](const auto& cfg) {
            return cfg.variant == fitness::Variant::kSa;
        });
    if (needs_corpus) corpus = model::build_activation_corpus(m, plan.corpus_size, plan.corpus_seed);

    std::vector<CellResult> cells;
    std::vector<Table> tables;
    for (const auto& cfg : plan.variants) {
        const std::string id = fitness::variant_name(cfg.variant);
        const fitness::Evaluator evaluator(
            cfg, m, plan.transform,
            cfg.variant == fitness::Variant::kSa ? corpus
                                                 : std::vector<model::ActivationVector>{});
        for (int rep = 1; rep <= plan.repetitions; ++rep) {
            search::SearchSettings settings = plan.settings;
            settings.master_seed = cell_seed(plan.master_seed, id, rep);

            CellResult cell;
            cell.variant = id;
            cell.rep = rep;
            cell.search = search::run_search(settings, evaluator);

            if (persist) {
                CellMeta meta;
                meta.variant = id;
                meta.rep = rep;
                meta.seed = settings.master_seed;
                meta.settings = settings;
                meta.transform = plan.transform;
                meta.fitness_config = cfg;
                meta.model_desc = plan.model_desc;
                meta.corpus_size = plan.corpus_size;
                meta.corpus_seed = plan.corpus_seed;
                cell.dir = persist_cell(cell, m, meta, plan.output_dir).dir;
            }
            tables.push_back(build_image_table(cell, m));
            cells.push_back(std::move(cell));
        }
    }

    if (persist) {
        const Table report = concat_tables(tables);
        write_table_csv(report, (fs::path(plan.output_dir) / "report.csv").string());
        write_table_json(report, (fs::path(plan.output_dir) / "report.json").string());
    }
    return cells;
}

search::Archive rebuild_archive_from_log(const std::vector<search::LogRecord>& log,
                                         const fitness::Evaluator& evaluator,
                                         uint64_t master_seed, double threshold) {
    const uint64_t run_seed = derive_seed(master_seed, "run");
    search::Archive archive(threshold);
    for (const auto& rec : log) {
        if (rec.archive_event.action == search::ArchiveEvent::Action::kSkippedGated) continue;
        const auto inputs = evaluator.prepare(rec.genome, run_seed);
        search::ArchiveEntry entry;
        entry.genome = rec.genome;
        entry.image = inputs.image;
        entry.features = metrics::extract_features(inputs.image);
        entry.f_accuracy = rec.f_accuracy_gated;
        entry.raw_metric = rec.f_accuracy_raw;
        entry.generation = rec.generation;
        archive.update(std::move(entry));
    }
    return archive;
}

AuditReport replay_audit(const std::vector<search::LogRecord>& log,
                         const fitness::Evaluator& evaluator, uint64_t master_seed) {
    const uint64_t run_seed = derive_seed(master_seed, "run");
    const double threshold = evaluator.config().similarity_threshold;
    AuditReport report;

    struct ShadowEntry {
        metrics::FeatureVector features;
        double f_accuracy;
    };
    std::vector<ShadowEntry> shadow;

    auto fail = [&](int index, const std::string& why) {
        report.ok = false;
        report.message = "record " + std::to_string(index) + ": " + why;
    };

    for (size_t i = 0; i < log.size() && report.ok; ++i) {
        const auto& rec = log[i];
        ++report.records;
        using Action = search::ArchiveEvent::Action;
        const auto inputs = evaluator.prepare(rec.genome, run_seed);
        // Recompute the accuracy objective from scratch (evaluation is
        // deterministic, so the logged values must match exactly). The empty
        // archive snapshot only affects f_similarity, which is not audited:
        // it depends on generation state rather than the candidate alone.
        const auto recomputed = evaluator.evaluate(inputs, {}, run_seed);
        if (recomputed.raw_metric != rec.f_accuracy_raw ||
            recomputed.f_accuracy != rec.f_accuracy_gated) {
            fail(static_cast<int>(i), "logged metric differs from recomputation");
            continue;
        }
        if (rec.archive_event.action == Action::kSkippedGated) {
            ++report.skipped_gated;
            if (rec.f_accuracy_gated < 2.0) {
                fail(static_cast<int>(i), "non-gated individual skipped as gated");
            }
            continue;
        }
        if (rec.f_accuracy_gated >= 2.0) {
            fail(static_cast<int>(i), "gated candidate reached the archive");
            continue;
        }
        const auto features = metrics::extract_features(inputs.image);

        double min_dist = std::numeric_limits<double>::infinity();
        int closest = -1;
        for (size_t k = 0; k < shadow.size(); ++k) {
            const double d = metrics::feature_distance(features, shadow[k].features);
            if (d < min_dist) {
                min_dist = d;
                closest = static_cast<int>(k);
            }
        }

        switch (rec.archive_event.action) {
            case Action::kAppended:
                ++report.appends;
                if (!shadow.empty() && min_dist <= threshold) {
                    fail(static_cast<int>(i), "append with min-distance <= threshold");
                    break;
                }
                if (rec.archive_event.index != static_cast<int>(shadow.size())) {
                    fail(static_cast<int>(i), "append index differs from replay");
                    break;
                }
                shadow.push_back({features, rec.f_accuracy_gated});
                break;
            case Action::kReplaced: {
                ++report.replacements;
                if (shadow.empty() || min_dist > threshold) {
                    fail(static_cast<int>(i), "replacement without a within-threshold neighbor");
                    break;
                }
                if (rec.archive_event.index != closest) {
                    fail(static_cast<int>(i), "replacement slot differs from replay");
                    break;
                }
                if (rec.f_accuracy_gated >= shadow[closest].f_accuracy) {
                    fail(static_cast<int>(i), "replacement did not lower the slot's f_accuracy");
                    break;
                }
                shadow[closest] = {features, rec.f_accuracy_gated};
                break;
            }
            case Action::kDiscarded:
                ++report.discards;
                if (shadow.empty() || min_dist > threshold) {
                    fail(static_cast<int>(i), "discard that should have been an append");
                    break;
                }
                if (rec.f_accuracy_gated < shadow[closest].f_accuracy) {
                    fail(static_cast<int>(i), "discard that should have been a replacement");
                    break;
                }
                break;
            case Action::kSkippedGated:
                break;  // handled above
        }
    }
    return report;
}

}  // namespace orbit::harness
