#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "orbit/fitness.hpp"
#include "orbit/model.hpp"
#include "orbit/scene_sim.hpp"
#include "orbit/search.hpp"
#include "orbit/stats.hpp"

namespace orbit::harness {

// Rectangular string table with a header row; the exchange format between
// runs, reports, and the compare command. Cells never contain commas.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    int column_index(const std::string& name) const;  // -1 when absent
    // Numeric values of a column; empty cells are skipped.
    std::vector<double> numeric_column(const std::string& name) const;
};

struct ExperimentPlan {
    std::vector<fitness::FitnessConfig> variants;
    int repetitions = 10;
    search::SearchSettings settings;  // master_seed is ignored; cells derive their own
    sim::TransformId transform = sim::TransformId::kIdentity;
    uint64_t master_seed = 0;
    std::string output_dir;  // empty: keep results in memory only
    int corpus_size = 200;   // training-activation corpus for the sa variant
    uint64_t corpus_seed = 2025;
    std::string model_desc = "builtin";  // recorded in cell metadata

    void validate() const;
};

struct CellResult {
    std::string variant;
    int rep = 0;
    search::SearchResult search;
    std::string dir;  // persisted location; empty when not persisted
};

struct RunArtifacts {
    std::string dir;
    std::vector<std::string> files;  // relative paths listed in the manifest
};

// Stable per-cell seed: master_seed XOR a hash of (variant id, repetition),
// so adding a variant never perturbs the other cells' streams.
uint64_t cell_seed(uint64_t master_seed, const std::string& variant_id, int rep);

// Runs every (variant, repetition) cell, persisting artifacts when the plan
// has an output directory. Unwritable output fails before any run.
std::vector<CellResult> run_experiment(const ExperimentPlan& plan, const model::Model& m);

// Budget-parity random baseline: n_images uniform random genomes evaluated
// with the given evaluator; the archive policy is applied identically unless
// apply_archive_policy is false (then every non-gated image is kept).
CellResult run_random_baseline(const search::SearchSettings& settings,
                               const fitness::Evaluator& evaluator, int n_images, uint64_t seed,
                               bool apply_archive_policy = true);

// Per-entry distance to the nearest other entry.
std::vector<double> archive_diversity(const std::vector<metrics::FeatureVector>& features);
std::vector<double> archive_diversity(const search::Archive& archive);

// Per-image table over a cell's archive. ground_truth_miou is recomputed
// from the simulator mask for evaluation only; it never feeds the search.
Table build_image_table(const CellResult& cell, const model::Model& m);

// Concatenation with identical columns required; deterministic row order is
// the cells' order.
Table concat_tables(const std::vector<Table>& tables);

// Unpaired: Mann-Whitney U + A12 over all rows of the column. Paired: rows
// are aggregated per rep (mean), reps aligned across tables, Wilcoxon + E-hat
// on the per-rep differences.
stats::ComparisonResult compare_runs(const Table& a, const Table& b,
                                     const std::string& metric_column, bool paired);

// Reports: CSV with a header row, or versioned-schema JSON; both byte-stable.
void write_table_csv(const Table& table, const std::string& path);
Table read_table_csv(const std::string& path);
void write_table_json(const Table& table, const std::string& path);
Table read_table_json(const std::string& path);

std::string comparison_to_json(const stats::ComparisonResult& result);

// Newline-delimited JSON run log.
void write_run_log(const std::vector<search::LogRecord>& log, const std::string& path);
std::vector<search::LogRecord> read_run_log(const std::string& path);

// Everything needed to rebuild a cell's evaluator for replay.
struct CellMeta {
    std::string variant;
    int rep = 0;
    uint64_t seed = 0;  // the cell's master seed
    search::SearchSettings settings;
    sim::TransformId transform = sim::TransformId::kIdentity;
    fitness::FitnessConfig fitness_config;
    std::string model_desc;  // "builtin" or "adapter:<command>"
    int corpus_size = 200;
    uint64_t corpus_seed = 2025;
    bool baseline = false;
    int baseline_images = 0;
    bool baseline_archive_policy = true;
};

void write_cell_meta(const CellMeta& meta, const std::string& path);
CellMeta read_cell_meta(const std::string& path);

// Persists archive images/masks, run log, per-image table, meta, and a
// manifest with a content hash per file.
RunArtifacts persist_cell(const CellResult& cell, const model::Model& m, const CellMeta& meta,
                          const std::string& out_root);

struct AuditReport {
    bool ok = true;
    int records = 0;
    int appends = 0;
    int replacements = 0;
    int discards = 0;
    int skipped_gated = 0;
    std::string message;  // first violation, empty when ok
};

// Replays a run log through a fresh archive, recomputing features from the
// genomes, and checks the archive invariants plus event-log fidelity:
// appends farther than T (or into an empty archive), replacements strictly
// lowering the slot's f_accuracy, gated candidates never archived.
AuditReport replay_audit(const std::vector<search::LogRecord>& log,
                         const fitness::Evaluator& evaluator, uint64_t master_seed);

// Reconstructs the archive a log describes by re-rendering every non-gated
// candidate and re-applying the insert policy with the given threshold.
search::Archive rebuild_archive_from_log(const std::vector<search::LogRecord>& log,
                                         const fitness::Evaluator& evaluator,
                                         uint64_t master_seed, double threshold);

uint64_t hash_file(const std::string& path);

}  // namespace orbit::harness
