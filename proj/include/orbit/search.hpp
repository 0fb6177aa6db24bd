#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "orbit/fitness.hpp"
#include "orbit/grid.hpp"
#include "orbit/metrics.hpp"
#include "orbit/rng.hpp"
#include "orbit/scene_sim.hpp"

namespace orbit::search {

struct Individual {
    sim::Genome genome;
    fitness::ObjectivePair objectives;
    int rank = 0;
    double crowding = 0.0;
};

struct ArchiveEntry {
    sim::Genome genome;
    Image image;
    metrics::FeatureVector features;
    double f_accuracy = 0.0;  // gated value at insertion; always < 2
    double raw_metric = 0.0;
    int generation = 0;
};

struct ArchiveEvent {
    enum class Action { kAppended, kReplaced, kDiscarded, kSkippedGated };
    Action action = Action::kDiscarded;
    int index = -1;        // slot appended/replaced, or nearest slot on discard
    double distance = -1;  // min feature distance at decision time (-1: empty archive)
};

const char* archive_action_name(ArchiveEvent::Action action);

class Archive {
  public:
    Archive() = default;  // placeholder threshold; real runs construct with T
    explicit Archive(double threshold);

    double threshold() const { return threshold_; }
    const std::vector<ArchiveEntry>& entries() const { return entries_; }

    // Insert policy: append when the candidate is farther than T from every
    // entry (or the archive is empty); otherwise replace the closest entry
    // iff the candidate's f_accuracy is strictly lower; otherwise discard.
    // Gated candidates (f_accuracy = 2) are a precondition violation.
    ArchiveEvent update(ArchiveEntry candidate);

    std::vector<metrics::FeatureVector> feature_snapshot() const;

  private:
    double threshold_ = 1.0;
    std::vector<ArchiveEntry> entries_;
};

struct SearchSettings {
    int population_size = 12;
    int generations = 100;
    double mutation_probability = 0.3;
    double crossover_probability = 0.7;
    double sbx_eta = 15.0;
    double mutation_eta = 20.0;
    uint64_t master_seed = 0;

    void validate() const;
};

// Fast non-dominated sort over minimized objective pairs. Front 0 holds the
// non-dominated individuals; fronts partition the population.
std::vector<std::vector<int>> fast_nondominated_sort(
    const std::vector<std::pair<double, double>>& objectives);

// Deb's crowding distance within one front: boundary solutions get +inf,
// interior ones the sum of normalized neighbor gaps per objective; an
// objective with zero range contributes nothing.
std::vector<double> crowding_distance(const std::vector<std::pair<double, double>>& front);

// Simulated binary crossover on [0,1] genes. With probability (1 - prob) the
// parents are copied unchanged. Draw order per invocation: crossover coin,
// then per gene: gene coin, spread draw, swap coin.
std::pair<sim::Genome, sim::Genome> sbx_crossover(const sim::Genome& a, const sim::Genome& b,
                                                  double eta_c, double prob, Rng& rng);
std::pair<sim::Genome, sim::Genome> sbx_crossover(const sim::Genome& a, const sim::Genome& b,
                                                  double eta_c, double prob, uint64_t seed);

// Deb's polynomial mutation on [0,1] genes; each gene mutates independently
// with probability prob. Draw order: per gene, mutation coin then one draw.
sim::Genome polynomial_mutation(const sim::Genome& genome, double eta_m, double prob, Rng& rng);
sim::Genome polynomial_mutation(const sim::Genome& genome, double eta_m, double prob,
                                uint64_t seed);

// (rank asc, crowding desc, index asc) — the deterministic NSGA-II ordering
// used for tournaments and environmental selection.
bool crowded_less(const Individual& a, int index_a, const Individual& b, int index_b);

struct LogRecord {
    int generation = 0;
    int individual = 0;
    sim::Genome genome;
    double f_accuracy_raw = 0.0;
    double f_accuracy_gated = 0.0;
    double f_similarity = 0.0;
    ArchiveEvent archive_event;
};

struct SearchResult {
    Archive archive;
    std::vector<LogRecord> log;
    std::vector<Individual> final_population;
    int evaluations = 0;
};

// Archive-extended NSGA-II. The initial population is generation 1, so the
// total evaluation budget is population_size * generations (generations 0
// degenerates to evaluating the initial population only). Within each
// generation, f_similarity is computed against the archive snapshot taken
// before any update, and archive updates are applied in individual order.
SearchResult run_search(const SearchSettings& settings, const fitness::Evaluator& evaluator);

}  // namespace orbit::search
