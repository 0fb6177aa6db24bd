#include "orbit/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace orbit::search {

const char* archive_action_name(ArchiveEvent::Action action) {
    switch (action) {
        case ArchiveEvent::Action::kAppended: return "appended";
        case ArchiveEvent::Action::kReplaced: return "replaced";
        case ArchiveEvent::Action::kDiscarded: return "discarded";
        case ArchiveEvent::Action::kSkippedGated: return "skipped_gated";
    }
    throw std::logic_error("unreachable archive action");
}

Archive::Archive(double threshold) : threshold_(threshold) {
    if (threshold <= 0.0) throw std::invalid_argument("archive threshold must be positive");
}

ArchiveEvent Archive::update(ArchiveEntry candidate) {
    if (candidate.f_accuracy >= 2.0) {
        throw std::invalid_argument("archive update: gated candidates are never archived");
    }
    ArchiveEvent event;
    if (entries_.empty()) {
        event.action = ArchiveEvent::Action::kAppended;
        event.index = 0;
        entries_.push_back(std::move(candidate));
        return event;
    }
    double min_dist = std::numeric_limits<double>::infinity();
    int closest = -1;
    for (size_t i = 0; i < entries_.size(); ++i) {
        const double d = metrics::feature_distance(candidate.features, entries_[i].features);
        if (d < min_dist) {
            min_dist = d;
            closest = static_cast<int>(i);
        }
    }
    event.distance = min_dist;
    if (min_dist > threshold_) {
        event.action = ArchiveEvent::Action::kAppended;
        event.index = static_cast<int>(entries_.size());
        entries_.push_back(std::move(candidate));
    } else if (candidate.f_accuracy < entries_[closest].f_accuracy) {
        event.action = ArchiveEvent::Action::kReplaced;
        event.index = closest;
        entries_[closest] = std::move(candidate);
    } else {
        event.action = ArchiveEvent::Action::kDiscarded;
        event.index = closest;
    }
    return event;
}

std::vector<metrics::FeatureVector> Archive::feature_snapshot() const {
    std::vector<metrics::FeatureVector> snapshot;
    snapshot.reserve(entries_.size());
    for (const auto& e : entries_) snapshot.push_back(e.features);
    return snapshot;
}

void SearchSettings::validate() const {
    if (population_size < 4 || population_size % 2 != 0) {
        throw std::invalid_argument("population size must be even and >= 4");
    }
    if (generations < 0) throw std::invalid_argument("generations must be non-negative");
    if (mutation_probability < 0.0 || mutation_probability > 1.0 ||
        crossover_probability < 0.0 || crossover_probability > 1.0) {
        throw std::invalid_argument("probabilities must be in [0,1]");
    }
    if (sbx_eta <= 0.0 || mutation_eta <= 0.0) {
        throw std::invalid_argument("distribution indices must be positive");
    }
}

std::vector<std::vector<int>> fast_nondominated_sort(
    const std::vector<std::pair<double, double>>& objectives) {
    const int n = static_cast<int>(objectives.size());
    auto dominates = [&](int p, int q) {
        const auto& [pa, pb] = objectives[p];
        const auto& [qa, qb] = objectives[q];
        return pa <= qa && pb <= qb && (pa < qa || pb < qb);
    };
    std::vector<std::vector<int>> dominated(n);
    std::vector<int> domination_count(n, 0);
    std::vector<std::vector<int>> fronts(1);
    for (int p = 0; p < n; ++p) {
        for (int q = 0; q < n; ++q) {
            if (p == q) continue;
            if (dominates(p, q)) {
                dominated[p].push_back(q);
            } else if (dominates(q, p)) {
                ++domination_count[p];
            }
        }
        if (domination_count[p] == 0) fronts[0].push_back(p);
    }
    int current = 0;
    while (!fronts[current].empty()) {
        std::vector<int> next;
        for (const int p : fronts[current]) {
            for (const int q : dominated[p]) {
                if (--domination_count[q] == 0) next.push_back(q);
            }
        }
        ++current;
        fronts.push_back(std::move(next));
    }
    fronts.pop_back();  // the loop always leaves one empty front at the end
    return fronts;
}

std::vector<double> crowding_distance(const std::vector<std::pair<double, double>>& front) {
    const int n = static_cast<int>(front.size());
    if (n == 0) throw std::invalid_argument("crowding distance of an empty front");
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> distance(n, 0.0);
    if (n <= 2) {
        std::fill(distance.begin(), distance.end(), kInf);
        return distance;
    }
    for (int obj = 0; obj < 2; ++obj) {
        auto value = [&](int i) { return obj == 0 ? front[i].first : front[i].second; };
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return value(a) < value(b); });
        const double range = value(order[n - 1]) - value(order[0]);
        if (range <= 0.0) continue;  // zero-range objective contributes nothing
        distance[order[0]] = kInf;
        distance[order[n - 1]] = kInf;
        for (int i = 1; i < n - 1; ++i) {
            if (distance[order[i]] == kInf) continue;
            distance[order[i]] += (value(order[i + 1]) - value(order[i - 1])) / range;
        }
    }
    return distance;
}

namespace {

constexpr double kSbxEps = 1e-14;

// One SBX child value; `low_side` selects the child biased toward y1.
double sbx_child(double y1, double y2, double rand, double eta_c, bool low_side) {
    const double beta = low_side ? 1.0 + 2.0 * y1 / (y2 - y1) : 1.0 + 2.0 * (1.0 - y2) / (y2 - y1);
    const double alpha = 2.0 - std::pow(beta, -(eta_c + 1.0));
    double betaq;
    if (rand <= 1.0 / alpha) {
        betaq = std::pow(rand * alpha, 1.0 / (eta_c + 1.0));
    } else {
        betaq = std::pow(1.0 / (2.0 - rand * alpha), 1.0 / (eta_c + 1.0));
    }
    const double c = low_side ? 0.5 * ((y1 + y2) - betaq * (y2 - y1))
                              : 0.5 * ((y1 + y2) + betaq * (y2 - y1));
    return std::clamp(c, 0.0, 1.0);
}

}  // namespace

std::pair<sim::Genome, sim::Genome> sbx_crossover(const sim::Genome& a, const sim::Genome& b,
                                                  double eta_c, double prob, Rng& rng) {
    if (a.genes.size() != b.genes.size()) {
        throw std::invalid_argument("sbx: genome lengths differ");
    }
    sim::Genome child_a = a;
    sim::Genome child_b = b;
    if (rng.uniform() > prob) return {child_a, child_b};
    for (size_t i = 0; i < a.genes.size(); ++i) {
        if (rng.uniform() > 0.5) continue;  // this gene is copied as-is
        const double ya = a.genes[i];
        const double yb = b.genes[i];
        if (std::abs(ya - yb) <= kSbxEps) continue;
        const double y1 = std::min(ya, yb);
        const double y2 = std::max(ya, yb);
        const double rand = rng.uniform();
        const double c1 = sbx_child(y1, y2, rand, eta_c, true);
        const double c2 = sbx_child(y1, y2, rand, eta_c, false);
        if (rng.uniform() <= 0.5) {
            child_a.genes[i] = c2;
            child_b.genes[i] = c1;
        } else {
            child_a.genes[i] = c1;
            child_b.genes[i] = c2;
        }
    }
    return {child_a, child_b};
}

std::pair<sim::Genome, sim::Genome> sbx_crossover(const sim::Genome& a, const sim::Genome& b,
                                                  double eta_c, double prob, uint64_t seed) {
    Rng rng(seed);
    return sbx_crossover(a, b, eta_c, prob, rng);
}

sim::Genome polynomial_mutation(const sim::Genome& genome, double eta_m, double prob, Rng& rng) {
    sim::Genome out = genome;
    const double mut_pow = 1.0 / (eta_m + 1.0);
    for (double& y : out.genes) {
        if (rng.uniform() > prob) continue;
        const double delta1 = y;        // (y - lower) / range with bounds [0,1]
        const double delta2 = 1.0 - y;  // (upper - y) / range
        const double rnd = rng.uniform();
        double deltaq;
        if (rnd <= 0.5) {
            const double xy = 1.0 - delta1;
            const double val = 2.0 * rnd + (1.0 - 2.0 * rnd) * std::pow(xy, eta_m + 1.0);
            deltaq = std::pow(val, mut_pow) - 1.0;
        } else {
            const double xy = 1.0 - delta2;
            const double val =
                2.0 * (1.0 - rnd) + 2.0 * (rnd - 0.5) * std::pow(xy, eta_m + 1.0);
            deltaq = 1.0 - std::pow(val, mut_pow);
        }
        y = std::clamp(y + deltaq, 0.0, 1.0);
    }
    return out;
}

sim::Genome polynomial_mutation(const sim::Genome& genome, double eta_m, double prob,
                                uint64_t seed) {
    Rng rng(seed);
    return polynomial_mutation(genome, eta_m, prob, rng);
}

bool crowded_less(const Individual& a, int index_a, const Individual& b, int index_b) {
    if (a.rank != b.rank) return a.rank < b.rank;
    if (a.crowding != b.crowding) return a.crowding > b.crowding;
    return index_a < index_b;
}

namespace {

// Assign rank and crowding to every individual from the full population.
void assign_rank_and_crowding(std::vector<Individual>& pop) {
    std::vector<std::pair<double, double>> objectives;
    objectives.reserve(pop.size());
    for (const auto& ind : pop) {
        objectives.emplace_back(ind.objectives.f_accuracy, ind.objectives.f_similarity);
    }
    const auto fronts = fast_nondominated_sort(objectives);
    for (size_t f = 0; f < fronts.size(); ++f) {
        std::vector<std::pair<double, double>> front_objs;
        front_objs.reserve(fronts[f].size());
        for (const int idx : fronts[f]) front_objs.push_back(objectives[idx]);
        const auto crowd = crowding_distance(front_objs);
        for (size_t i = 0; i < fronts[f].size(); ++i) {
            pop[fronts[f][i]].rank = static_cast<int>(f);
            pop[fronts[f][i]].crowding = crowd[i];
        }
    }
}

int binary_tournament(const std::vector<Individual>& pop, Rng& rng) {
    const int i = static_cast<int>(rng.uniform_index(pop.size()));
    const int j = static_cast<int>(rng.uniform_index(pop.size()));
    return crowded_less(pop[i], i, pop[j], j) ? i : j;
}

// Best population_size individuals of the combined population by
// (rank, crowding, index) — standard NSGA-II elitism.
std::vector<Individual> environmental_selection(std::vector<Individual>& combined, int target) {
    assign_rank_and_crowding(combined);
    std::vector<int> order(combined.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return crowded_less(combined[a], a, combined[b], b);
    });
    std::vector<Individual> survivors;
    survivors.reserve(target);
    for (int i = 0; i < target; ++i) survivors.push_back(combined[order[i]]);
    return survivors;
}

}  // namespace

SearchResult run_search(const SearchSettings& settings, const fitness::Evaluator& evaluator) {
    settings.validate();
    const int n = settings.population_size;
    const uint64_t scenario_seed = derive_seed(settings.master_seed, "scenario");
    const uint64_t run_seed = derive_seed(settings.master_seed, "run");

    SearchResult result{Archive(evaluator.config().similarity_threshold), {}, {}, 0};

    // Evaluate one generation against a fixed archive snapshot, then fold the
    // candidates into the archive in individual order.
    auto evaluate_generation = [&](std::vector<Individual>& pop, int generation) {
        const auto snapshot = result.archive.feature_snapshot();
        std::vector<fitness::FitnessInputs> inputs;
        inputs.reserve(pop.size());
        for (auto& ind : pop) {
            inputs.push_back(evaluator.prepare(ind.genome, run_seed));
            ind.objectives = evaluator.evaluate(inputs.back(), snapshot, run_seed);
            ++result.evaluations;
        }
        for (size_t i = 0; i < pop.size(); ++i) {
            LogRecord rec;
            rec.generation = generation;
            rec.individual = static_cast<int>(i);
            rec.genome = pop[i].genome;
            rec.f_accuracy_raw = pop[i].objectives.raw_metric;
            rec.f_accuracy_gated = pop[i].objectives.f_accuracy;
            rec.f_similarity = pop[i].objectives.f_similarity;
            if (pop[i].objectives.gated) {
                rec.archive_event.action = ArchiveEvent::Action::kSkippedGated;
            } else {
                ArchiveEntry entry;
                entry.genome = pop[i].genome;
                entry.image = inputs[i].image;
                entry.features = metrics::extract_features(inputs[i].image);
                entry.f_accuracy = pop[i].objectives.f_accuracy;
                entry.raw_metric = pop[i].objectives.raw_metric;
                entry.generation = generation;
                rec.archive_event = result.archive.update(std::move(entry));
            }
            result.log.push_back(std::move(rec));
        }
    };

    // Initial population is generation 1; total budget = population * generations.
    std::vector<Individual> population(n);
    {
        Rng init_rng(derive_seed(settings.master_seed, "init"));
        for (auto& ind : population) {
            ind.genome.genes.resize(sim::kSceneGenomeLength);
            for (double& g : ind.genome.genes) g = init_rng.uniform();
            ind.genome.seed = scenario_seed;
        }
    }
    evaluate_generation(population, 1);
    assign_rank_and_crowding(population);

    for (int gen = 2; gen <= settings.generations; ++gen) {
        Rng var_rng(derive_seed(settings.master_seed, "variation", static_cast<uint64_t>(gen)));
        std::vector<Individual> offspring;
        offspring.reserve(n);
        for (int pair = 0; pair < n / 2; ++pair) {
            const int p1 = binary_tournament(population, var_rng);
            const int p2 = binary_tournament(population, var_rng);
            auto [c1, c2] = sbx_crossover(population[p1].genome, population[p2].genome,
                                          settings.sbx_eta, settings.crossover_probability,
                                          var_rng);
            c1 = polynomial_mutation(c1, settings.mutation_eta, settings.mutation_probability,
                                     var_rng);
            c2 = polynomial_mutation(c2, settings.mutation_eta, settings.mutation_probability,
                                     var_rng);
            offspring.push_back({std::move(c1), {}, 0, 0.0});
            offspring.push_back({std::move(c2), {}, 0, 0.0});
        }
        evaluate_generation(offspring, gen);

        std::vector<Individual> combined = population;
        combined.insert(combined.end(), offspring.begin(), offspring.end());
        population = environmental_selection(combined, n);
    }

    result.final_population = std::move(population);
    return result;
}

}  // namespace orbit::search
