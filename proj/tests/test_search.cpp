#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "orbit/fitness.hpp"
#include "orbit/rng.hpp"
#include "orbit/search.hpp"

using orbit::Rng;
using orbit::fitness::Evaluator;
using orbit::fitness::FitnessConfig;
using orbit::model::ReferenceModel;
using orbit::model::ReferenceModelConfig;
using orbit::search::Archive;
using orbit::search::ArchiveEntry;
using orbit::search::ArchiveEvent;
using orbit::search::crowding_distance;
using orbit::search::fast_nondominated_sort;
using orbit::search::Individual;
using orbit::search::polynomial_mutation;
using orbit::search::sbx_crossover;
using orbit::search::SearchSettings;
using orbit::sim::Genome;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool dominates(const std::pair<double, double>& a, const std::pair<double, double>& b) {
    return a.first <= b.first && a.second <= b.second &&
           (a.first < b.first || a.second < b.second);
}

// Independent front assignment: repeatedly peel the non-dominated set.
std::vector<int> rank_oracle(const std::vector<std::pair<double, double>>& objs) {
    std::vector<int> rank(objs.size(), -1);
    int current = 0;
    size_t assigned = 0;
    while (assigned < objs.size()) {
        std::vector<int> layer;
        for (size_t i = 0; i < objs.size(); ++i) {
            if (rank[i] != -1) continue;
            bool dominated = false;
            for (size_t j = 0; j < objs.size() && !dominated; ++j) {
                dominated = j != i && rank[j] == -1 && dominates(objs[j], objs[i]);
            }
            if (!dominated) layer.push_back(static_cast<int>(i));
        }
        for (const int i : layer) rank[i] = current;
        assigned += layer.size();
        ++current;
    }
    return rank;
}

ArchiveEntry entry_at(double x, double y, double f_accuracy) {
    ArchiveEntry e;
    e.features = {x, y};
    e.f_accuracy = f_accuracy;
    e.genome = Genome{{0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5}, 1};
    e.image = orbit::Image(1, 1, 0.5);
    return e;
}

Genome genome_of(std::vector<double> genes) { return Genome{std::move(genes), 9}; }

}  // namespace

TEST_CASE("fast non-dominated sort hand cases") {
    SUBCASE("strict dominance chain") {
        const auto fronts = fast_nondominated_sort({{1.0, 1.0}, {2.0, 2.0}});
        REQUIRE(fronts.size() == 2u);
        CHECK(fronts[0] == std::vector<int>{0});
        CHECK(fronts[1] == std::vector<int>{1});
    }

    SUBCASE("trade-off pair shares the first front") {
        const auto fronts = fast_nondominated_sort({{1.0, 2.0}, {2.0, 1.0}});
        REQUIRE(fronts.size() == 1u);
        CHECK(fronts[0] == std::vector<int>{0, 1});
    }

    SUBCASE("duplicates do not dominate each other") {
        const auto fronts = fast_nondominated_sort({{1.0, 1.0}, {1.0, 1.0}});
        REQUIRE(fronts.size() == 1u);
        CHECK(fronts[0].size() == 2u);
    }

    SUBCASE("empty input") {
        CHECK(fast_nondominated_sort({}).empty());
    }
}

TEST_CASE("fast non-dominated sort matches peeling oracle") {
    Rng rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 3 + static_cast<int>(rng.uniform_index(28));
        std::vector<std::pair<double, double>> objs(n);
        for (auto& o : objs) {
            // Coarse grid so duplicates and ties occur.
            o.first = std::floor(rng.uniform() * 5.0);
            o.second = std::floor(rng.uniform() * 5.0);
        }
        const auto fronts = fast_nondominated_sort(objs);
        const auto expected = rank_oracle(objs);

        std::vector<int> got(n, -1);
        size_t total = 0;
        for (size_t f = 0; f < fronts.size(); ++f) {
            for (const int i : fronts[f]) {
                REQUIRE(got[i] == -1);  // partition: no duplicates
                got[i] = static_cast<int>(f);
            }
            total += fronts[f].size();
        }
        REQUIRE(total == objs.size());  // partition: everyone placed
        CHECK(got == expected);
    }
}

TEST_CASE("crowding distance") {
    SUBCASE("tiny fronts are all boundary") {
        CHECK(crowding_distance({{1.0, 2.0}}) == std::vector<double>{kInf});
        CHECK(crowding_distance({{1.0, 2.0}, {2.0, 1.0}}) ==
              std::vector<double>{kInf, kInf});
    }

    SUBCASE("collinear trio: interior point gets the full span twice") {
        const auto d = crowding_distance({{0.0, 1.0}, {0.5, 0.5}, {1.0, 0.0}});
        REQUIRE(d.size() == 3u);
        CHECK(d[0] == kInf);
        CHECK(d[2] == kInf);
        CHECK(d[1] == 2.0);
    }

    SUBCASE("degenerate objective contributes nothing") {
        // Second objective constant: zero range must not mint infinities.
        const auto d = crowding_distance({{0.0, 3.0}, {0.25, 3.0}, {1.0, 3.0}});
        REQUIRE(d.size() == 3u);
        CHECK(d[0] == kInf);
        CHECK(d[2] == kInf);
        CHECK(d[1] == doctest::Approx(1.0));  // (1.0 - 0.0) / range 1.0

        const auto all_equal = crowding_distance({{3.0, 3.0}, {3.0, 3.0}, {3.0, 3.0}});
        CHECK(all_equal[1] == 0.0);
    }
}

TEST_CASE("simulated binary crossover") {
    const Genome a = genome_of({0.1, 0.4, 0.9, 0.3, 0.6, 0.2, 0.8, 0.5});
    const Genome b = genome_of({0.7, 0.2, 0.1, 0.9, 0.4, 0.6, 0.3, 0.5});

    SUBCASE("probability zero copies the parents") {
        const auto [c1, c2] = sbx_crossover(a, b, 15.0, 0.0, 123);
        CHECK(c1.genes == a.genes);
        CHECK(c2.genes == b.genes);
    }

    SUBCASE("identical parents yield identical children") {
        const auto [c1, c2] = sbx_crossover(a, a, 15.0, 1.0, 123);
        CHECK(c1.genes == a.genes);
        CHECK(c2.genes == a.genes);
    }

    SUBCASE("seeded determinism") {
        const auto p1 = sbx_crossover(a, b, 15.0, 0.9, 7);
        const auto p2 = sbx_crossover(a, b, 15.0, 0.9, 7);
        CHECK(p1.first.genes == p2.first.genes);
        CHECK(p1.second.genes == p2.second.genes);
        const auto p3 = sbx_crossover(a, b, 15.0, 0.9, 8);
        CHECK((p3.first.genes != p1.first.genes || p3.second.genes != p1.second.genes));
    }

    SUBCASE("children stay inside the unit box") {
        Rng rng(55);
        for (int trial = 0; trial < 10000; ++trial) {
            Genome pa = genome_of({rng.uniform(), rng.uniform(), rng.uniform(),
                                   rng.uniform(), rng.uniform(), rng.uniform(),
                                   rng.uniform(), rng.uniform()});
            Genome pb = genome_of({rng.uniform(), rng.uniform(), rng.uniform(),
                                   rng.uniform(), rng.uniform(), rng.uniform(),
                                   rng.uniform(), rng.uniform()});
            const auto [c1, c2] = sbx_crossover(pa, pb, 15.0, 0.7, rng);
            for (const double g : c1.genes) {
                REQUIRE(g >= 0.0);
                REQUIRE(g <= 1.0);
            }
            for (const double g : c2.genes) {
                REQUIRE(g >= 0.0);
                REQUIRE(g <= 1.0);
            }
        }
    }

    SUBCASE("mismatched lengths rejected") {
        CHECK_THROWS_AS(sbx_crossover(a, genome_of({0.5}), 15.0, 0.7, 1),
                        std::invalid_argument);
    }
}

TEST_CASE("polynomial mutation") {
    const Genome g = genome_of({0.1, 0.4, 0.9, 0.3, 0.6, 0.2, 0.8, 0.5});

    SUBCASE("probability zero is the identity") {
        CHECK(polynomial_mutation(g, 20.0, 0.0, 3).genes == g.genes);
    }

    SUBCASE("seeded determinism") {
        const auto m1 = polynomial_mutation(g, 20.0, 1.0, 3);
        CHECK(m1.genes == polynomial_mutation(g, 20.0, 1.0, 3).genes);
        CHECK(m1.genes != g.genes);
    }

    SUBCASE("mutants stay inside the unit box, including at the bounds") {
        Rng rng(91);
        const Genome edges = genome_of({0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0});
        for (int trial = 0; trial < 10000; ++trial) {
            const auto m = polynomial_mutation(trial % 2 == 0 ? g : edges, 20.0, 1.0, rng);
            for (const double gene : m.genes) {
                REQUIRE(gene >= 0.0);
                REQUIRE(gene <= 1.0);
            }
        }
    }

    SUBCASE("mean displacement matches the analytic distribution") {
        // For a gene at 0.5 with bounds [0,1], Deb's perturbation is
        // deltaq(u) with delta1 = delta2 = 0.5. Numerically integrate
        // E|deltaq| and compare against the empirical mean.
        const double eta = 20.0;
        const double mut_pow = 1.0 / (eta + 1.0);
        const double xy_pow = std::pow(0.5, eta + 1.0);
        auto deltaq = [&](double u) {
            if (u <= 0.5) {
                const double val = 2.0 * u + (1.0 - 2.0 * u) * xy_pow;
                return std::pow(val, mut_pow) - 1.0;
            }
            const double val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy_pow;
            return 1.0 - std::pow(val, mut_pow);
        };
        const int steps = 200000;
        double expected = 0.0;
        for (int i = 0; i < steps; ++i) {
            const double u = (i + 0.5) / steps;
            expected += std::abs(deltaq(u));
        }
        expected /= steps;

        Rng rng(17);
        const Genome center = genome_of({0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
        double observed = 0.0;
        const int trials = 20000;
        for (int t = 0; t < trials; ++t) {
            const auto m = polynomial_mutation(center, eta, 1.0, rng);
            for (const double gene : m.genes) observed += std::abs(gene - 0.5);
        }
        observed /= trials * 8.0;
        CHECK(observed == doctest::Approx(expected).epsilon(0.02));
    }
}

TEST_CASE("crowded comparison ordering") {
    auto ind = [](int rank, double crowding) {
        Individual i;
        i.rank = rank;
        i.crowding = crowding;
        return i;
    };
    using orbit::search::crowded_less;
    CHECK(crowded_less(ind(0, 0.1), 5, ind(1, kInf), 2));   // rank first
    CHECK(crowded_less(ind(1, 2.0), 5, ind(1, 1.0), 2));    // then crowding, larger wins
    CHECK(crowded_less(ind(1, 2.0), 2, ind(1, 2.0), 5));    // then index
    CHECK_FALSE(crowded_less(ind(1, 2.0), 5, ind(1, 2.0), 5));
}

TEST_CASE("archive update policy") {
    SUBCASE("constructor validates the threshold") {
        CHECK_THROWS_AS(Archive{0.0}, std::invalid_argument);
        CHECK_THROWS_AS(Archive{-3.0}, std::invalid_argument);
    }

    Archive archive{12.0};

    SUBCASE("first candidate always appended") {
        const auto ev = archive.update(entry_at(0.0, 0.0, 0.5));
        CHECK(ev.action == ArchiveEvent::Action::kAppended);
        CHECK(ev.index == 0);
        CHECK(ev.distance == -1.0);
        CHECK(archive.entries().size() == 1u);
    }

    SUBCASE("distant candidate appended with its distance") {
        archive.update(entry_at(0.0, 0.0, 0.5));
        const auto ev = archive.update(entry_at(13.0, 0.0, 0.9));
        CHECK(ev.action == ArchiveEvent::Action::kAppended);
        CHECK(ev.index == 1);
        CHECK(ev.distance == 13.0);
        CHECK(archive.entries().size() == 2u);
    }

    SUBCASE("close and better replaces the nearest entry") {
        archive.update(entry_at(0.0, 0.0, 0.5));
        archive.update(entry_at(20.0, 0.0, 0.8));
        const auto ev = archive.update(entry_at(18.0, 0.0, 0.3));  // closest to slot 1
        CHECK(ev.action == ArchiveEvent::Action::kReplaced);
        CHECK(ev.index == 1);
        CHECK(ev.distance == 2.0);
        CHECK(archive.entries().size() == 2u);
        CHECK(archive.entries()[1].f_accuracy == 0.3);
        CHECK(archive.entries()[0].f_accuracy == 0.5);
    }

    SUBCASE("close and not better is discarded") {
        archive.update(entry_at(0.0, 0.0, 0.5));
        const auto ev = archive.update(entry_at(5.0, 0.0, 0.6));
        CHECK(ev.action == ArchiveEvent::Action::kDiscarded);
        CHECK(ev.index == 0);  // the nearest slot it lost against
        CHECK(ev.distance == 5.0);
        CHECK(archive.entries().size() == 1u);

        // Equal accuracy is not strictly better.
        const auto tie = archive.update(entry_at(5.0, 0.0, 0.5));
        CHECK(tie.action == ArchiveEvent::Action::kDiscarded);
    }

    SUBCASE("exactly-at-threshold distance is not an append") {
        archive.update(entry_at(0.0, 0.0, 0.5));
        const auto ev = archive.update(entry_at(12.0, 0.0, 0.9));
        CHECK(ev.action == ArchiveEvent::Action::kDiscarded);
    }

    SUBCASE("gated candidates are a contract violation") {
        CHECK_THROWS_AS(archive.update(entry_at(0.0, 0.0, 2.0)), std::invalid_argument);
    }

    SUBCASE("feature snapshot copies current features") {
        archive.update(entry_at(0.0, 0.0, 0.5));
        archive.update(entry_at(13.0, 0.0, 0.9));
        const auto snap = archive.feature_snapshot();
        REQUIRE(snap.size() == 2u);
        CHECK(snap[0] == std::vector<double>{0.0, 0.0});
        CHECK(snap[1] == std::vector<double>{13.0, 0.0});
    }
}

TEST_CASE("settings validation") {
    SearchSettings s;
    s.validate();
    s.population_size = 3;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.population_size = 5;  // odd
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = SearchSettings{};
    s.generations = -1;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = SearchSettings{};
    s.mutation_probability = 1.5;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

namespace {

// Small, fast search fixture: 16x16 reference model, flip fitness.
struct SearchFixture {
    ReferenceModelConfig model_cfg;
    ReferenceModel model;
    FitnessConfig fit_cfg;
    Evaluator evaluator;

    SearchFixture(double threshold = 0.5)
        : model_cfg{make_model_cfg()},
          model{model_cfg},
          fit_cfg{make_fit_cfg(threshold)},
          evaluator{fit_cfg, model, orbit::sim::TransformId::kIdentity} {}

    static ReferenceModelConfig make_model_cfg() {
        ReferenceModelConfig cfg;
        cfg.height = 16;
        cfg.width = 16;
        return cfg;
    }
    static FitnessConfig make_fit_cfg(double threshold) {
        FitnessConfig cfg;
        cfg.similarity_threshold = threshold;
        return cfg;
    }

    SearchSettings settings(int pop, int gens, uint64_t seed) const {
        SearchSettings s;
        s.population_size = pop;
        s.generations = gens;
        s.master_seed = seed;
        return s;
    }
};

}  // namespace

TEST_CASE("run_search bookkeeping") {
    SearchFixture fx;

    SUBCASE("evaluation budget is population times generations") {
        const auto result = orbit::search::run_search(fx.settings(4, 3, 11), fx.evaluator);
        CHECK(result.evaluations == 12);
        CHECK(result.log.size() == 12u);
        CHECK(result.final_population.size() == 4u);

        // Generations are numbered from 1 and logged in evaluation order.
        for (size_t i = 0; i < result.log.size(); ++i) {
            CHECK(result.log[i].generation == static_cast<int>(i / 4) + 1);
            CHECK(result.log[i].individual == static_cast<int>(i % 4));
        }
    }

    SUBCASE("zero generations evaluates the initial population only") {
        const auto result = orbit::search::run_search(fx.settings(4, 0, 11), fx.evaluator);
        CHECK(result.evaluations == 4);
        CHECK(result.log.size() == 4u);
        for (const auto& rec : result.log) CHECK(rec.generation == 1);
    }

    SUBCASE("identical master seeds reproduce the run exactly") {
        const auto a = orbit::search::run_search(fx.settings(4, 4, 7), fx.evaluator);
        const auto b = orbit::search::run_search(fx.settings(4, 4, 7), fx.evaluator);

        REQUIRE(a.log.size() == b.log.size());
        for (size_t i = 0; i < a.log.size(); ++i) {
            CHECK(a.log[i].genome.genes == b.log[i].genome.genes);
            CHECK(a.log[i].genome.seed == b.log[i].genome.seed);
            CHECK(a.log[i].f_accuracy_raw == b.log[i].f_accuracy_raw);
            CHECK(a.log[i].f_accuracy_gated == b.log[i].f_accuracy_gated);
            CHECK(a.log[i].f_similarity == b.log[i].f_similarity);
            CHECK(a.log[i].archive_event.action == b.log[i].archive_event.action);
        }
        REQUIRE(a.archive.entries().size() == b.archive.entries().size());
        for (size_t i = 0; i < a.archive.entries().size(); ++i) {
            CHECK(a.archive.entries()[i].genome.genes == b.archive.entries()[i].genome.genes);
            CHECK(a.archive.entries()[i].f_accuracy == b.archive.entries()[i].f_accuracy);
        }

        const auto c = orbit::search::run_search(fx.settings(4, 4, 8), fx.evaluator);
        bool same = a.log.size() == c.log.size();
        if (same) {
            same = false;
            for (size_t i = 0; i < a.log.size() && !same; ++i) {
                same = a.log[i].genome.genes != c.log[i].genome.genes;
            }
            CHECK(same);  // some genome differs under a different seed
        }
    }

    SUBCASE("archived entries are never gated and respect spacing at append time") {
        const auto result = orbit::search::run_search(fx.settings(6, 5, 3), fx.evaluator);
        for (const auto& e : result.archive.entries()) {
            CHECK(e.f_accuracy < 2.0);
            CHECK(e.features.size() == 192u);
        }
        for (const auto& rec : result.log) {
            if (rec.archive_event.action == ArchiveEvent::Action::kSkippedGated) {
                CHECK(rec.f_accuracy_gated == 2.0);
            }
        }
    }

    SUBCASE("all logged genomes stay inside the unit box") {
        const auto result = orbit::search::run_search(fx.settings(4, 6, 19), fx.evaluator);
        for (const auto& rec : result.log) {
            REQUIRE(rec.genome.genes.size() == 8u);
            for (const double g : rec.genome.genes) {
                REQUIRE(g >= 0.0);
                REQUIRE(g <= 1.0);
            }
        }
    }

    SUBCASE("final population is mutually non-dominated at rank 0 or ranked consistently") {
        const auto result = orbit::search::run_search(fx.settings(4, 4, 23), fx.evaluator);
        // Ranks are a valid partition: rank 0 exists and no rank is negative.
        bool any_rank0 = false;
        for (const auto& ind : result.final_population) {
            CHECK(ind.rank >= 0);
            any_rank0 = any_rank0 || ind.rank == 0;
        }
        CHECK(any_rank0);
    }
}
