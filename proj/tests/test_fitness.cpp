#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <optional>
#include <vector>

#include "orbit/fitness.hpp"
#include "orbit/metrics.hpp"
#include "orbit/model.hpp"
#include "orbit/scene_sim.hpp"

using orbit::Image;
using orbit::Mask;
using orbit::fitness::Direction;
using orbit::fitness::Evaluator;
using orbit::fitness::FitnessConfig;
using orbit::fitness::gate_accuracy;
using orbit::fitness::genome_hash;
using orbit::fitness::ObjectivePair;
using orbit::fitness::RelevanceSource;
using orbit::fitness::Variant;
using orbit::metrics::FeatureVector;
using orbit::model::Prediction;
using orbit::model::ReferenceModel;
using orbit::model::ReferenceModelConfig;
using orbit::sim::Genome;
using orbit::sim::TransformId;

namespace {

Prediction labels_only(const Mask& labels) { return {labels, {}, orbit::kNumClasses}; }

// 10x10 prediction whose first `sky_rows` rows are sky.
Prediction sky_banded(int sky_rows) {
    Mask m(10, 10, uint8_t{orbit::kSand});
    for (int r = 0; r < sky_rows; ++r) {
        for (int c = 0; c < 10; ++c) m.at(r, c) = orbit::kSky;
    }
    return labels_only(m);
}

Genome make_genome(std::vector<double> genes, uint64_t seed) {
    return Genome{std::move(genes), seed};
}

Genome mid_genome(uint64_t seed = 21) {
    return make_genome({0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5}, seed);
}

}  // namespace

TEST_CASE("variant names round-trip") {
    using orbit::fitness::parse_variant;
    using orbit::fitness::variant_name;
    for (Variant v : {Variant::kFlip, Variant::kNoise, Variant::kSa, Variant::kMcd,
                      Variant::kGroundTruth}) {
        CHECK(parse_variant(variant_name(v)) == v);
    }
    CHECK(parse_variant("ground_truth") == Variant::kGroundTruth);
    CHECK_THROWS_AS(parse_variant("bogus"), std::invalid_argument);
}

TEST_CASE("direction per variant") {
    using orbit::fitness::direction_of;
    CHECK(direction_of(Variant::kFlip) == Direction::kMinimizeRaw);
    CHECK(direction_of(Variant::kNoise) == Direction::kMinimizeRaw);
    CHECK(direction_of(Variant::kGroundTruth) == Direction::kMinimizeRaw);
    CHECK(direction_of(Variant::kSa) == Direction::kMaximizeRaw);
    CHECK(direction_of(Variant::kMcd) == Direction::kMaximizeRaw);
}

TEST_CASE("gate_accuracy") {
    CHECK(gate_accuracy(0.44, false, Direction::kMinimizeRaw) == 2.0);
    CHECK(gate_accuracy(0.44, true, Direction::kMinimizeRaw) == 0.44);
    CHECK(gate_accuracy(5.0, true, Direction::kMaximizeRaw) == -5.0);
    CHECK(gate_accuracy(5.0, false, Direction::kMaximizeRaw) == 2.0);
    // Gate dominance: any relevant value beats the gated value.
    CHECK(gate_accuracy(1.0, true, Direction::kMinimizeRaw) < 2.0);
    CHECK(gate_accuracy(0.0, true, Direction::kMaximizeRaw) < 2.0);
}

TEST_CASE("relevance gating by sky proportion") {
    FitnessConfig cfg;  // prediction source, threshold 0.7

    CHECK_FALSE(orbit::fitness::relevance(sky_banded(8), std::nullopt, cfg));  // 80% sky
    CHECK(orbit::fitness::relevance(sky_banded(0), std::nullopt, cfg));
    CHECK(orbit::fitness::relevance(sky_banded(6), std::nullopt, cfg));  // 60% sky
    // Boundary: exactly 70% sky is NOT relevant (strict <).
    CHECK_FALSE(orbit::fitness::relevance(sky_banded(7), std::nullopt, cfg));

    SUBCASE("ground-truth source reads the mask instead") {
        cfg.relevance_source = RelevanceSource::kGroundTruth;
        const Mask sky_mask(10, 10, uint8_t{orbit::kSky});
        // Prediction says no sky, mask says all sky: mask wins.
        CHECK_FALSE(orbit::fitness::relevance(sky_banded(0), sky_mask, cfg));
        CHECK(orbit::fitness::relevance(sky_banded(9),
                                        Mask(10, 10, uint8_t{orbit::kSand}), cfg));
        CHECK_THROWS_AS(orbit::fitness::relevance(sky_banded(0), std::nullopt, cfg),
                        std::invalid_argument);
    }
}

TEST_CASE("f_similarity") {
    using orbit::fitness::f_similarity;
    const FeatureVector origin{0.0, 0.0};

    CHECK(f_similarity(origin, {}, 12.0) == 0.0);
    CHECK(f_similarity({19.0, 0.0}, {origin}, 12.0) == 0.05);  // 1/(1+19)
    CHECK(f_similarity({11.9, 0.0}, {origin}, 12.0) == 2.0);   // below T
    // Non-nearest members do not matter.
    CHECK(f_similarity({19.0, 0.0}, {origin, {100.0, 100.0}}, 12.0) == 0.05);
    CHECK_THROWS_AS(f_similarity({1.0}, {origin}, 12.0), std::invalid_argument);
    CHECK_THROWS_AS(f_similarity(origin, {origin}, 0.0), std::invalid_argument);
}

TEST_CASE("mean pairwise distance and threshold calibration") {
    using orbit::fitness::calibrate_threshold;
    using orbit::fitness::mean_pairwise_distance;

    // Pairwise distances 3-4-5 -> mean 4.
    const std::vector<FeatureVector> triangle{{0.0, 0.0}, {3.0, 0.0}, {3.0, 4.0}};
    CHECK(mean_pairwise_distance(triangle) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(mean_pairwise_distance({{1.0, 1.0}, {1.0, 1.0}}) == 0.0);
    CHECK_THROWS_AS(mean_pairwise_distance({{1.0}}), std::invalid_argument);

    const double t = calibrate_threshold(8, 3, 32, 32);
    CHECK(t > 0.0);
    CHECK(t == calibrate_threshold(8, 3, 32, 32));
    CHECK(t != calibrate_threshold(8, 4, 32, 32));
    CHECK_THROWS_AS(calibrate_threshold(1, 3), std::invalid_argument);
}

TEST_CASE("config validation") {
    FitnessConfig cfg;
    cfg.validate();  // defaults are fine

    FitnessConfig bad = cfg;
    bad.mcd_passes = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.noise_variance = -0.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.sky_threshold = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.similarity_threshold = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    // Ground-truth fitness scores against the mask, so gating must use it too.
    bad = cfg;
    bad.variant = Variant::kGroundTruth;
    bad.relevance_source = RelevanceSource::kPrediction;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("evaluator information flow") {
    const ReferenceModel m{ReferenceModelConfig{}};

    SUBCASE("label-free variants never see the mask") {
        for (Variant v : {Variant::kFlip, Variant::kNoise, Variant::kMcd}) {
            FitnessConfig cfg;
            cfg.variant = v;
            const Evaluator eval{cfg, m, TransformId::kIdentity};
            CHECK_FALSE(eval.needs_mask());
            const auto inputs = eval.prepare(mid_genome(), 77);
            CHECK_FALSE(inputs.mask.has_value());
            CHECK(inputs.image.h == m.height());
            CHECK(inputs.image.w == m.width());
        }
    }

    SUBCASE("ground-truth variant carries the mask") {
        FitnessConfig cfg;
        cfg.variant = Variant::kGroundTruth;
        cfg.relevance_source = RelevanceSource::kGroundTruth;
        const Evaluator eval{cfg, m, TransformId::kIdentity};
        CHECK(eval.needs_mask());
        CHECK(eval.prepare(mid_genome(), 77).mask.has_value());
    }

    SUBCASE("surprise adequacy requires a training corpus") {
        FitnessConfig cfg;
        cfg.variant = Variant::kSa;
        CHECK_THROWS_AS((Evaluator{cfg, m, TransformId::kIdentity}),
                        std::invalid_argument);
        const auto corpus = orbit::model::build_activation_corpus(m, 3, 1);
        const Evaluator eval{cfg, m, TransformId::kIdentity, corpus};
        const auto pair = eval.evaluate(mid_genome(), {}, 77);
        CHECK(pair.raw_metric >= 0.0);
        CHECK(pair.direction == Direction::kMaximizeRaw);
    }
}

TEST_CASE("evaluator objective values") {
    const ReferenceModel m{ReferenceModelConfig{}};

    SUBCASE("relevant inputs pass the raw metric through the gate") {
        FitnessConfig cfg;  // flip
        const Evaluator eval{cfg, m, TransformId::kIdentity};
        // Ground-level scene: camera pitch 0 gives no sky at all.
        const Genome ground = make_genome({0.0, 0.5, 0.5, 0.8, 0.5, 0.5, 0.5, 0.5}, 7);
        const auto pair = eval.evaluate(ground, {}, 77);
        CHECK_FALSE(pair.gated);
        CHECK(pair.f_accuracy == pair.raw_metric);
        CHECK(pair.raw_metric >= 0.0);
        CHECK(pair.raw_metric <= 1.0);
        CHECK(pair.f_similarity == 0.0);  // empty archive
    }

    SUBCASE("maximize-raw variants negate the metric") {
        FitnessConfig cfg;
        cfg.variant = Variant::kMcd;
        cfg.mcd_passes = 3;
        const Evaluator eval{cfg, m, TransformId::kIdentity};
        const Genome ground = make_genome({0.0, 0.5, 0.5, 0.8, 0.5, 0.5, 0.5, 0.5}, 7);
        const auto pair = eval.evaluate(ground, {}, 77);
        CHECK_FALSE(pair.gated);
        CHECK(pair.f_accuracy == -pair.raw_metric);
    }

    SUBCASE("similarity reflects the archive") {
        FitnessConfig cfg;
        cfg.similarity_threshold = 1e-6;  // everything counts as distant
        const Evaluator eval{cfg, m, TransformId::kIdentity};
        const auto inputs = eval.prepare(mid_genome(), 77);
        const auto features = orbit::metrics::extract_features(inputs.image);
        const auto pair = eval.evaluate(inputs, {features}, 77);
        CHECK(pair.f_similarity == 2.0);  // candidate coincides with the archive member
    }

    SUBCASE("deterministic given genome, run seed, and archive") {
        FitnessConfig cfg;
        cfg.variant = Variant::kNoise;
        const Evaluator eval{cfg, m, TransformId::kIdentity};
        const auto a = eval.evaluate(mid_genome(), {}, 77);
        const auto b = eval.evaluate(mid_genome(), {}, 77);
        CHECK(a.f_accuracy == b.f_accuracy);
        CHECK(a.raw_metric == b.raw_metric);
        const auto c = eval.evaluate(mid_genome(), {}, 78);
        (void)c;  // different run seed may change the metric; only determinism is asserted
    }

    SUBCASE("ground-truth variant scores miou against the simulator mask") {
        FitnessConfig cfg;
        cfg.variant = Variant::kGroundTruth;
        cfg.relevance_source = RelevanceSource::kGroundTruth;
        const Evaluator eval{cfg, m, TransformId::kIdentity};
        const Genome ground = make_genome({0.0, 0.5, 0.5, 0.8, 0.5, 0.5, 0.5, 0.5}, 7);
        const auto pair = eval.evaluate(ground, {}, 77);
        CHECK_FALSE(pair.gated);
        CHECK(pair.raw_metric >= 0.0);
        CHECK(pair.raw_metric <= 1.0);
        CHECK(pair.f_accuracy == pair.raw_metric);
    }
}

TEST_CASE("genome hashing") {
    const Genome a = mid_genome(21);
    CHECK(genome_hash(a) == genome_hash(a));

    Genome gene_tweak = a;
    gene_tweak.genes[3] += 1e-9;
    CHECK(genome_hash(gene_tweak) != genome_hash(a));

    Genome seed_tweak = a;
    seed_tweak.seed = 22;
    CHECK(genome_hash(seed_tweak) != genome_hash(a));
}
