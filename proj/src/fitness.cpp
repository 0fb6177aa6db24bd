#include "orbit/fitness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "orbit/rng.hpp"

namespace orbit::fitness {

Variant parse_variant(const std::string& name) {
    if (name == "flip") return Variant::kFlip;
    if (name == "noise") return Variant::kNoise;
    if (name == "sa") return Variant::kSa;
    if (name == "mcd") return Variant::kMcd;
    if (name == "ground-truth" || name == "ground_truth") return Variant::kGroundTruth;
    throw std::invalid_argument("unknown fitness variant: " + name);
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::kFlip: return "flip";
        case Variant::kNoise: return "noise";
        case Variant::kSa: return "sa";
        case Variant::kMcd: return "mcd";
        case Variant::kGroundTruth: return "ground-truth";
    }
    throw std::logic_error("unreachable variant");
}

Direction direction_of(Variant v) {
    switch (v) {
        case Variant::kFlip:
        case Variant::kNoise:
        case Variant::kGroundTruth: return Direction::kMinimizeRaw;
        case Variant::kSa:
        case Variant::kMcd: return Direction::kMaximizeRaw;
    }
    throw std::logic_error("unreachable variant");
}

void FitnessConfig::validate() const {
    if (sky_threshold <= 0.0 || sky_threshold > 1.0) {
        throw std::invalid_argument("sky threshold must be in (0,1]");
    }
    if (noise_variance < 0.0) throw std::invalid_argument("noise variance must be non-negative");
    if (mcd_passes < 2) throw std::invalid_argument("mcd passes must be >= 2");
    if (similarity_threshold <= 0.0) {
        throw std::invalid_argument("similarity threshold must be positive");
    }
    if (variant == Variant::kGroundTruth && relevance_source != RelevanceSource::kGroundTruth) {
        // The baseline is the one place ground truth is allowed; keep its
        // relevance source consistent with its metric.
        throw std::invalid_argument("ground-truth variant requires ground-truth relevance");
    }
}

double gate_accuracy(double raw_metric, bool relevant, Direction direction) {
    if (!relevant) return 2.0;
    return direction == Direction::kMinimizeRaw ? raw_metric : -raw_metric;
}

namespace {

double sky_fraction(const Mask& mask) {
    size_t sky = 0;
    for (const uint8_t v : mask.data) {
        if (v == kSky) ++sky;
    }
    return static_cast<double>(sky) / static_cast<double>(mask.data.size());
}

}  // namespace

bool relevance(const model::Prediction& prediction, const std::optional<Mask>& mask,
               const FitnessConfig& cfg) {
    double sky;
    if (cfg.relevance_source == RelevanceSource::kGroundTruth) {
        if (!mask.has_value()) {
            throw std::invalid_argument("relevance: ground-truth source requires a mask");
        }
        sky = sky_fraction(*mask);
    } else {
        sky = sky_fraction(prediction.labels);
    }
    return sky < cfg.sky_threshold;
}

double f_similarity(const metrics::FeatureVector& candidate,
                    const std::vector<metrics::FeatureVector>& archive, double threshold) {
    if (!(threshold > 0.0)) {
        throw std::invalid_argument("f_similarity: threshold must be positive");
    }
    if (archive.empty()) return 0.0;
    double d = std::numeric_limits<double>::infinity();
    for (const auto& entry : archive) {
        d = std::min(d, metrics::feature_distance(candidate, entry));
    }
    if (d < threshold) return 2.0;
    return 1.0 / (1.0 + d);
}

double mean_pairwise_distance(const std::vector<metrics::FeatureVector>& features) {
    const size_t n = features.size();
    if (n < 2) throw std::invalid_argument("mean_pairwise_distance: need at least 2 vectors");
    double sum = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            sum += metrics::feature_distance(features[i], features[j]);
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

double calibrate_threshold(int n_images, uint64_t seed, int height, int width) {
    if (n_images < 2) throw std::invalid_argument("calibrate_threshold: need at least 2 images");
    std::vector<metrics::FeatureVector> features;
    features.reserve(n_images);
    for (int i = 0; i < n_images; ++i) {
        Rng rng(derive_seed(seed, "calib-genes", static_cast<uint64_t>(i)));
        sim::Genome g;
        g.genes.resize(sim::kSceneGenomeLength);
        for (double& v : g.genes) v = rng.uniform();
        g.seed = derive_seed(seed, "calib-scene", static_cast<uint64_t>(i));
        const auto scene = sim::render_scene(sim::genome_to_scene(g), g.seed, height, width);
        features.push_back(metrics::extract_features(scene.image));
    }
    return mean_pairwise_distance(features);
}

uint64_t genome_hash(const sim::Genome& genome) {
    uint64_t h = fnv1a64(genome.genes.data(), genome.genes.size() * sizeof(double));
    return fnv1a64(&genome.seed, sizeof(genome.seed), h);
}

Evaluator::Evaluator(FitnessConfig cfg, const model::Model& m, sim::TransformId transform,
                     std::vector<model::ActivationVector> train_activations)
    : cfg_(cfg),
      model_(m),
      transform_(transform),
      train_activations_(std::move(train_activations)) {
    cfg_.validate();
    if (cfg_.variant == Variant::kSa) {
        if (train_activations_.empty()) {
            throw std::invalid_argument("sa variant requires a training activation corpus");
        }
        // Standardize each activation dimension against the corpus before
        // nearest-neighbour distances are taken. Raw channel energies differ
        // in scale by an order of magnitude, so without scaling the distance
        // degenerates to overall response energy; standardized, a scene is
        // surprising when its activation *profile* departs from the corpus,
        // not merely its magnitude.
        const size_t dims = train_activations_.front().size();
        sa_mean_.assign(dims, 0.0);
        sa_inv_std_.assign(dims, 0.0);
        for (const auto& act : train_activations_) {
            if (act.size() != dims) {
                throw std::invalid_argument("sa corpus activations have inconsistent sizes");
            }
            for (size_t i = 0; i < dims; ++i) sa_mean_[i] += act[i];
        }
        const double n = static_cast<double>(train_activations_.size());
        for (size_t i = 0; i < dims; ++i) sa_mean_[i] /= n;
        for (const auto& act : train_activations_) {
            for (size_t i = 0; i < dims; ++i) {
                const double d = act[i] - sa_mean_[i];
                sa_inv_std_[i] += d * d;
            }
        }
        constexpr double kMinStd = 1e-9;
        for (size_t i = 0; i < dims; ++i) {
            sa_inv_std_[i] = 1.0 / std::max(std::sqrt(sa_inv_std_[i] / n), kMinStd);
        }
        for (auto& act : train_activations_) {
            for (size_t i = 0; i < dims; ++i) act[i] = (act[i] - sa_mean_[i]) * sa_inv_std_[i];
        }
    }
}

bool Evaluator::needs_mask() const {
    return cfg_.variant == Variant::kGroundTruth ||
           cfg_.relevance_source == RelevanceSource::kGroundTruth;
}

FitnessInputs Evaluator::prepare(const sim::Genome& genome, uint64_t run_seed) const {
    sim::validate_genome(genome, sim::kSceneGenomeLength);
    const auto scene = sim::render_scene(sim::genome_to_scene(genome), genome.seed,
                                         model_.height(), model_.width());
    const uint64_t eval_seed = derive_seed(run_seed, "eval", genome_hash(genome));
    FitnessInputs inputs;
    inputs.genome = genome;
    inputs.image =
        sim::apply_realism_transform(scene.image, transform_, derive_seed(eval_seed, "transform"));
    if (needs_mask()) inputs.mask = scene.mask;
    return inputs;
}

ObjectivePair Evaluator::evaluate(const FitnessInputs& inputs,
                                  const std::vector<metrics::FeatureVector>& archive_features,
                                  uint64_t run_seed) const {
    const uint64_t eval_seed = derive_seed(run_seed, "eval", genome_hash(inputs.genome));
    const auto prediction = model_.predict(inputs.image);
    const bool relevant = relevance(prediction, inputs.mask, cfg_);

    double raw = 0.0;
    switch (cfg_.variant) {
        case Variant::kFlip:
            raw = metrics::flip_consistency(model_, inputs.image);
            break;
        case Variant::kNoise:
            raw = metrics::noise_consistency_seg(model_, inputs.image, cfg_.noise_variance,
                                                 derive_seed(eval_seed, "noise"));
            break;
        case Variant::kSa: {
            auto act = model_.activations(inputs.image);
            for (size_t i = 0; i < act.size(); ++i) {
                act[i] = (act[i] - sa_mean_[i]) * sa_inv_std_[i];
            }
            raw = metrics::dsa(act, train_activations_);
            break;
        }
        case Variant::kMcd:
            raw = metrics::mcd_uncertainty(model_, inputs.image, cfg_.mcd_passes,
                                           derive_seed(eval_seed, "mcd"));
            break;
        case Variant::kGroundTruth:
            if (!inputs.mask.has_value()) {
                throw std::invalid_argument("ground-truth variant requires a mask");
            }
            raw = metrics::miou(prediction.labels, *inputs.mask, model_.num_classes());
            break;
    }

    ObjectivePair pair;
    pair.raw_metric = raw;
    pair.direction = direction_of(cfg_.variant);
    pair.gated = !relevant;
    pair.f_accuracy = gate_accuracy(raw, relevant, pair.direction);
    pair.f_similarity =
        f_similarity(metrics::extract_features(inputs.image), archive_features,
                     cfg_.similarity_threshold);
    return pair;
}

ObjectivePair Evaluator::evaluate(const sim::Genome& genome,
                                  const std::vector<metrics::FeatureVector>& archive_features,
                                  uint64_t run_seed) const {
    return evaluate(prepare(genome, run_seed), archive_features, run_seed);
}

}  // namespace orbit::fitness
