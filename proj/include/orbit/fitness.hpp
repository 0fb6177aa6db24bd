#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "orbit/grid.hpp"
#include "orbit/metrics.hpp"
#include "orbit/model.hpp"
#include "orbit/scene_sim.hpp"

namespace orbit::fitness {

enum class Variant { kFlip, kNoise, kSa, kMcd, kGroundTruth };

// Whether a larger raw metric means a better test input. The search engine
// minimizes, so maximize-raw variants are negated inside gate_accuracy.
enum class Direction { kMinimizeRaw, kMaximizeRaw };

enum class RelevanceSource { kPrediction, kGroundTruth };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);
Direction direction_of(Variant v);

struct ObjectivePair {
    double f_accuracy = 0.0;
    double f_similarity = 0.0;
    double raw_metric = 0.0;
    bool gated = false;
    Direction direction = Direction::kMinimizeRaw;
};

struct FitnessConfig {
    Variant variant = Variant::kFlip;
    double sky_threshold = 0.7;
    double noise_variance = 0.1;
    int mcd_passes = 5;
    double similarity_threshold = 12.0;
    RelevanceSource relevance_source = RelevanceSource::kPrediction;

    void validate() const;
};

// Irrelevant inputs get the worst objective value 2; relevant minimize-raw
// metrics pass through, maximize-raw metrics are negated (so 2 stays worst).
double gate_accuracy(double raw_metric, bool relevant, Direction direction);

// False iff the sky-class proportion from the configured source reaches the
// threshold. The ground-truth source requires a mask.
bool relevance(const model::Prediction& prediction, const std::optional<Mask>& mask,
               const FitnessConfig& cfg);

// Archive-relative similarity: 0 for an empty archive; 2 when the nearest
// archive member is closer than T; otherwise 1/(1+d).
double f_similarity(const metrics::FeatureVector& candidate,
                    const std::vector<metrics::FeatureVector>& archive, double threshold);

// Mean Euclidean distance over all unordered pairs.
double mean_pairwise_distance(const std::vector<metrics::FeatureVector>& features);

// Renders n random scenes and returns their mean pairwise feature distance,
// the reference operating point for the similarity threshold T.
double calibrate_threshold(int n_images, uint64_t seed, int height = 64, int width = 64);

// Everything evaluate() is allowed to see for one candidate. The mask is
// attached only when the config genuinely needs ground truth, which makes the
// no-ground-truth guarantee of the label-free variants checkable.
struct FitnessInputs {
    sim::Genome genome;
    Image image;  // post-transform image as fed to the model
    std::optional<Mask> mask;
};

class Evaluator {
  public:
    Evaluator(FitnessConfig cfg, const model::Model& m, sim::TransformId transform,
              std::vector<model::ActivationVector> train_activations = {});

    const FitnessConfig& config() const { return cfg_; }
    const model::Model& model() const { return model_; }
    bool needs_mask() const;

    // Render the genome's scene, apply the realism transform, and attach the
    // mask only when the config needs it.
    FitnessInputs prepare(const sim::Genome& genome, uint64_t run_seed) const;

    ObjectivePair evaluate(const FitnessInputs& inputs,
                           const std::vector<metrics::FeatureVector>& archive_features,
                           uint64_t run_seed) const;
    ObjectivePair evaluate(const sim::Genome& genome,
                           const std::vector<metrics::FeatureVector>& archive_features,
                           uint64_t run_seed) const;

  private:
    FitnessConfig cfg_;
    const model::Model& model_;
    sim::TransformId transform_;
    // For the surprise-adequacy variant the corpus is stored standardized
    // (per-dimension z-scores over the corpus itself) and candidate
    // activations are mapped through the same statistics before the
    // nearest-neighbour distance.
    std::vector<model::ActivationVector> train_activations_;
    std::vector<double> sa_mean_;
    std::vector<double> sa_inv_std_;
};

// Stable content hash of a genome (genes + scene seed); used to derive
// per-candidate evaluation seeds independent of evaluation order.
uint64_t genome_hash(const sim::Genome& genome);

}  // namespace orbit::fitness
