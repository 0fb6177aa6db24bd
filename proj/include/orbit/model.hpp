#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "orbit/grid.hpp"

namespace orbit::model {

/// Per-pixel class labels, optionally with per-class scores. Scores are
/// stored row-major as (r, c, class); per pixel they are in [0,1] and sum
/// to 1. When scores are present, labels are their argmax with ties broken
/// by the lowest class index.
struct Prediction {
    Mask labels;
    std::vector<double> scores;  // empty when the model provides labels only
    int num_classes = 0;

    bool has_scores() const { return !scores.empty(); }
    double score_at(int r, int c, int cls) const {
        return scores[(static_cast<size_t>(r) * labels.w + c) * num_classes + cls];
    }
};

using ActivationVector = std::vector<double>;

/// Model-under-test abstraction: deterministic prediction, seeded
/// dropout-randomized prediction, and activation extraction.
class Model {
  public:
    virtual ~Model() = default;

    virtual int height() const = 0;
    virtual int width() const = 0;
    virtual int num_classes() const = 0;

    /// Deterministic prediction (dropout disabled).
    virtual Prediction predict(const Image& image) const = 0;

    /// One stochastic forward pass; deterministic given pass_seed.
    virtual Prediction predict_with_dropout(const Image& image, uint64_t pass_seed) const = 0;

    /// Fixed-length activation vector (deterministic).
    virtual ActivationVector activations(const Image& image) const = 0;
};

/// Configuration for the built-in reference model: a single seeded 3x3
/// convolution (kHiddenChannels channels) -> tanh -> optional dropout ->
/// per-pixel linear classifier over kNumClasses classes with softmax scores.
///
/// flip_robust symmetrizes the convolution kernels so predictions commute
/// with horizontal flip exactly. defect_gain > 0 plants a flip-asymmetric
/// perturbation that grows with local image contrast, making the model
/// flip-inconsistent in rock-dense scenes.
struct ReferenceModelConfig {
    int height = 64;
    int width = 64;
    uint64_t weight_seed = 7;
    double dropout_rate = 0.5;
    bool flip_robust = false;
    double defect_gain = 0.0;
};

inline constexpr int kHiddenChannels = 16;

class ReferenceModel final : public Model {
  public:
    explicit ReferenceModel(const ReferenceModelConfig& config);

    int height() const override { return config_.height; }
    int width() const override { return config_.width; }
    int num_classes() const override { return kNumClasses; }
    const ReferenceModelConfig& config() const { return config_; }

    Prediction predict(const Image& image) const override;
    Prediction predict_with_dropout(const Image& image, uint64_t pass_seed) const override;
    ActivationVector activations(const Image& image) const override;

  private:
    std::vector<double> hidden_layer(const Image& image) const;
    Prediction classify(const Image& image, const std::vector<double>& hidden) const;

    ReferenceModelConfig config_;
    // conv kernels [channel][3*3], conv bias, classifier weights [class][channel], bias
    std::vector<double> kernels_;
    std::vector<double> conv_bias_;
    std::vector<double> cls_weight_;
    std::vector<double> cls_bias_;
};

/// Training-set activations for surprise adequacy: activations of n scenes
/// rendered from uniform random genomes (seeded). The corpus stands in for
/// the subject model's training set.
std::vector<ActivationVector> build_activation_corpus(const Model& model, int n, uint64_t seed);

}  // namespace orbit::model
