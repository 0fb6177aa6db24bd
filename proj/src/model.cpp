#include "orbit/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "orbit/rng.hpp"
#include "orbit/scene_sim.hpp"

namespace orbit::model {

namespace {

// Intensity prior: each class gets a bump around the typical brightness of
// its material. The seeded random weights specialize the model beyond this;
// the prior keeps untrained predictions scene-plausible (bright smooth areas
// lean sky, dark patches lean rock), which makes the sky-based relevance
// gate reachable from model output alone.
constexpr double kPriorCenters[kNumClasses] = {0.45, 0.62, 0.72, 0.34, 0.30, 0.92};
constexpr double kPriorWidth = 0.085;
constexpr double kPriorGain = 4.0;

double class_prior(int cls, double intensity) {
    const double d = (intensity - kPriorCenters[cls]) / kPriorWidth;
    return std::exp(-d * d);
}

double defect_wave(int col, int width) {
    // Antisymmetric under horizontal mirroring for any integer cycle count:
    // sin(2pi k (w-1-c)/(w-1)) = -sin(2pi k c/(w-1)). The high frequency lays
    // many sign transitions across the frame, so textured scenes are dense
    // with pixels whose class margin sits near zero.
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    return std::sin(kTwoPi * 8.0 * col / (width - 1));
}

}  // namespace

ReferenceModel::ReferenceModel(const ReferenceModelConfig& config) : config_(config) {
    if (config.height <= 0 || config.width <= 0) {
        throw std::invalid_argument("reference model dimensions must be positive");
    }
    if (config.dropout_rate < 0.0 || config.dropout_rate >= 1.0) {
        throw std::invalid_argument("dropout rate must be in [0,1)");
    }
    Rng rng(derive_seed(config.weight_seed, "reference-model"));
    kernels_.resize(kHiddenChannels * 9);
    conv_bias_.resize(kHiddenChannels);
    cls_weight_.resize(kNumClasses * kHiddenChannels);
    cls_bias_.resize(kNumClasses);
    for (double& v : kernels_) v = rng.uniform(-0.5, 0.5);
    // Remove the DC response from every kernel so activations track local
    // structure (edges, texture) rather than absolute brightness; flat
    // regions excite them weakly regardless of tone. Class scores still see
    // brightness through the intensity prior, so this costs the classifier
    // nothing while keeping hidden-state statistics anchored to structure.
    for (int ch = 0; ch < kHiddenChannels; ++ch) {
        double* k = &kernels_[static_cast<size_t>(ch) * 9];
        double dc = 0.0;
        for (int t = 0; t < 9; ++t) dc += k[t];
        dc /= 9.0;
        for (int t = 0; t < 9; ++t) k[t] -= dc;
    }
    for (double& v : conv_bias_) v = rng.uniform(-0.2, 0.2);
    for (double& v : cls_weight_) v = rng.uniform(-0.8, 0.8);
    for (double& v : cls_bias_) v = rng.uniform(-0.2, 0.2);

    if (config.flip_robust) {
        // Symmetrize each kernel horizontally. Column pairs are accumulated
        // as (left + right) during convolution, so the whole prediction
        // pipeline commutes with horizontal flip bit-exactly.
        for (int ch = 0; ch < kHiddenChannels; ++ch) {
            for (int dr = 0; dr < 3; ++dr) {
                double* row = &kernels_[ch * 9 + dr * 3];
                const double side = 0.5 * (row[0] + row[2]);
                row[0] = side;
                row[2] = side;
            }
        }
    }
}

std::vector<double> ReferenceModel::hidden_layer(const Image& image) const {
    const int h = config_.height;
    const int w = config_.width;
    std::vector<double> hidden(static_cast<size_t>(kHiddenChannels) * h * w);
    auto pixel = [&](int r, int c) {
        return image.at(std::clamp(r, 0, h - 1), std::clamp(c, 0, w - 1));
    };
    for (int ch = 0; ch < kHiddenChannels; ++ch) {
        const double* k = &kernels_[ch * 9];
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                double acc = conv_bias_[ch];
                for (int dr = -1; dr <= 1; ++dr) {
                    const double* krow = k + (dr + 1) * 3;
                    // Center tap first, then symmetric column pairs; the pair
                    // sum is commutative, which preserves bit-exact flip
                    // equivariance for symmetrized kernels.
                    acc += krow[1] * pixel(r + dr, c);
                    if (config_.flip_robust) {
                        acc += krow[0] * (pixel(r + dr, c - 1) + pixel(r + dr, c + 1));
                    } else {
                        acc += krow[0] * pixel(r + dr, c - 1);
                        acc += krow[2] * pixel(r + dr, c + 1);
                    }
                }
                hidden[(static_cast<size_t>(ch) * h + r) * w + c] = std::tanh(acc);
            }
        }
    }
    return hidden;
}

Prediction ReferenceModel::classify(const Image& image, const std::vector<double>& hidden) const {
    const int h = config_.height;
    const int w = config_.width;
    Prediction pred;
    pred.labels = Mask(h, w);
    pred.num_classes = kNumClasses;
    pred.scores.resize(static_cast<size_t>(h) * w * kNumClasses);

    auto pixel = [&](int r, int c) {
        return image.at(std::clamp(r, 0, h - 1), std::clamp(c, 0, w - 1));
    };
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double defect = 0.0;
            if (config_.defect_gain != 0.0) {
                // Local contrast against the 3x3 mean; the column wave breaks
                // flip symmetry only where the image is textured.
                double sum = 0.0;
                for (int dr = -1; dr <= 1; ++dr) {
                    sum += pixel(r + dr, c);
                    sum += pixel(r + dr, c - 1) + pixel(r + dr, c + 1);
                }
                const double contrast = std::abs(pixel(r, c) - sum / 9.0);
                defect = config_.defect_gain * contrast * defect_wave(c, w);
            }

            double logits[kNumClasses];
            double max_logit = -1e300;
            const double intensity = image.at(r, c);
            for (int cls = 0; cls < kNumClasses; ++cls) {
                double z = cls_bias_[cls] + kPriorGain * class_prior(cls, intensity);
                const double* wrow = &cls_weight_[static_cast<size_t>(cls) * kHiddenChannels];
                for (int ch = 0; ch < kHiddenChannels; ++ch) {
                    z += wrow[ch] * hidden[(static_cast<size_t>(ch) * h + r) * w + c];
                }
                if (cls == kBigRock) z += defect;
                logits[cls] = z;
                max_logit = std::max(max_logit, z);
            }
            double denom = 0.0;
            for (int cls = 0; cls < kNumClasses; ++cls) {
                logits[cls] = std::exp(logits[cls] - max_logit);
                denom += logits[cls];
            }
            int best = 0;
            double best_score = -1.0;
            for (int cls = 0; cls < kNumClasses; ++cls) {
                const double s = logits[cls] / denom;
                pred.scores[(static_cast<size_t>(r) * w + c) * kNumClasses + cls] = s;
                if (s > best_score) {
                    best_score = s;
                    best = cls;
                }
            }
            pred.labels.at(r, c) = static_cast<uint8_t>(best);
        }
    }
    return pred;
}

Prediction ReferenceModel::predict(const Image& image) const {
    if (image.h != config_.height || image.w != config_.width) {
        throw std::invalid_argument("predict: image dimensions do not match model");
    }
    return classify(image, hidden_layer(image));
}

Prediction ReferenceModel::predict_with_dropout(const Image& image, uint64_t pass_seed) const {
    if (image.h != config_.height || image.w != config_.width) {
        throw std::invalid_argument("predict_with_dropout: image dimensions do not match model");
    }
    auto hidden = hidden_layer(image);
    if (config_.dropout_rate > 0.0) {
        // Inverted dropout over each hidden unit, drawn in storage order.
        Rng rng(derive_seed(pass_seed, "dropout"));
        const double keep = 1.0 - config_.dropout_rate;
        for (double& v : hidden) {
            v = rng.bernoulli(config_.dropout_rate) ? 0.0 : v / keep;
        }
    }
    return classify(image, hidden);
}

ActivationVector ReferenceModel::activations(const Image& image) const {
    if (image.h != config_.height || image.w != config_.width) {
        throw std::invalid_argument("activations: image dimensions do not match model");
    }
    const auto hidden = hidden_layer(image);
    const size_t plane = static_cast<size_t>(config_.height) * config_.width;
    ActivationVector pooled(kHiddenChannels, 0.0);
    // Response energy (absolute mean) per channel. The kernels are zero-DC,
    // so a signed mean would cancel to nearly zero on every scene; the
    // rectified mean measures how strongly each structure detector fires.
    for (int ch = 0; ch < kHiddenChannels; ++ch) {
        double sum = 0.0;
        for (size_t i = 0; i < plane; ++i) sum += std::abs(hidden[ch * plane + i]);
        pooled[ch] = sum / static_cast<double>(plane);
    }
    return pooled;
}

std::vector<ActivationVector> build_activation_corpus(const Model& model, int n, uint64_t seed) {
    if (n < 1) throw std::invalid_argument("activation corpus needs n >= 1");
    std::vector<ActivationVector> corpus;
    corpus.reserve(n);
    for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, "corpus-genes", static_cast<uint64_t>(i)));
        sim::Genome g;
        g.genes.resize(sim::kSceneGenomeLength);
        for (double& v : g.genes) v = rng.uniform();
        g.seed = derive_seed(seed, "corpus-scene", static_cast<uint64_t>(i));
        const auto scene =
            sim::render_scene(sim::genome_to_scene(g), g.seed, model.height(), model.width());
        corpus.push_back(model.activations(scene.image));
    }
    return corpus;
}

}  // namespace orbit::model
