#pragma once

#include <cstdint>
#include <vector>

#include "orbit/grid.hpp"
#include "orbit/model.hpp"

namespace orbit::metrics {

using FeatureVector = std::vector<double>;

// Reverses column order per row. For segmentation labels this is the
// "transpose" of a prediction under horizontal flip.
template <typename T>
Grid<T> hflip_grid(const Grid<T>& g) {
    Grid<T> out(g.h, g.w);
    for (int r = 0; r < g.h; ++r) {
        for (int c = 0; c < g.w; ++c) {
            out.at(r, c) = g.at(r, g.w - 1 - c);
        }
    }
    return out;
}

// Adds i.i.d. N(0, variance) noise per pixel, clamped to [0,1].
Image add_gaussian_noise(const Image& image, double variance, uint64_t seed);

// Mean IoU over classes present in either mask; absent classes are excluded.
double miou(const Mask& predicted, const Mask& reference, int num_classes);

// mIoU between the flipped prediction and the prediction on the flipped image.
double flip_consistency(const model::Model& m, const Image& image);

// mIoU between predictions on the original and the noised image.
double noise_consistency_seg(const model::Model& m, const Image& image, double variance,
                             uint64_t seed);

// 1 / (|y - y_noise| + 1), for regression-style outputs.
double noise_consistency_reg(double y, double y_noise);

// Minimum Euclidean distance from act to any training activation vector.
double dsa(const model::ActivationVector& act,
           const std::vector<model::ActivationVector>& train_acts);

// Monte Carlo dropout uncertainty: per-pixel population variance of the
// per-pass pixel scalar (the pass's predicted-class score, or the label
// normalized by C-1 when scores are absent), averaged over all pixels.
// Pass seeds are given explicitly; the (M, base_seed) form uses base_seed+t.
double mcd_uncertainty(const model::Model& m, const Image& image,
                       const std::vector<uint64_t>& pass_seeds);
double mcd_uncertainty(const model::Model& m, const Image& image, int passes,
                       uint64_t base_seed);

// Built-in feature extractor: 8x8 cell grid, per cell [mean intensity,
// intensity standard deviation, gradient-magnitude mean] -> 192 values.
FeatureVector extract_features(const Image& image);

// Euclidean distance between feature vectors.
double feature_distance(const FeatureVector& a, const FeatureVector& b);

}  // namespace orbit::metrics
