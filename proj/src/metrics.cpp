#include "orbit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "orbit/rng.hpp"

namespace orbit::metrics {

Image add_gaussian_noise(const Image& image, double variance, uint64_t seed) {
    if (variance < 0.0) throw std::invalid_argument("noise variance must be non-negative");
    Image out = image;
    if (variance == 0.0) return out;
    Rng rng(seed);
    for (double& p : out.data) {
        p = std::clamp(p + rng.gaussian(0.0, variance), 0.0, 1.0);
    }
    return out;
}

double miou(const Mask& predicted, const Mask& reference, int num_classes) {
    if (!predicted.same_shape(reference)) {
        throw std::invalid_argument("miou: mask dimensions differ");
    }
    if (num_classes < 1) throw std::invalid_argument("miou: num_classes must be positive");
    std::vector<int64_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    for (size_t i = 0; i < predicted.data.size(); ++i) {
        const int p = predicted.data[i];
        const int t = reference.data[i];
        if (p >= num_classes || t >= num_classes) {
            throw std::invalid_argument("miou: label out of range");
        }
        if (p == t) {
            ++tp[p];
        } else {
            ++fp[p];
            ++fn[t];
        }
    }
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < num_classes; ++c) {
        const int64_t denom = tp[c] + fp[c] + fn[c];
        if (denom == 0) continue;  // class absent from both masks
        sum += static_cast<double>(tp[c]) / static_cast<double>(denom);
        ++present;
    }
    return present == 0 ? 1.0 : sum / present;
}

double flip_consistency(const model::Model& m, const Image& image) {
    const auto pred = m.predict(image);
    const auto pred_flip = m.predict(hflip_grid(image));
    return miou(hflip_grid(pred.labels), pred_flip.labels, m.num_classes());
}

double noise_consistency_seg(const model::Model& m, const Image& image, double variance,
                             uint64_t seed) {
    const auto pred = m.predict(image);
    const auto pred_noise = m.predict(add_gaussian_noise(image, variance, seed));
    return miou(pred.labels, pred_noise.labels, m.num_classes());
}

double noise_consistency_reg(double y, double y_noise) {
    if (!std::isfinite(y) || !std::isfinite(y_noise)) {
        throw std::invalid_argument("noise_consistency_reg: inputs must be finite");
    }
    return 1.0 / (std::abs(y - y_noise) + 1.0);
}

double dsa(const model::ActivationVector& act,
           const std::vector<model::ActivationVector>& train_acts) {
    if (train_acts.empty()) throw std::invalid_argument("dsa: empty training corpus");
    double best_sq = std::numeric_limits<double>::infinity();
    for (const auto& train : train_acts) {
        if (train.size() != act.size()) {
            throw std::invalid_argument("dsa: activation dimensions differ");
        }
        double sq = 0.0;
        for (size_t i = 0; i < act.size(); ++i) {
            const double d = act[i] - train[i];
            sq += d * d;
        }
        best_sq = std::min(best_sq, sq);
    }
    return std::sqrt(best_sq);
}

double mcd_uncertainty(const model::Model& m, const Image& image,
                       const std::vector<uint64_t>& pass_seeds) {
    const int passes = static_cast<int>(pass_seeds.size());
    if (passes < 2) throw std::invalid_argument("mcd_uncertainty: need at least 2 passes");
    const size_t pixels = image.data.size();
    std::vector<double> sum(pixels, 0.0), sum_sq(pixels, 0.0);
    for (const uint64_t seed : pass_seeds) {
        const auto pred = m.predict_with_dropout(image, seed);
        for (size_t p = 0; p < pixels; ++p) {
            double v;
            if (pred.has_scores()) {
                const int cls = pred.labels.data[p];
                v = pred.scores[p * pred.num_classes + cls];
            } else {
                v = static_cast<double>(pred.labels.data[p]) / (pred.num_classes - 1);
            }
            sum[p] += v;
            sum_sq[p] += v * v;
        }
    }
    double total = 0.0;
    for (size_t p = 0; p < pixels; ++p) {
        const double mean = sum[p] / passes;
        const double var = sum_sq[p] / passes - mean * mean;
        total += std::max(var, 0.0);  // guard tiny negative rounding
    }
    return total / static_cast<double>(pixels);
}

double mcd_uncertainty(const model::Model& m, const Image& image, int passes,
                       uint64_t base_seed) {
    if (passes < 2) throw std::invalid_argument("mcd_uncertainty: need at least 2 passes");
    std::vector<uint64_t> seeds(passes);
    for (int t = 0; t < passes; ++t) seeds[t] = base_seed + static_cast<uint64_t>(t);
    return mcd_uncertainty(m, image, seeds);
}

FeatureVector extract_features(const Image& image) {
    constexpr int kCells = 8;
    FeatureVector out;
    out.reserve(kCells * kCells * 3);
    auto pixel = [&](int r, int c) {
        return image.at(std::clamp(r, 0, image.h - 1), std::clamp(c, 0, image.w - 1));
    };
    for (int ci = 0; ci < kCells; ++ci) {
        const int r0 = ci * image.h / kCells;
        const int r1 = (ci + 1) * image.h / kCells;
        for (int cj = 0; cj < kCells; ++cj) {
            const int c0 = cj * image.w / kCells;
            const int c1 = (cj + 1) * image.w / kCells;
            const int n = (r1 - r0) * (c1 - c0);
            if (n == 0) {
                out.insert(out.end(), {0.0, 0.0, 0.0});
                continue;
            }
            double sum = 0.0, sum_sq = 0.0, grad_sum = 0.0;
            for (int r = r0; r < r1; ++r) {
                for (int c = c0; c < c1; ++c) {
                    const double v = image.at(r, c);
                    sum += v;
                    sum_sq += v * v;
                    const double gx = 0.5 * (pixel(r, c + 1) - pixel(r, c - 1));
                    const double gy = 0.5 * (pixel(r + 1, c) - pixel(r - 1, c));
                    grad_sum += std::sqrt(gx * gx + gy * gy);
                }
            }
            const double mean = sum / n;
            const double var = std::max(sum_sq / n - mean * mean, 0.0);
            out.push_back(mean);
            out.push_back(std::sqrt(var));
            out.push_back(grad_sum / n);
        }
    }
    return out;
}

double feature_distance(const FeatureVector& a, const FeatureVector& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("feature_distance: vector lengths differ");
    }
    double sq = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sq += d * d;
    }
    return std::sqrt(sq);
}

}  // namespace orbit::metrics
