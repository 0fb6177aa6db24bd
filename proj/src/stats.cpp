#include "orbit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>

namespace orbit::stats {

const char* effect_class_name(EffectClass c) {
    switch (c) {
        case EffectClass::kNegligible: return "negligible";
        case EffectClass::kSmall: return "small";
        case EffectClass::kMedium: return "medium";
        case EffectClass::kLarge: return "large";
    }
    throw std::logic_error("unreachable effect class");
}

std::vector<double> midranks(const std::vector<double>& values) {
    const size_t n = values.size();
    std::vector<int> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

namespace {

double normal_sf(double z) {  // P(Z > z)
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

// Tie-group sizes of a sorted value list.
std::vector<int64_t> tie_groups(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::vector<int64_t> groups;
    size_t i = 0;
    while (i < values.size()) {
        size_t j = i;
        while (j + 1 < values.size() && values[j + 1] == values[i]) ++j;
        groups.push_back(static_cast<int64_t>(j - i + 1));
        i = j + 1;
    }
    return groups;
}

}  // namespace

MannWhitneyResult mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y,
                                 PMethod method) {
    if (x.empty() || y.empty()) {
        throw std::invalid_argument("mann_whitney_u: samples must be non-empty");
    }
    const int nx = static_cast<int>(x.size());
    const int ny = static_cast<int>(y.size());
    std::vector<double> combined = x;
    combined.insert(combined.end(), y.begin(), y.end());
    const auto ranks = midranks(combined);
    double rank_sum_x = 0.0;
    for (int i = 0; i < nx; ++i) rank_sum_x += ranks[i];
    const double u = rank_sum_x - 0.5 * nx * (nx + 1);
    const double mean_u = 0.5 * nx * ny;

    MannWhitneyResult result;
    result.u = u;
    const double observed_dev = std::abs(u - mean_u);

    const bool exact = method == PMethod::kExact ||
                       (method == PMethod::kAuto && nx + ny <= 20);
    if (exact && nx + ny > 24) {
        throw std::invalid_argument("mann_whitney_u: exact enumeration limited to n_x + n_y <= 24");
    }
    if (exact) {
        // Exact: enumerate every assignment of nx of the N midranks to x and
        // count assignments at least as extreme as observed.
        result.exact = true;
        const int total = nx + ny;
        int64_t extreme = 0, count = 0;
        std::function<void(int, int, double)> walk = [&](int pos, int chosen, double sum) {
            if (chosen == nx) {
                ++count;
                const double dev = std::abs(sum - 0.5 * nx * (nx + 1) - mean_u);
                if (dev >= observed_dev - 1e-12) ++extreme;
                return;
            }
            if (total - pos < nx - chosen) return;
            walk(pos + 1, chosen + 1, sum + ranks[pos]);
            walk(pos + 1, chosen, sum);
        };
        walk(0, 0, 0.0);
        result.p_two_sided = static_cast<double>(extreme) / static_cast<double>(count);
        return result;
    }

    // Normal approximation with tie-corrected variance and continuity correction.
    const double n_total = nx + ny;
    double tie_term = 0.0;
    for (const int64_t t : tie_groups(combined)) {
        tie_term += static_cast<double>(t) * t * t - static_cast<double>(t);
    }
    const double variance =
        (static_cast<double>(nx) * ny / 12.0) *
        ((n_total + 1.0) - tie_term / (n_total * (n_total - 1.0)));
    if (variance <= 0.0) {
        result.p_two_sided = 1.0;
        return result;
    }
    const double z = std::max(observed_dev - 0.5, 0.0) / std::sqrt(variance);
    result.p_two_sided = std::min(1.0, 2.0 * normal_sf(z));
    return result;
}

double vargha_delaney_a12(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.empty() || y.empty()) {
        throw std::invalid_argument("vargha_delaney_a12: samples must be non-empty");
    }
    double wins = 0.0;
    for (const double xi : x) {
        for (const double yj : y) {
            if (xi > yj) {
                wins += 1.0;
            } else if (xi == yj) {
                wins += 0.5;
            }
        }
    }
    return wins / (static_cast<double>(x.size()) * static_cast<double>(y.size()));
}

EffectClass classify_a12(double a) {
    if (a < 0.0 || a > 1.0) throw std::invalid_argument("classify_a12: value outside [0,1]");
    if (a <= 0.29 || a >= 0.71) return EffectClass::kLarge;
    if (a <= 0.36 || a >= 0.64) return EffectClass::kMedium;
    if (a <= 0.44 || a >= 0.56) return EffectClass::kSmall;
    return EffectClass::kNegligible;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs, PMethod method) {
    std::vector<double> nonzero;
    for (const double d : diffs) {
        if (d != 0.0) nonzero.push_back(d);
    }
    if (nonzero.empty()) {
        throw std::invalid_argument("wilcoxon_signed_rank: all differences are zero");
    }
    const int n = static_cast<int>(nonzero.size());
    std::vector<double> abs_diffs(nonzero.size());
    for (size_t i = 0; i < nonzero.size(); ++i) abs_diffs[i] = std::abs(nonzero[i]);
    const auto ranks = midranks(abs_diffs);

    WilcoxonResult result;
    result.n_used = n;
    for (size_t i = 0; i < nonzero.size(); ++i) {
        if (nonzero[i] > 0.0) {
            result.r_plus += ranks[i];
        } else {
            result.r_minus += ranks[i];
        }
    }
    const double mean_w = 0.25 * n * (n + 1);
    const double observed_dev = std::abs(result.r_plus - mean_w);

    const bool exact = method == PMethod::kExact || (method == PMethod::kAuto && n <= 12);
    if (exact && n > 20) {
        throw std::invalid_argument("wilcoxon_signed_rank: exact enumeration limited to n <= 20");
    }
    if (exact) {
        // Exact: enumerate all 2^n sign assignments of the ranks.
        result.exact = true;
        const int64_t total = int64_t{1} << n;
        int64_t extreme = 0;
        for (int64_t mask = 0; mask < total; ++mask) {
            double sum = 0.0;
            for (int i = 0; i < n; ++i) {
                if (mask & (int64_t{1} << i)) sum += ranks[i];
            }
            if (std::abs(sum - mean_w) >= observed_dev - 1e-12) ++extreme;
        }
        result.p_two_sided = static_cast<double>(extreme) / static_cast<double>(total);
        return result;
    }

    double tie_term = 0.0;
    for (const int64_t t : tie_groups(abs_diffs)) {
        tie_term += static_cast<double>(t) * t * t - static_cast<double>(t);
    }
    const double variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if (variance <= 0.0) {
        result.p_two_sided = 1.0;
        return result;
    }
    const double z = std::max(observed_dev - 0.5, 0.0) / std::sqrt(variance);
    result.p_two_sided = std::min(1.0, 2.0 * normal_sf(z));
    return result;
}

double e_hat(double r_plus, double r_minus) {
    if (r_plus < 0.0 || r_minus < 0.0 || r_plus + r_minus <= 0.0) {
        throw std::invalid_argument("e_hat: rank sums must be non-negative with positive total");
    }
    return r_plus / (r_plus + r_minus);
}

double mean(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("mean of empty sample");
    double sum = 0.0;
    for (const double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of empty sample");
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace orbit::stats
