#pragma once

#include <string>
#include <vector>

namespace orbit::stats {

enum class EffectClass { kNegligible, kSmall, kMedium, kLarge };

const char* effect_class_name(EffectClass c);

struct MannWhitneyResult {
    double u = 0.0;  // U statistic of the first sample
    double p_two_sided = 1.0;
    bool exact = false;
};

// How the two-sided p-value is computed. kAuto picks exact enumeration at
// small sample sizes and the normal approximation otherwise.
enum class PMethod { kAuto, kExact, kApprox };

// Mann-Whitney U via midrank sums. Exact two-sided p by full enumeration of
// group assignments when n_x + n_y <= 20; otherwise normal approximation
// with tie and continuity corrections.
MannWhitneyResult mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y,
                                 PMethod method = PMethod::kAuto);

// P(X > Y) + 0.5 P(X = Y) over all cross pairs.
double vargha_delaney_a12(const std::vector<double>& x, const std::vector<double>& y);

// Band classification of A12 (symmetric around 0.5):
// large <= 0.29 / >= 0.71; medium to 0.36 / from 0.64; small to 0.44 / from
// 0.56; negligible in between.
EffectClass classify_a12(double a);

struct WilcoxonResult {
    double r_plus = 0.0;
    double r_minus = 0.0;
    double p_two_sided = 1.0;
    int n_used = 0;  // pairs remaining after dropping zero differences
    bool exact = false;
};

// Wilcoxon signed-rank on paired differences. Zero differences are dropped;
// |d| ranked with midranks. Exact p by sign enumeration for n <= 12,
// otherwise normal approximation with tie and continuity corrections.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs,
                                    PMethod method = PMethod::kAuto);

// Paired effect size R+ / (R+ + R-), interpreted with the A12 bands.
double e_hat(double r_plus, double r_minus);

struct ComparisonResult {
    double statistic = 0.0;  // U (unpaired) or R+ (paired)
    double p_value = 1.0;
    double effect = 0.5;  // A12 (unpaired) or E-hat (paired)
    EffectClass effect_class = EffectClass::kNegligible;
    int n_x = 0;
    int n_y = 0;
    bool paired = false;
    double r_plus = 0.0;   // populated for paired comparisons
    double r_minus = 0.0;
};

double mean(const std::vector<double>& values);
double median(std::vector<double> values);

// Midranks of the given values (average rank across ties), 1-based.
std::vector<double> midranks(const std::vector<double>& values);

}  // namespace orbit::stats
