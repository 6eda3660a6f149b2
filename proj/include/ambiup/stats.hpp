#pragma once

#include <vector>

namespace ambiup {

struct WilcoxonResult {
    double statistic = 0.0;  // min(W+, W-)
    double p_value = 1.0;
    bool significant = false;
    int n = 0;  // pairs remaining after zero differences are dropped
};

/// Two-sided paired Wilcoxon signed-rank test. Zero differences are dropped;
/// ties get midranks. Exact null distribution (conditioned on the observed
/// ranks) for n <= 25, normal approximation with tie correction above, no
/// continuity correction. Throws if fewer than 5 non-zero differences remain.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b,
                                    double alpha = 0.05);

double normal_cdf(double z);

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);

/// Student-t quantile: t such that P(T <= t) = p for dof degrees of freedom.
double student_t_quantile(double p, int dof);

double mean_of(const std::vector<double>& v);
double sample_stddev(const std::vector<double>& v);

}  // namespace ambiup
