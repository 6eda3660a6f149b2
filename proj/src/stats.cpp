#include "ambiup/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ambiup {

namespace {

// Midranks of |d| (ties share the average rank), doubled so they are integers.
std::vector<int> doubled_midranks(const std::vector<double>& absd) {
    const std::size_t n = absd.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return absd[x] < absd[y]; });
    std::vector<int> rank2(n, 0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && absd[order[j + 1]] == absd[order[i]]) ++j;
        // ranks i+1 .. j+1 averaged; doubled: (i+1 + j+1)
        const int doubled = static_cast<int>(i + j + 2);
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = doubled;
        i = j + 1;
    }
    return rank2;
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / 1.4142135623730950488016887242097); }

namespace {

double beta_cf(double a, double b, double x) {
    // Lentz continued fraction for the incomplete beta.
    const double tiny = 1e-300;
    const int max_iter = 300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-14) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cf(a, b, x) / a;
    }
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) +
                          b * std::log(1.0 - x) + a * std::log(x)) *
                     beta_cf(b, a, 1.0 - x) / b;
}

double student_t_quantile(double p, int dof) {
    if (dof < 1) throw std::invalid_argument("student_t_quantile: dof must be >= 1");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("student_t_quantile: p outside (0, 1)");
    if (p == 0.5) return 0.0;
    const bool upper = p > 0.5;
    const double tail = upper ? 1.0 - p : p;  // one-sided tail mass
    // P(T > t) = 0.5 * I_{v/(v+t^2)}(v/2, 1/2) for t >= 0; bisect on t.
    const double v = static_cast<double>(dof);
    auto tail_prob = [&](double t) { return 0.5 * incomplete_beta(v / 2.0, 0.5, v / (v + t * t)); };
    double lo = 0.0, hi = 1.0;
    while (tail_prob(hi) > tail && hi < 1e12) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (tail_prob(mid) > tail) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double t = 0.5 * (lo + hi);
    return upper ? t : -t;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b,
                                    double alpha) {
    if (a.size() != b.size())
        throw std::invalid_argument("wilcoxon_signed_rank: inputs must be paired");
    std::vector<double> absd;
    std::vector<int> sign;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d == 0.0) continue;
        absd.push_back(std::abs(d));
        sign.push_back(d > 0.0 ? 1 : -1);
    }
    const int n = static_cast<int>(absd.size());
    if (n < 5)
        throw std::invalid_argument("wilcoxon_signed_rank: fewer than 5 non-zero differences");

    const std::vector<int> rank2 = doubled_midranks(absd);
    long long w2_pos = 0, total2 = 0;
    for (int i = 0; i < n; ++i) {
        total2 += rank2[static_cast<std::size_t>(i)];
        if (sign[static_cast<std::size_t>(i)] > 0) w2_pos += rank2[static_cast<std::size_t>(i)];
    }
    const double w_pos = static_cast<double>(w2_pos) / 2.0;
    const double w_neg = static_cast<double>(total2 - w2_pos) / 2.0;

    WilcoxonResult result;
    result.n = n;
    result.statistic = std::min(w_pos, w_neg);

    if (n <= 25) {
        // Exact distribution of the doubled statistic under random signs.
        std::vector<double> dp(static_cast<std::size_t>(total2) + 1, 0.0);
        dp[0] = 1.0;
        for (int i = 0; i < n; ++i) {
            const int r = rank2[static_cast<std::size_t>(i)];
            for (long long s = total2; s >= r; --s)
                dp[static_cast<std::size_t>(s)] += dp[static_cast<std::size_t>(s - r)];
        }
        const double denom = std::pow(2.0, n);
        double p_le = 0.0, p_ge = 0.0;
        for (long long s = 0; s <= total2; ++s) {
            if (s <= w2_pos) p_le += dp[static_cast<std::size_t>(s)];
            if (s >= w2_pos) p_ge += dp[static_cast<std::size_t>(s)];
        }
        result.p_value = std::min(1.0, 2.0 * std::min(p_le, p_ge) / denom);
    } else {
        // Normal approximation; Var(W+) = sum(r_i^2) / 4 absorbs ties.
        const double mu = static_cast<double>(total2) / 4.0;
        double var = 0.0;
        for (int r : rank2) var += 0.25 * (static_cast<double>(r) / 2.0) * (static_cast<double>(r) / 2.0);
        const double z = (w_pos - mu) / std::sqrt(var);
        result.p_value = std::min(1.0, 2.0 * (1.0 - normal_cdf(std::abs(z))));
    }
    result.significant = result.p_value < alpha;
    return result;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean_of: empty input");
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

double sample_stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace ambiup
