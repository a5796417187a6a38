#include "slip/stats.hpp"

#include <cmath>
#include <limits>

#include "slip/errors.hpp"

namespace slip {

namespace {

// Series expansion of P(a,x), valid for x < a+1.
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a,x), valid for x >= a+1.
double gamma_q_cf(double a, double x) {
    const double tiny = std::numeric_limits<double>::min() / 1e-30;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

} // namespace

double regularized_gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw DomainError("regularized_gamma_q: invalid arguments");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

double chi_square_sf(double x, double dof) { return regularized_gamma_q(dof / 2.0, x / 2.0); }

ChiSquareResult chi_square_uniform(const std::vector<uint64_t>& samples, uint64_t bins) {
    if (bins < 2) throw DomainError("chi_square_uniform: need at least 2 bins");
    if (samples.size() < 5 * bins)
        throw InsufficientSamples("chi_square_uniform: too few samples for the bin count");
    std::vector<size_t> counts(bins, 0);
    for (uint64_t v : samples) {
        if (v >= bins) throw DomainError("chi_square_uniform: sample outside [0, bins)");
        ++counts[v];
    }
    double expected = static_cast<double>(samples.size()) / static_cast<double>(bins);
    double stat = 0.0;
    for (size_t c : counts) {
        double d = static_cast<double>(c) - expected;
        stat += d * d / expected;
    }
    ChiSquareResult r;
    r.statistic = stat;
    r.dof = bins - 1;
    r.samples = samples.size();
    r.p_value = chi_square_sf(stat, static_cast<double>(r.dof));
    return r;
}

double plugin_mutual_information_bits(const std::vector<uint64_t>& a,
                                      const std::vector<uint64_t>& b, uint64_t L) {
    if (a.size() != b.size()) throw DimensionMismatch("mutual information: unpaired samples");
    if (a.empty()) throw InsufficientSamples("mutual information: no samples");
    const size_t n = a.size();
    std::vector<size_t> joint(static_cast<size_t>(L) * L, 0), ma(L, 0), mb(L, 0);
    for (size_t i = 0; i < n; ++i) {
        if (a[i] >= L || b[i] >= L) throw DomainError("mutual information: sample outside [0, L)");
        ++joint[a[i] * L + b[i]];
        ++ma[a[i]];
        ++mb[b[i]];
    }
    double mi = 0.0;
    const double dn = static_cast<double>(n);
    for (uint64_t i = 0; i < L; ++i)
        for (uint64_t j = 0; j < L; ++j) {
            size_t c = joint[i * L + j];
            if (c == 0) continue;
            double pij = static_cast<double>(c) / dn;
            double pi = static_cast<double>(ma[i]) / dn;
            double pj = static_cast<double>(mb[j]) / dn;
            mi += pij * std::log2(pij / (pi * pj));
        }
    return mi;
}

double mi_independence_threshold(uint64_t L, size_t n_samples) {
    // Under independence, 2 N ln2 * MI_hat is approximately chi-square with
    // (L-1)^2 dof; bias bound L^2/(2 N ln 2) plus 3 sigma of that law.
    const double n = static_cast<double>(n_samples);
    const double l = static_cast<double>(L);
    const double denom = 2.0 * n * std::log(2.0);
    return l * l / denom + 3.0 * std::sqrt(2.0) * (l - 1.0) / denom;
}

} // namespace slip
