#pragma once

#include <cstdint>
#include <vector>

namespace slip {

/// Regularized upper incomplete gamma Q(a, x).
double regularized_gamma_q(double a, double x);

/// Survival function of the chi-square distribution (P[X >= x] with `dof`
/// degrees of freedom).
double chi_square_sf(double x, double dof);

struct ChiSquareResult {
    double statistic = 0.0;
    double p_value = 1.0;
    size_t dof = 0;
    size_t samples = 0;
};

/// Pearson chi-square of observed residues against the uniform distribution
/// on [0, bins).
ChiSquareResult chi_square_uniform(const std::vector<uint64_t>& samples, uint64_t bins);

/// Plug-in (maximum-likelihood) mutual information in bits from paired
/// samples over [0, L) x [0, L).
double plugin_mutual_information_bits(const std::vector<uint64_t>& a,
                                      const std::vector<uint64_t>& b, uint64_t L);

/// Acceptance threshold for the plug-in MI of independent pairs: the
/// estimator's bias bound L^2 / (2 N ln 2) plus three standard deviations of
/// the matching chi-square approximation.
double mi_independence_threshold(uint64_t L, size_t n_samples);

} // namespace slip
