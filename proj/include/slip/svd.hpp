#pragma once

#include <vector>

#include "slip/matrix.hpp"

namespace slip {

/// Thin SVD, W = U * diag(sigma) * V^T with r = min(rows, cols) columns.
/// Singular values are non-negative and descending. Each pair (u_j, v_j) is
/// sign-normalized so the largest-magnitude entry of u_j is positive (lowest
/// index wins ties), making the factorization deterministic.
struct SvdResult {
    Mat u;                     // rows x r
    std::vector<double> sigma; // length r, descending
    Mat v;                     // cols x r
};

SvdResult svd(const Mat& w);

/// Singular values only, descending.
std::vector<double> singular_values(const Mat& w);

/// Number of singular values above 1e-12 * sigma_1.
size_t numerical_rank(const std::vector<double>& sigma);

} // namespace slip
