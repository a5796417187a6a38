#include "slip/svd.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "slip/errors.hpp"

namespace slip {

namespace {

Eigen::MatrixXd to_eigen(const Mat& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (size_t r = 0; r < m.rows(); ++r)
        for (size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
    return e;
}

Mat from_eigen(const Eigen::MatrixXd& e) {
    Mat m(static_cast<size_t>(e.rows()), static_cast<size_t>(e.cols()));
    for (Eigen::Index r = 0; r < e.rows(); ++r)
        for (Eigen::Index c = 0; c < e.cols(); ++c)
            m(static_cast<size_t>(r), static_cast<size_t>(c)) = e(r, c);
    return m;
}

} // namespace

SvdResult svd(const Mat& w) {
    for (double v : w.data())
        if (!std::isfinite(v)) throw DomainError("svd: non-finite entry");

    Eigen::MatrixXd e = to_eigen(w);
    Eigen::JacobiSVD<Eigen::MatrixXd> solver(e, Eigen::ComputeThinU | Eigen::ComputeThinV);

    SvdResult out;
    out.u = from_eigen(solver.matrixU());
    out.v = from_eigen(solver.matrixV());
    out.sigma.assign(solver.singularValues().data(),
                     solver.singularValues().data() + solver.singularValues().size());

    // Sign convention: largest-magnitude entry of each u_j positive, lowest
    // index among ties.
    for (size_t j = 0; j < out.sigma.size(); ++j) {
        size_t arg = 0;
        double best = 0.0;
        for (size_t i = 0; i < out.u.rows(); ++i) {
            double m = std::fabs(out.u(i, j));
            if (m > best) {
                best = m;
                arg = i;
            }
        }
        if (out.u(arg, j) < 0.0) {
            for (size_t i = 0; i < out.u.rows(); ++i) out.u(i, j) = -out.u(i, j);
            for (size_t i = 0; i < out.v.rows(); ++i) out.v(i, j) = -out.v(i, j);
        }
    }

    // The solver has no explicit failure signal; verify reconstruction so a
    // non-converged factorization cannot slip through.
    Mat sigma_vt(out.sigma.size(), w.cols());
    for (size_t j = 0; j < out.sigma.size(); ++j)
        for (size_t c = 0; c < w.cols(); ++c) sigma_vt(j, c) = out.sigma[j] * out.v(c, j);
    if (relative_frobenius_error(out.u * sigma_vt, w) > 1e-10)
        throw ConvergenceError("svd: reconstruction exceeds tolerance");

    return out;
}

std::vector<double> singular_values(const Mat& w) {
    for (double v : w.data())
        if (!std::isfinite(v)) throw DomainError("singular_values: non-finite entry");
    Eigen::JacobiSVD<Eigen::MatrixXd> solver(to_eigen(w));
    return {solver.singularValues().data(),
            solver.singularValues().data() + solver.singularValues().size()};
}

size_t numerical_rank(const std::vector<double>& sigma) {
    if (sigma.empty()) return 0;
    double cutoff = 1e-12 * sigma.front();
    size_t r = 0;
    while (r < sigma.size() && sigma[r] > cutoff) ++r;
    return r;
}

} // namespace slip
