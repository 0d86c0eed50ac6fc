#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

namespace pwactl {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

/// Induced 2-norm (largest singular value). Returns 0 for empty matrices.
inline double spectral_norm(const MatrixXd& M) {
    if (M.size() == 0) return 0.0;
    return M.jacobiSvd().singularValues()(0);
}

/// Smallest eigenvalue of a symmetric matrix.
inline double min_eigenvalue(const MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// Largest eigenvalue of a symmetric matrix.
inline double max_eigenvalue(const MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

inline bool is_positive_definite(const MatrixXd& S) {
    if (S.rows() != S.cols() || S.size() == 0) return false;
    return min_eigenvalue(S) > 0.0;
}

/// R1 = [I_n; 0], lifts the state block into the augmented space.
inline MatrixXd lift_state(int n, int m) {
    MatrixXd R = MatrixXd::Zero(n + m, n);
    R.topRows(n).setIdentity();
    return R;
}

/// R2 = [0; I_m], lifts the input block into the augmented space.
inline MatrixXd lift_input(int n, int m) {
    MatrixXd R = MatrixXd::Zero(n + m, m);
    R.bottomRows(m).setIdentity();
    return R;
}

/// Deterministic low-discrepancy scalar sequence (van der Corput, base b).
inline double radical_inverse(std::uint64_t i, std::uint32_t base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

/// Halton point in [0,1)^dim, using the first `dim` primes as bases.
inline VectorXd halton_point(std::uint64_t index, int dim) {
    static const std::uint32_t primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                           41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};
    VectorXd p(dim);
    for (int d = 0; d < dim; ++d)
        p(d) = radical_inverse(index, primes[d % 24]);
    return p;
}

}  // namespace pwactl
