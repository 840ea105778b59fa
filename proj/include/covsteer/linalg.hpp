#pragma once

#include <Eigen/Dense>

#include "covsteer/errors.hpp"

namespace covsteer::linalg {

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
    return 0.5 * (m + m.transpose());
}

/// Relative departure from symmetry, ||M - M^T|| / max(1, ||M||).
inline double asymmetry(const Eigen::MatrixXd& m) {
    return (m - m.transpose()).norm() / std::max(1.0, m.norm());
}

/// Symmetric square root with eigenvalues floored at zero.
inline Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// Inverse square root of a symmetric positive definite matrix.
inline Eigen::MatrixXd inv_sqrt_spd(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw NumericalError("inverse square root requested for a non-PD matrix");
    Eigen::VectorXd ev = es.eigenvalues().cwiseSqrt().cwiseInverse();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline double min_eigenvalue(const Eigen::MatrixXd& sym) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(symmetrize(sym),
                                                          Eigen::EigenvaluesOnly)
        .eigenvalues()
        .minCoeff();
}

inline double max_eigenvalue(const Eigen::MatrixXd& sym) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(symmetrize(sym),
                                                          Eigen::EigenvaluesOnly)
        .eigenvalues()
        .maxCoeff();
}

inline bool is_positive_definite(const Eigen::MatrixXd& sym) {
    if (sym.rows() != sym.cols()) return false;
    Eigen::LLT<Eigen::MatrixXd> llt(symmetrize(sym));
    return llt.info() == Eigen::Success;
}

/// N^{1/2} P N^{1/2} for symmetric PSD N; the stable way to compare P
/// against N^{-1} in the Loewner order without forming the inverse.
inline Eigen::MatrixXd congruence(const Eigen::MatrixXd& n_psd, const Eigen::MatrixXd& p) {
    Eigen::MatrixXd root = sqrt_psd(n_psd);
    return symmetrize(root * p * root);
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Column-major stacking.
inline Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
    return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

inline Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

/// Numerical rank via SVD with threshold tol * sigma_max.
inline Eigen::Index rank_svd(const Eigen::MatrixXd& m, double tol) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol * sv(0)) ++r;
    return r;
}

}  // namespace covsteer::linalg
