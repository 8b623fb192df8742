#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "bffg/errors.hpp"

// Small dense-matrix helpers shared across modules. All inputs are expected to
// be desk-scale (dimensions in the tens at most), so eigendecompositions are
// acceptable where they buy robustness.
namespace bffg::linalg {

// Asymmetry beyond `tol` (absolute, max norm) is rejected; otherwise returns
// the symmetric average (A + A^T)/2.
inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& A, double tol, const std::string& what) {
    if (A.rows() != A.cols()) throw ModelError(what + ": matrix must be square");
    double asym = (A - A.transpose()).cwiseAbs().maxCoeff();
    if (!(asym <= tol)) throw ModelError(what + ": matrix asymmetry " + std::to_string(asym) + " exceeds tolerance");
    return 0.5 * (A + A.transpose());
}

// C = L L^T for symmetric positive semidefinite C, via eigendecomposition with
// clamping of roundoff-negative eigenvalues. Rejects genuinely indefinite input.
inline Eigen::MatrixXd psd_half_factor(const Eigen::MatrixXd& C, const std::string& what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    if (es.info() != Eigen::Success) throw NumericalError(what + ": eigendecomposition failed");
    Eigen::VectorXd lam = es.eigenvalues();
    const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
    for (int i = 0; i < lam.size(); ++i) {
        if (lam[i] < -1e-10 * scale)
            throw ModelError(what + ": matrix is not positive semidefinite");
        if (lam[i] < 0) lam[i] = 0;
    }
    return es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

inline void check_psd(const Eigen::MatrixXd& C, const std::string& what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError(what + ": eigendecomposition failed");
    const Eigen::VectorXd& lam = es.eigenvalues();
    const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
    if (lam.minCoeff() < -1e-10 * scale)
        throw ModelError(what + ": matrix is not positive semidefinite");
}

// log det of the factored matrix; llt must have succeeded.
inline double logdet(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    double s = 0.0;
    const auto& L = llt.matrixLLT();
    for (int i = 0; i < L.rows(); ++i) s += std::log(L(i, i));
    return 2.0 * s;
}

// Cholesky that throws instead of silently returning a bad factor.
inline Eigen::LLT<Eigen::MatrixXd> chol_pd(const Eigen::MatrixXd& A, const std::string& what) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success)
        throw NumericalError(what + ": matrix is not positive definite");
    return llt;
}

inline Eigen::VectorXd kron(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Eigen::VectorXd out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i)
        out.segment(i * b.size(), b.size()) = a[i] * b;
    return out;
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    Eigen::MatrixXd out(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return out;
}

inline Eigen::MatrixXd block_diag(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(A.rows() + B.rows(), A.cols() + B.cols());
    out.topLeftCorner(A.rows(), A.cols()) = A;
    out.bottomRightCorner(B.rows(), B.cols()) = B;
    return out;
}

inline Eigen::VectorXd concat(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Eigen::VectorXd out(a.size() + b.size());
    out << a, b;
    return out;
}

} // namespace bffg::linalg
