// linalg.hpp: small dense complex helpers shared by every dhs module.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

namespace dhs {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

inline constexpr cplx I_unit{0.0, 1.0};

// ------------------------------- errors --------------------------------------

// Malformed or inadmissible input (singular coefficients, bad boundary data, ...).
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Site index outside what the extension policy can reach.
struct DomainError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// Generic numerical failure.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A pencil zA(k)+B(k) block that had to be inverted was numerically singular.
struct SteppingError : NumericalError {
    SteppingError(const std::string& what, long site, double rc)
        : NumericalError(what + " at k=" + std::to_string(site) +
                         " (rcond=" + std::to_string(rc) + ")"),
          k(site), rcond(rc) {}
    long k;
    double rcond;
};

// ------------------------------ constructors ---------------------------------

inline Mat identity(Eigen::Index n) { return Mat::Identity(n, n); }
inline Mat zeros(Eigen::Index r, Eigen::Index c) { return Mat::Zero(r, c); }

// 2m x 2m symplectic unit J = ((0, I), (-I, 0)).
inline Mat symplectic_unit(int m) {
    Mat J = Mat::Zero(2 * m, 2 * m);
    J.topRightCorner(m, m).setIdentity();
    J.bottomLeftCorner(m, m) = -identity(m);
    return J;
}

inline Mat block_diag(const Mat& a, const Mat& b) {
    Mat out = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    out.topLeftCorner(a.rows(), a.cols()) = a;
    out.bottomRightCorner(b.rows(), b.cols()) = b;
    return out;
}

inline Mat block2x2(const Mat& a, const Mat& b, const Mat& c, const Mat& d) {
    Mat out(a.rows() + c.rows(), a.cols() + b.cols());
    out << a, b, c, d;
    return out;
}

inline Mat vstack(const Mat& top, const Mat& bottom) {
    Mat out(top.rows() + bottom.rows(), top.cols());
    out << top, bottom;
    return out;
}

// ------------------------------ matrix parts ---------------------------------

inline Mat herm_part(const Mat& a) { return (a + a.adjoint()) * 0.5; }

// Im(M) = (M - M^*)/(2i), always Hermitian.
inline Mat im_part(const Mat& a) { return (a - a.adjoint()) / (2.0 * I_unit); }

inline double op_norm(const Mat& a) {
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<Mat> svd(a);
    return svd.singularValues()(0);
}

inline double min_singular(const Mat& a) {
    Eigen::JacobiSVD<Mat> svd(a);
    const auto& s = svd.singularValues();
    return s(s.size() - 1);
}

inline RVec singular_values(const Mat& a) {
    Eigen::JacobiSVD<Mat> svd(a);
    return svd.singularValues();
}

// Eigenvalues of the Hermitian part, ascending.
inline RVec herm_eigenvalues(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(herm_part(a), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

inline double min_herm_eig(const Mat& a) { return herm_eigenvalues(a)(0); }
inline double max_herm_eig(const Mat& a) {
    const RVec ev = herm_eigenvalues(a);
    return ev(ev.size() - 1);
}

// ||A - A^*|| relative to max(1, ||A||).
inline double hermitian_defect(const Mat& a) {
    const double scale = std::max(1.0, a.norm());
    return (a - a.adjoint()).norm() / scale;
}

// Unique Hermitian positive-definite square root (and inverse root) of an HPD matrix.
inline Mat hpd_sqrt(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(herm_part(a));
    RVec ev = es.eigenvalues();
    if (ev(0) <= 0.0) throw InputError("hpd_sqrt: matrix is not positive definite");
    return es.eigenvectors() * ev.cwiseSqrt().cast<cplx>().asDiagonal() *
           es.eigenvectors().adjoint();
}

inline Mat hpd_inv_sqrt(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(herm_part(a));
    RVec ev = es.eigenvalues();
    if (ev(0) <= 0.0) throw InputError("hpd_inv_sqrt: matrix is not positive definite");
    return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().cast<cplx>().asDiagonal() *
           es.eigenvectors().adjoint();
}

// Reciprocal condition number in the 2-norm (exact, via SVD; matrices here are tiny).
inline double rcond(const Mat& a) {
    const RVec s = singular_values(a);
    if (s(0) == 0.0) return 0.0;
    return s(s.size() - 1) / s(0);
}

// Solve a x = b; throws SteppingError when a is numerically singular.
inline Mat checked_solve(const Mat& a, const Mat& b, double rcond_min, long site,
                         const char* what) {
    const double rc = rcond(a);
    if (!(rc >= rcond_min)) throw SteppingError(what, site, rc);
    return a.partialPivLu().solve(b);
}

inline Mat inverse_checked(const Mat& a, double rcond_min, const char* what) {
    const double rc = rcond(a);
    if (!(rc >= rcond_min))
        throw NumericalError(std::string(what) + ": singular matrix (rcond=" +
                             std::to_string(rc) + ")");
    return a.partialPivLu().inverse();
}

inline bool all_finite(const Mat& a) {
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            if (!std::isfinite(a(i, j).real()) || !std::isfinite(a(i, j).imag())) return false;
    return true;
}

// Max column 2-norm.
inline double max_col_norm(const Mat& a) {
    double out = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) out = std::max(out, a.col(j).norm());
    return out;
}

}  // namespace dhs
