// system.hpp: discrete Hamiltonian systems  S_rho Psi = (zA + B) Psi,
// their boundary data, validation, special-case constructors and normal forms.
//
//   S_rho = ( 0        rho S^+ )      J = ( 0   I )    J_rho = ( 0    rho )
//           ( rho^- S^-   0    )          ( -I  0 )            ( -rho  0  )
//
// Coefficients live on a finite window [k_min, k_max]; outside it the declared
// Extension policy decides what A(k), B(k), rho(k) mean.

#pragma once

#include "dhs/linalg.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dhs {

using Site = long;

enum class Extension { constant_edge, periodic, error };

inline std::string to_string(Extension e) {
    switch (e) {
        case Extension::constant_edge: return "constant-edge";
        case Extension::periodic: return "periodic";
        case Extension::error: return "error";
    }
    return "?";
}

inline Extension extension_from_string(const std::string& s) {
    if (s == "constant-edge" || s == "constant_edge") return Extension::constant_edge;
    if (s == "periodic") return Extension::periodic;
    if (s == "error") return Extension::error;
    throw InputError("unknown extension policy '" + s + "'");
}

// Closed discrete interval [lo, hi] (lo <= hi).
struct Interval {
    Site lo{0};
    Site hi{0};
    Site size() const { return hi - lo + 1; }
    bool contains(Site k) const { return lo <= k && k <= hi; }
};

struct Tolerances {
    double sym = 1e-12;        // relative Hermiticity defect
    double psd = 1e-10;        // allowed negative eigenvalue of A (relative)
    double rcond_min = 1e-12;  // pencil invertibility threshold
    double def = 1e-12;        // definiteness threshold on the Gram matrix (relative)
};

// Coefficients of the matrix Sturm-Liouville form  (S^+ - I) p (S^- - I) y + q y = z y.
struct JacobiData {
    std::vector<Mat> p;
    std::vector<Mat> q;
};

class HamiltonianSystem {
public:
    HamiltonianSystem(int m, Site k_min, std::vector<Mat> A, std::vector<Mat> B,
                      std::vector<Mat> rho, Extension ext,
                      std::optional<JacobiData> jacobi = std::nullopt)
        : m_(m), k_min_(k_min), A_(std::move(A)), B_(std::move(B)), rho_(std::move(rho)),
          ext_(ext), jacobi_(std::move(jacobi)) {
        if (m_ < 1) throw InputError("HamiltonianSystem: m must be >= 1");
        if (A_.empty()) throw InputError("HamiltonianSystem: empty window");
        if (B_.size() != A_.size() || rho_.size() != A_.size())
            throw InputError("HamiltonianSystem: A, B, rho must cover the same window");
        for (std::size_t i = 0; i < A_.size(); ++i) {
            if (A_[i].rows() != 2 * m_ || A_[i].cols() != 2 * m_ || B_[i].rows() != 2 * m_ ||
                B_[i].cols() != 2 * m_ || rho_[i].rows() != m_ || rho_[i].cols() != m_)
                throw InputError("HamiltonianSystem: coefficient shape mismatch at k=" +
                                 std::to_string(k_min_ + static_cast<Site>(i)));
        }
    }

    int m() const { return m_; }
    Site k_min() const { return k_min_; }
    Site k_max() const { return k_min_ + static_cast<Site>(A_.size()) - 1; }
    Interval window() const { return {k_min(), k_max()}; }
    Extension extension() const { return ext_; }

    bool reachable(Site k) const {
        return ext_ != Extension::error || (k >= k_min() && k <= k_max());
    }

    const Mat& A(Site k) const { return A_[index(k)]; }
    const Mat& B(Site k) const { return B_[index(k)]; }
    const Mat& rho(Site k) const { return rho_[index(k)]; }

    // zA(k) + B(k)
    Mat pencil(cplx z, Site k) const { return z * A(k) + B(k); }

    Mat J_rho(Site k) const {
        const Mat& r = rho(k);
        Mat out = Mat::Zero(2 * m_, 2 * m_);
        out.topRightCorner(m_, m_) = r;
        out.bottomLeftCorner(m_, m_) = -r;
        return out;
    }

    Mat I_rho(Site k) const { return block_diag(rho(k), rho(k)); }

    const std::optional<JacobiData>& jacobi() const { return jacobi_; }

    // Jacobi form L = a S^+ + a^- S^- + b with a = -p^+, b = p^+ + p + q.
    Mat jacobi_a(Site k) const { return -jacobi_p(k + 1); }
    Mat jacobi_b(Site k) const { return jacobi_p(k + 1) + jacobi_p(k) + jacobi_q(k); }
    const Mat& jacobi_p(Site k) const { return require_jacobi().p[index(k)]; }
    const Mat& jacobi_q(Site k) const { return require_jacobi().q[index(k)]; }

    std::size_t index(Site k) const {
        const Site n = static_cast<Site>(A_.size());
        switch (ext_) {
            case Extension::constant_edge:
                return static_cast<std::size_t>(std::clamp(k - k_min_, Site{0}, n - 1));
            case Extension::periodic:
                return static_cast<std::size_t>(((k - k_min_) % n + n) % n);
            case Extension::error:
                if (k < k_min() || k > k_max())
                    throw DomainError("site k=" + std::to_string(k) + " outside window [" +
                                      std::to_string(k_min()) + "," + std::to_string(k_max()) +
                                      "] (extension policy 'error')");
                return static_cast<std::size_t>(k - k_min_);
        }
        throw DomainError("bad extension policy");
    }

private:
    const JacobiData& require_jacobi() const {
        if (!jacobi_) throw InputError("system was not built by jacobi_system");
        return *jacobi_;
    }

    int m_;
    Site k_min_;
    std::vector<Mat> A_, B_, rho_;
    Extension ext_;
    std::optional<JacobiData> jacobi_;
};

// ------------------------------ boundary data --------------------------------

enum class SignClass { nonpositive, nonnegative, zero };

inline std::string to_string(SignClass s) {
    switch (s) {
        case SignClass::nonpositive: return "nonpositive";
        case SignClass::nonnegative: return "nonnegative";
        case SignClass::zero: return "zero";
    }
    return "?";
}

// gamma = (gamma1 gamma2), rank m, gamma gamma^* = I, Im(gamma1 gamma2^*) semidefinite.
// Only make_boundary_data builds these.
class BoundaryData {
public:
    const Mat& gamma1() const { return g1_; }
    const Mat& gamma2() const { return g2_; }
    Mat gamma() const {
        Mat out(g1_.rows(), 2 * g1_.cols());
        out << g1_, g2_;
        return out;
    }
    SignClass sign_class() const { return cls_; }
    int m() const { return static_cast<int>(g1_.rows()); }
    Mat im_form() const { return im_part(g1_ * g2_.adjoint()); }

private:
    BoundaryData(Mat g1, Mat g2, SignClass c) : g1_(std::move(g1)), g2_(std::move(g2)), cls_(c) {}
    friend BoundaryData make_boundary_data(const Mat&, double);

    Mat g1_, g2_;
    SignClass cls_;
};

// delta = (gamma gamma^*)^{-1/2} gamma, then classify Im(delta1 delta2^*).
inline BoundaryData make_boundary_data(const Mat& raw, double tol = 1e-12) {
    if (raw.cols() != 2 * raw.rows() || raw.rows() == 0)
        throw InputError("boundary data must be m x 2m");
    const Eigen::Index m = raw.rows();
    const RVec s = singular_values(raw);
    if (s(0) == 0.0 || s(m - 1) / s(0) <= tol)
        throw InputError("boundary data is rank deficient (rank(gamma) = m required)");
    const Mat gg = raw * raw.adjoint();
    const Mat delta = hpd_inv_sqrt(gg) * raw;
    Mat g1 = delta.leftCols(m);
    Mat g2 = delta.rightCols(m);
    const Mat im = im_part(g1 * g2.adjoint());
    const RVec ev = herm_eigenvalues(im);
    const double lo = ev(0), hi = ev(m - 1);
    const double ctol = 1e3 * tol;
    SignClass cls;
    if (std::max(std::abs(lo), std::abs(hi)) <= ctol)
        cls = SignClass::zero;
    else if (hi <= ctol)
        cls = SignClass::nonpositive;
    else if (lo >= -ctol)
        cls = SignClass::nonnegative;
    else
        throw InputError("boundary data: Im(gamma1 gamma2^*) is indefinite; a semidefinite class is required");
    return BoundaryData(std::move(g1), std::move(g2), cls);
}

inline BoundaryData dirichlet(int m) {
    Mat g = Mat::Zero(m, 2 * m);
    g.leftCols(m).setIdentity();
    return make_boundary_data(g);
}

inline BoundaryData neumann(int m) {
    Mat g = Mat::Zero(m, 2 * m);
    g.rightCols(m).setIdentity();
    return make_boundary_data(g);
}

// gamma~(k) = gamma I_rho(k)^{1/2}
inline Mat weighted_boundary(const BoundaryData& g, const HamiltonianSystem& sys, Site k) {
    const Mat r = hpd_sqrt(sys.rho(k));
    return g.gamma() * block_diag(r, r);
}

// ------------------------------ validation -----------------------------------

struct Violation {
    Site k;
    std::string kind;
    double value;
};

struct SiteCondition {
    Site k;
    double rcond12;
    double rcond21;
    bool ok;
};

struct ValidationReport {
    std::vector<Violation> violations;
    std::vector<SiteCondition> conditions;  // filled by check_wellposed
    bool ok() const { return violations.empty(); }
};

inline void require_reachable(const HamiltonianSystem& sys, Interval iv) {
    if (iv.hi < iv.lo) throw DomainError("empty interval");
    if (!sys.reachable(iv.lo) || !sys.reachable(iv.hi))
        throw DomainError("interval [" + std::to_string(iv.lo) + "," + std::to_string(iv.hi) +
                          "] outside the reachable range");
}

// A >= 0, B = B^*, rho = rho^* > 0 at every site of the interval.
inline ValidationReport validate_pointwise(const HamiltonianSystem& sys, Interval iv,
                                           const Tolerances& tol = {}) {
    require_reachable(sys, iv);
    ValidationReport rep;
    for (Site k = iv.lo; k <= iv.hi; ++k) {
        const Mat& A = sys.A(k);
        const Mat& B = sys.B(k);
        const Mat& r = sys.rho(k);
        if (double d = hermitian_defect(A); d > tol.sym) rep.violations.push_back({k, "A not Hermitian", d});
        if (double e = min_herm_eig(A); e < -tol.psd * std::max(1.0, A.norm()))
            rep.violations.push_back({k, "A not positive semidefinite", e});
        if (double d = hermitian_defect(B); d > tol.sym) rep.violations.push_back({k, "B not Hermitian", d});
        if (double d = hermitian_defect(r); d > tol.sym) rep.violations.push_back({k, "rho not Hermitian", d});
        if (double e = min_herm_eig(r); !(e > 0.0)) rep.violations.push_back({k, "rho not positive definite", e});
    }
    return rep;
}

// Conditioning of zA12 + B12 and zA21 + B21. For the Hermitian pencils these two
// blocks are adjoint-related at conjugate z, and both must be invertible.
inline ValidationReport check_wellposed(const HamiltonianSystem& sys, cplx z, Interval iv,
                                        const Tolerances& tol = {}) {
    require_reachable(sys, iv);
    ValidationReport rep;
    const int m = sys.m();
    for (Site k = iv.lo; k <= iv.hi; ++k) {
        const Mat c = sys.pencil(z, k);
        const double r12 = rcond(c.topRightCorner(m, m));
        const double r21 = rcond(c.bottomLeftCorner(m, m));
        const bool ok12 = r12 >= tol.rcond_min;
        const bool ok21 = r21 >= tol.rcond_min;
        rep.conditions.push_back({k, r12, r21, ok12 && ok21});
        if (!ok12) rep.violations.push_back({k, "zA12+B12 singular", r12});
        if (!ok21) rep.violations.push_back({k, "zA21+B21 singular", r21});
        // (1,2) at z and (2,1) at conj(z) are adjoints: their conditions must agree.
        const double r21c = rcond(sys.pencil(std::conj(z), k).bottomLeftCorner(m, m));
        if (std::abs(r12 - r21c) > 1e-8 * std::max(1.0, r12))
            rep.violations.push_back({k, "pencil (1,2)/(2,1) cross-check mismatch", r12 - r21c});
    }
    return rep;
}

// ------------------------------ constructors ---------------------------------

// rho = I, A = diag(I, 0), B = ((-q, I), (I, p^{-1})).
inline HamiltonianSystem jacobi_system(std::vector<Mat> p, std::vector<Mat> q, Site k_min = 0,
                                       Extension ext = Extension::constant_edge) {
    if (p.empty() || p.size() != q.size()) throw InputError("jacobi_system: p and q must be nonempty and equally long");
    const int m = static_cast<int>(p.front().rows());
    std::vector<Mat> A, B, rho;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Site k = k_min + static_cast<Site>(i);
        if (p[i].rows() != m || p[i].cols() != m || q[i].rows() != m || q[i].cols() != m)
            throw InputError("jacobi_system: shape mismatch at k=" + std::to_string(k));
        if (hermitian_defect(p[i]) > 1e-12 || hermitian_defect(q[i]) > 1e-12)
            throw InputError("jacobi_system: p and q must be Hermitian (k=" + std::to_string(k) + ")");
        if (rcond(p[i]) < 1e-14) throw InputError("jacobi_system: p(k) singular at k=" + std::to_string(k));
        Mat a = Mat::Zero(2 * m, 2 * m);
        a.topLeftCorner(m, m).setIdentity();
        A.push_back(a);
        B.push_back(block2x2(-q[i], identity(m), identity(m), p[i].inverse()));
        rho.push_back(identity(m));
    }
    return HamiltonianSystem(m, k_min, std::move(A), std::move(B), std::move(rho), ext,
                             JacobiData{std::move(p), std::move(q)});
}

// rho = I, A = I_2m, B = ((0, b), (b^*, 0)).
inline HamiltonianSystem dirac_system(const std::vector<Mat>& b, Site k_min = 0,
                                      Extension ext = Extension::constant_edge) {
    if (b.empty()) throw InputError("dirac_system: empty coefficient list");
    const int m = static_cast<int>(b.front().rows());
    std::vector<Mat> A, B, rho;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const Site k = k_min + static_cast<Site>(i);
        if (b[i].rows() != m || b[i].cols() != m) throw InputError("dirac_system: shape mismatch");
        if (rcond(b[i]) < 1e-14) throw InputError("dirac_system: b(k) singular at k=" + std::to_string(k));
        A.push_back(identity(2 * m));
        B.push_back(block2x2(zeros(m, m), b[i], b[i].adjoint(), zeros(m, m)));
        rho.push_back(identity(m));
    }
    return HamiltonianSystem(m, k_min, std::move(A), std::move(B), std::move(rho), ext);
}

// --------------------------- normal form (rho diagonal) ----------------------

// Record of U(k) = diag(eps~(k) Q(k), eps~(k) Q(k-1)) so that
// U (S_rho - zA - B) U^{-1} = S_d - z A' - B' with d = eps~ d~ eps~^+ > 0 diagonal.
struct NormalForm {
    HamiltonianSystem system;
    std::vector<Mat> Q;          // Q(k), k in [k_min-1, k_max]
    std::vector<Mat> eps_tilde;  // eps~(k), k in [k_min, k_max+1]
    Site k_min;

    const Mat& q_at(Site k) const { return Q.at(static_cast<std::size_t>(k - (k_min - 1))); }
    const Mat& eps_at(Site k) const { return eps_tilde.at(static_cast<std::size_t>(k - k_min)); }

    // Plain-state transform U(k) acting on Psi(k) = (psi1(k); psi2(k)).
    Mat plain_map(Site k) const { return block_diag(eps_at(k) * q_at(k), eps_at(k) * q_at(k - 1)); }

    // Hat-state transform acting on (psi1(k); psi2(k+1)).
    Mat hat_map(Site k) const { return block_diag(eps_at(k) * q_at(k), eps_at(k + 1) * q_at(k)); }
};

inline NormalForm normal_form(const HamiltonianSystem& sys) {
    const int m = sys.m();
    const Site lo = sys.k_min(), hi = sys.k_max();
    auto diagonalize = [&](Site k, RVec* dvals) {
        const Mat& r = sys.rho(k);
        if (hermitian_defect(r) > 1e-12) throw InputError("normal_form: rho(k) not Hermitian");
        Eigen::SelfAdjointEigenSolver<Mat> es(herm_part(r));
        RVec ev = es.eigenvalues().reverse();  // descending
        Mat V = es.eigenvectors().rowwise().reverse();
        if ((ev.cwiseAbs().minCoeff()) <= 1e-14 * std::max(1.0, ev.cwiseAbs().maxCoeff()))
            throw InputError("normal_form: rho(k) singular at k=" + std::to_string(k));
        if (dvals) *dvals = ev;
        return Mat(V.adjoint());  // Q rho Q^{-1} = diag(ev)
    };

    std::vector<Mat> Q;
    std::vector<RVec> dt;
    for (Site k = lo - 1; k <= hi; ++k) {
        RVec ev;
        Q.push_back(diagonalize(sys.reachable(k) ? k : lo, &ev));
        dt.push_back(ev);
    }
    // eps~(lo) = I, eps~(k+1) = eps~(k) sign(d~(k)).
    std::vector<Mat> eps;
    Mat e = identity(m);
    for (Site k = lo; k <= hi + 1; ++k) {
        eps.push_back(e);
        if (k <= hi) {
            const RVec& d = dt[static_cast<std::size_t>(k - lo + 1)];
            Mat next = e;
            for (int i = 0; i < m; ++i)
                if (d(i) < 0) next(i, i) = -next(i, i);
            e = next;
        }
    }
    NormalForm nf{sys, std::move(Q), std::move(eps), lo};
    std::vector<Mat> A, B, rho;
    for (Site k = lo; k <= hi; ++k) {
        const Mat U = nf.plain_map(k);
        A.push_back(U * sys.A(k) * U.adjoint());
        B.push_back(U * sys.B(k) * U.adjoint());
        const RVec& d = dt[static_cast<std::size_t>(k - lo + 1)];
        Mat dk = Mat::Zero(m, m);
        for (int i = 0; i < m; ++i) dk(i, i) = std::abs(d(i));  // eps(k) d~(k)
        rho.push_back(dk);
    }
    nf.system = HamiltonianSystem(m, lo, std::move(A), std::move(B), std::move(rho), sys.extension());
    return nf;
}

// Boundary data alpha for the original system at site k, expressed for the
// normal-form system: the weighted row space alpha~ T^{-1} re-expressed without weights.
inline BoundaryData normal_form_boundary(const NormalForm& nf, const HamiltonianSystem& original,
                                         const BoundaryData& alpha, Site k) {
    const Mat wt = weighted_boundary(alpha, original, k) * nf.hat_map(k).adjoint();
    const Mat dinv = hpd_inv_sqrt(nf.system.rho(k));
    return make_boundary_data(wt * block_diag(dinv, dinv));
}

// ----------------------------- rho -> I transform ----------------------------

// A' = D^{-1/2} A D^{-1/2}, B' = D^{-1/2} B D^{-1/2}, D = diag(rho, rho^-), rho' = I.
// Boundary data carry over unweighted.
inline HamiltonianSystem to_unit_rho(const HamiltonianSystem& sys) {
    const int m = sys.m();
    std::vector<Mat> A, B, rho;
    for (Site k = sys.k_min(); k <= sys.k_max(); ++k) {
        const Site km = sys.reachable(k - 1) ? k - 1 : k;
        const Mat Dm = block_diag(hpd_inv_sqrt(sys.rho(k)), hpd_inv_sqrt(sys.rho(km)));
        A.push_back(Dm * sys.A(k) * Dm);
        B.push_back(Dm * sys.B(k) * Dm);
        rho.push_back(identity(m));
    }
    return HamiltonianSystem(m, sys.k_min(), std::move(A), std::move(B), std::move(rho), sys.extension());
}

struct UnitRhoProblem {
    HamiltonianSystem system;
    BoundaryData alpha;  // used unweighted at k0 (rho' = I)
    BoundaryData beta;   // used unweighted at ell
};

inline UnitRhoProblem to_unit_rho(const HamiltonianSystem& sys, const BoundaryData& alpha,
                                  const BoundaryData& beta) {
    return {to_unit_rho(sys), alpha, beta};
}

}  // namespace dhs
