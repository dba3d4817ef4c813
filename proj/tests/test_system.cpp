#include "dhs/testkit.hpp"

#include <gtest/gtest.h>

using namespace dhs;

namespace {

HamiltonianSystem free_jacobi(int n, int m = 1) {
    return jacobi_system(std::vector<Mat>(n, identity(m)), std::vector<Mat>(n, zeros(m, m)));
}

}  // namespace

TEST(BoundaryData, NormalizesToOrthonormalRows) {
    Mat raw(2, 4);
    raw << 2, 1, 0, 0, 0, 3, 0, 0;
    const BoundaryData b = make_boundary_data(raw);
    EXPECT_LT((b.gamma() * b.gamma().adjoint() - identity(2)).norm(), 1e-14);
    // Same row space: raw = C gamma for some invertible C.
    const Mat C = raw * b.gamma().adjoint();
    EXPECT_LT((C * b.gamma() - raw).norm(), 1e-13);
}

TEST(BoundaryData, SignClasses) {
    EXPECT_EQ(dirichlet(2).sign_class(), SignClass::zero);
    EXPECT_EQ(neumann(2).sign_class(), SignClass::zero);
    Mat up(1, 2);
    up << 1, cplx(0, 1);  // Im(g1 g2^*) = -1
    EXPECT_EQ(make_boundary_data(up).sign_class(), SignClass::nonpositive);
    Mat down(1, 2);
    down << 1, cplx(0, -1);
    EXPECT_EQ(make_boundary_data(down).sign_class(), SignClass::nonnegative);
}

TEST(BoundaryData, RejectsIndefiniteAndRankDeficient) {
    Mat ind(2, 4);
    ind << 1, 0, cplx(0, 1), 0, 0, 1, 0, cplx(0, -1);
    EXPECT_THROW(make_boundary_data(ind), InputError);
    Mat rank1(2, 4);
    rank1 << 1, 0, 0, 0, 2, 0, 0, 0;
    EXPECT_THROW(make_boundary_data(rank1), InputError);
}

TEST(BoundaryData, InteriorHelperHasStrictSign) {
    std::mt19937_64 rng(5);
    for (int sigma : {1, -1}) {
        const BoundaryData b = random_interior_boundary(2, sigma, rng);
        EXPECT_GT(min_herm_eig(double(sigma) * b.im_form()), 1e-3);
    }
}

TEST(HamiltonianSystem, JacobiPencilBlocks) {
    const auto sys = free_jacobi(5, 2);
    const cplx z(0.3, 0.7);
    const Mat c = sys.pencil(z, 2);
    EXPECT_LT((c.topLeftCorner(2, 2) - z * identity(2)).norm(), 1e-15);
    EXPECT_LT((c.topRightCorner(2, 2) - identity(2)).norm(), 1e-15);
    EXPECT_LT((c.bottomRightCorner(2, 2) - identity(2)).norm(), 1e-15);
    EXPECT_LT((sys.jacobi_a(1) + identity(2)).norm(), 1e-15);
    EXPECT_LT((sys.jacobi_b(1) - 2.0 * identity(2)).norm(), 1e-15);
}

TEST(HamiltonianSystem, ExtensionPolicies) {
    std::vector<Mat> p{Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 2.0), Mat::Constant(1, 1, 3.0)};
    std::vector<Mat> q(3, zeros(1, 1));
    const auto edge = jacobi_system(p, q, 0, Extension::constant_edge);
    EXPECT_DOUBLE_EQ(edge.jacobi_p(7)(0, 0).real(), 3.0);
    EXPECT_DOUBLE_EQ(edge.jacobi_p(-4)(0, 0).real(), 1.0);
    const auto per = jacobi_system(p, q, 0, Extension::periodic);
    EXPECT_DOUBLE_EQ(per.jacobi_p(4)(0, 0).real(), 2.0);
    EXPECT_DOUBLE_EQ(per.jacobi_p(-1)(0, 0).real(), 3.0);
    const auto err = jacobi_system(p, q, 0, Extension::error);
    EXPECT_THROW(err.A(3), DomainError);
    EXPECT_THROW(require_reachable(err, {0, 5}), DomainError);
}

TEST(HamiltonianSystem, ConstructorRejectsBadShapes) {
    std::vector<Mat> A{identity(2)}, B{identity(2)}, rho{identity(2)};
    EXPECT_THROW(HamiltonianSystem(1, 0, A, B, rho, Extension::constant_edge), InputError);
    EXPECT_THROW(jacobi_system({identity(1)}, {}, 0), InputError);
}

TEST(Validation, DetectsNonHermitianB) {
    const int m = 1;
    Mat A = Mat::Zero(2, 2);
    A(0, 0) = 1;
    Mat B(2, 2);
    B << 0, 1, 1, 1;
    Mat Bbad = B;
    Bbad(1, 0) = 0.5;
    const HamiltonianSystem sys(m, 0, {A, A, A}, {B, Bbad, B}, {identity(1), identity(1), identity(1)},
                                Extension::constant_edge);
    const auto rep = validate_pointwise(sys, sys.window());
    ASSERT_EQ(rep.violations.size(), 1u);
    EXPECT_EQ(rep.violations[0].k, 1);
    EXPECT_FALSE(rep.ok());
}

TEST(Validation, WellposednessFlagsSingularCoupling) {
    Mat A = Mat::Zero(2, 2);
    A(0, 0) = 1;
    Mat B = Mat::Zero(2, 2);  // B12 = 0 and A12 = 0: zA12 + B12 singular
    B(1, 1) = 1;
    const HamiltonianSystem sys(1, 0, {A, A}, {B, B}, {identity(1), identity(1)}, Extension::constant_edge);
    EXPECT_FALSE(check_wellposed(sys, cplx(0, 1), sys.window()).ok());
    EXPECT_TRUE(check_wellposed(free_jacobi(3), cplx(0, 1), {0, 2}).ok());
}

TEST(Validation, RandomSystemsAreValid) {
    for (auto cls : {SystemClass::jacobi, SystemClass::dirac, SystemClass::general_A12zero})
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto sys = random_system(2, {0, 20}, seed, cls);
            EXPECT_TRUE(validate_pointwise(sys, sys.window()).ok());
            EXPECT_TRUE(check_wellposed(sys, cplx(0.2, 0.9), sys.window()).ok());
        }
}

TEST(NormalForm, RhoBecomesPositiveDiagonal) {
    const auto sys = random_system(3, {0, 15}, 9, SystemClass::general_A12zero);
    const NormalForm nf = normal_form(sys);
    for (Site k = 0; k <= 15; ++k) {
        const Mat& d = nf.system.rho(k);
        EXPECT_LT((d - Mat(d.diagonal().asDiagonal())).norm(), 1e-13);
        EXPECT_GT(d.diagonal().real().minCoeff(), 0.0);
    }
    EXPECT_TRUE(validate_pointwise(nf.system, nf.system.window()).ok());
}

TEST(NormalForm, TransformsSolutions) {
    const auto sys = random_system(2, {0, 15}, 4, SystemClass::general_A12zero);
    const NormalForm nf = normal_form(sys);
    const cplx z(0.4, 0.6);
    const Trajectory t = propagate(sys, {3, z, identity(4)}, {3, 12});
    const Trajectory tn = propagate(nf.system, {3, z, nf.hat_map(3)}, {3, 12});
    for (Site k = 3; k <= 12; ++k) {
        const Mat expect = nf.hat_map(k) * t.hat(k);
        EXPECT_LT((tn.hat(k) - expect).norm() / expect.norm(), 1e-12) << "k=" << k;
    }
}

TEST(UnitRho, PreservesMFunction) {
    std::mt19937_64 rng(3);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto sys = random_system(2, {0, 12}, seed, SystemClass::general_A12zero);
        const BoundaryData a = random_selfadjoint_boundary(2, rng), b = random_selfadjoint_boundary(2, rng);
        const auto u = to_unit_rho(sys, a, b);
        const cplx z(0.1, 0.8);
        const Mat M0 = m_value(sys, z, 2, 10, a, b);
        const Mat M1 = m_value(u.system, z, 2, 10, u.alpha, u.beta);
        EXPECT_LT((M0 - M1).norm() / (1.0 + M0.norm()), 1e-10);
    }
}
