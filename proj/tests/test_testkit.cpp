#include "dhs/testkit.hpp"

#include <gtest/gtest.h>

using namespace dhs;

namespace {

HamiltonianSystem constant_jacobi(int n, int m = 1) {
    return jacobi_system(std::vector<Mat>(n, identity(m)), std::vector<Mat>(n, zeros(m, m)));
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace

TEST(BvpOracle, FreeLaplacianEigenvalues) {
    for (int n : {1, 5, 10, 20}) {
        const auto sys = constant_jacobi(n + 2);
        const auto ev = jacobi_bvp_oracle(sys, 0, n + 1, dirichlet(1), dirichlet(1));
        ASSERT_EQ(ev.size(), std::size_t(n));
        for (int j = 1; j <= n; ++j) EXPECT_NEAR(ev[j - 1], 2 - 2 * std::cos(j * M_PI / (n + 1)), 1e-12);
    }
}

TEST(BvpOracle, SingleInteriorSite) {
    const auto sys = random_system(1, {0, 4}, 7, SystemClass::jacobi);
    const auto ev = jacobi_bvp_oracle(sys, 1, 3, dirichlet(1), dirichlet(1));
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_NEAR(ev[0], sys.jacobi_b(2)(0, 0).real(), 1e-14);
}

TEST(BvpOracle, TensorMultiplicity) {
    const auto sys = constant_jacobi(8, 2);
    const auto ev = jacobi_bvp_oracle(sys, 0, 7, dirichlet(2), dirichlet(2));
    ASSERT_EQ(ev.size(), 12u);
    for (int j = 0; j < 6; ++j) {
        const double lam = 2 - 2 * std::cos((j + 1) * M_PI / 7);
        EXPECT_NEAR(ev[2 * j], lam, 1e-12);
        EXPECT_NEAR(ev[2 * j + 1], lam, 1e-12);
    }
    const auto det = eig_via_detPhi_detailed(sys, 0, 7, dirichlet(2), dirichlet(2), -0.5, 4.5);
    ASSERT_EQ(det.size(), 6u);
    for (const auto& e : det) EXPECT_EQ(e.multiplicity, 2);
}

TEST(BvpOracle, RejectsUnsupportedData) {
    const auto sys = constant_jacobi(6);
    EXPECT_THROW(jacobi_bvp_oracle(sys, 0, 5, neumann(1), dirichlet(1)), UnsupportedError);
    const auto dir = random_system(1, {0, 6}, 1, SystemClass::dirac);
    EXPECT_THROW(jacobi_bvp_oracle(dir, 0, 5, dirichlet(1), dirichlet(1)), UnsupportedError);
}

TEST(DetPhi, AgreesWithOracle) {
    for (int m : {1, 2})
        for (int n : {5, 10, 20}) {
            const auto sys = random_system(m, {0, n + 1}, 100 + n, SystemClass::jacobi);
            const auto ev = jacobi_bvp_oracle(sys, 0, n + 1, dirichlet(m), dirichlet(m));
            const auto det = eig_via_detPhi(sys, 0, n + 1, dirichlet(m), dirichlet(m), ev.front() - 1, ev.back() + 1);
            ASSERT_EQ(det.size(), ev.size()) << "m=" << m << " n=" << n;
            EXPECT_LT(max_diff(det, ev), 1e-8) << "m=" << m << " n=" << n;
        }
}

TEST(DetPhi, FreeCaseMatchesCosineFormula) {
    const int n = 10;
    const auto sys = constant_jacobi(n + 2);
    const auto det = eig_via_detPhi(sys, 0, n + 1, dirichlet(1), dirichlet(1), -0.5, 4.5);
    ASSERT_EQ(det.size(), std::size_t(n));
    for (int j = 1; j <= n; ++j) EXPECT_NEAR(det[j - 1], 2 - 2 * std::cos(j * M_PI / (n + 1)), 1e-8);
}

TEST(DetPhi, EmptyIntervalBelowSpectrum) {
    const auto sys = random_system(2, {0, 11}, 3, SystemClass::jacobi);
    const auto ev = jacobi_bvp_oracle(sys, 0, 11, dirichlet(2), dirichlet(2));
    EXPECT_TRUE(eig_via_detPhi(sys, 0, 11, dirichlet(2), dirichlet(2), ev.front() - 5, ev.front() - 0.1).empty());
}

TEST(DetPhi, EigenvaluesArePolesOfM) {
    const auto sys = random_system(1, {0, 8}, 5, SystemClass::jacobi);
    const auto det = eig_via_detPhi(sys, 0, 7, dirichlet(1), dirichlet(1), -10, 10);
    ASSERT_FALSE(det.empty());
    for (double lam : det) {
        double peak = 0;
        for (double d : {1e-7, -1e-7, 1e-8, -1e-8})
            peak = std::max(peak, m_value(sys, cplx(lam + d, 0.0), 0, 7, dirichlet(1), dirichlet(1), 1e-16).norm());
        EXPECT_GT(peak, 1e6) << lam;
    }
}

TEST(FixedPoint, FreeJacobiBothDirections) {
    const auto sys = constant_jacobi(1);
    for (cplx z : {cplx(0, 1), cplx(1, 0.01), cplx(-2, 0.5), cplx(3, -0.2)}) {
        const auto fp = constant_riccati_fixed_point(sys, z, +1);
        const cplx v = fp.V(0, 0);
        EXPECT_LT(std::abs(v * v - z * v + z), 1e-12 * (1 + std::norm(v)));
        EXPECT_LT(std::abs(v - free_jacobi_root(z)), 1e-10);
        EXPECT_LT(riccati_residual(sys, z, 0, {fp.V, fp.V})[0].residual, 1e-12);
        const auto fm = constant_riccati_fixed_point(sys, z, -1);
        EXPECT_LT(std::abs(fm.V(0, 0) - scalar_riccati_root(sys, z, -1)), 1e-10);
    }
}

TEST(FixedPoint, DiracUnitCoefficient) {
    const auto sys = dirac_system({identity(1)});
    const cplx z(0.3, 0.8);
    const auto fp = constant_riccati_fixed_point(sys, z, +1);
    const cplx v = fp.V(0, 0);
    EXPECT_LT(std::abs(v - (z + 1.0 / (1.0 / v - z))), 1e-12);
    EXPECT_LT(riccati_residual(sys, z, 0, {fp.V, fp.V})[0].residual, 1e-12);
    EXPECT_LT(v.imag(), 0.0);
}

TEST(FixedPoint, MatrixCaseAgreesWithLimit) {
    Mat P(2, 2), Q(2, 2);
    P << 1.5, cplx(0.3, 0.2), cplx(0.3, -0.2), 0.8;
    Q << 0.4, cplx(-0.1, 0.5), cplx(-0.1, -0.5), -0.7;
    const auto sys = jacobi_system({P}, {Q});
    const cplx z(0.5, 0.6);
    const auto fp = constant_riccati_fixed_point(sys, z, +1);
    EXPECT_LT(riccati_residual(sys, z, 0, {fp.V, fp.V})[0].relative, 1e-12);
    const auto L = limit_m(sys, z, 0, dirichlet(2), +1, {});
    EXPECT_LT((L.M_pm + fp.V).norm(), 1e-8);
}

TEST(FixedPoint, RejectsRealZ) {
    EXPECT_THROW(constant_riccati_fixed_point(constant_jacobi(1), cplx(1, 0)), InputError);
}

TEST(RandomSystem, SeedDeterminism) {
    for (auto cls : {SystemClass::jacobi, SystemClass::dirac, SystemClass::general_A12zero}) {
        const auto a = random_system(2, {0, 10}, 42, cls);
        const auto b = random_system(2, {0, 10}, 42, cls);
        const auto c = random_system(2, {0, 10}, 43, cls);
        bool differs = false;
        for (Site k = 0; k <= 10; ++k) {
            EXPECT_TRUE(a.A(k) == b.A(k) && a.B(k) == b.B(k) && a.rho(k) == b.rho(k));
            differs = differs || !(a.B(k) == c.B(k));
        }
        EXPECT_TRUE(differs);
    }
}

TEST(RandomSystem, GeneratorSoundness) {
    for (auto cls : {SystemClass::jacobi, SystemClass::dirac, SystemClass::general_A12zero})
        for (int m : {1, 2, 3})
            for (std::uint64_t seed = 1; seed <= 4; ++seed) {
                const auto sys = random_system(m, {0, 12}, seed, cls);
                EXPECT_TRUE(validate_pointwise(sys, sys.window()).ok());
                for (cplx z : default_z_sample()) EXPECT_TRUE(check_wellposed(sys, z, sys.window()).ok());
                for (Site k = 0; k <= 12; ++k) {
                    const Mat b12 = sys.B(k).topRightCorner(m, m);
                    EXPECT_LE(op_norm(b12) / min_singular(b12), 1e3);
                }
            }
}

TEST(RandomSystem, GeneralClassIsDefinite) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto sys = random_system(3, {0, 10}, seed, SystemClass::general_A12zero);
        for (cplx z : default_z_sample()) EXPECT_TRUE(check_definiteness(sys, z, {0, 1}).definite);
    }
}

TEST(RandomBoundary, SelfAdjointAndInteriorClasses) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 10; ++i) {
        EXPECT_EQ(random_selfadjoint_boundary(3, rng).sign_class(), SignClass::zero);
        EXPECT_EQ(random_interior_boundary(2, 1, rng).sign_class(), SignClass::nonnegative);
    }
}
