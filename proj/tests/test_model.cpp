#include <gtest/gtest.h>

#include "specsurg/potential.hpp"
#include "specsurg/problem.hpp"
#include "specsurg/wave.hpp"

using namespace specsurg;

namespace {

Mat m1(Cplx v) { return Mat::Constant(1, 1, v); }

Mat m2(Cplx a, Cplx b, Cplx c, Cplx d) {
    Mat m(2, 2);
    m << a, b, c, d;
    return m;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::invalid_input;  // unreachable in the tests below
}

}  // namespace

TEST(Boundary, AcceptsDirichletNeumannAndRobin) {
    EXPECT_NO_THROW(validate_boundary(Mat::Zero(2, 2), -identity(2)));
    EXPECT_NO_THROW(validate_boundary(identity(2), Mat::Zero(2, 2)));
    EXPECT_NO_THROW(validate_boundary(m2(1, 2, 0, 3), m2(4, 20, 4, -2)));
}

TEST(Boundary, RejectsNonSelfadjointPair) {
    EXPECT_EQ(kind_of([] { validate_boundary(m1(1), m1(Cplx(1, 1))); }), ErrorKind::non_selfadjoint_boundary);
}

TEST(Boundary, RejectsDegeneratePair) {
    EXPECT_EQ(kind_of([] { validate_boundary(m2(1, 0, 0, 0), m2(0, 0, 0, 0)); }), ErrorKind::degenerate_boundary);
}

TEST(Boundary, RegaugedKeepsValidity) {
    auto p = make_problem(zero_potential(2), m2(1, 2, 0, 3), m2(4, 20, 4, -2));
    Mat t = m2(2, Cplx(0, 1), 0, 1);
    auto g = p.regauged(t);
    EXPECT_LT((g.A() - p.A() * t).norm(), 1e-18L);
    EXPECT_LT((g.B() - p.B() * t).norm(), 1e-18L);
}

TEST(Problem, DimensionMismatchRejected) {
    EXPECT_THROW(make_problem(zero_potential(1), identity(2), Mat::Zero(2, 2)), Error);
}

TEST(Potential, ExponentialFamilyValues) {
    // V(x) = -8 a e b^2 e^{-2bx} / (a e^{-2bx} + e)^2
    auto v = family_exponential(2, 1, Real(1) / 3);
    for (Real x : {Real(0), Real(0.7L), Real(4)}) {
        Real q = std::exp(-2 * x / 3), den = 2 * q + 1;
        EXPECT_NEAR(double(v(x)(0, 0).real()), double(-8 * 2 * q / 9 / (den * den)), 1e-15);
    }
    EXPECT_THROW(family_exponential(-1, 1, 1), Error);
}

TEST(Potential, InverseSquareValues) {
    auto v = family_inverse_square(1);
    EXPECT_NEAR(double(v(1)(0, 0).real()), 0.5, 1e-18);
    EXPECT_THROW(family_inverse_square(0), Error);
}

TEST(Potential, CombineRealIsHermitianWithKnownEigenvalues) {
    auto v = combine_scalar_to_matrix(family_exponential(2, 1, 1), family_inverse_square(1), CombineMode::real);
    for (Real x : {Real(0.1L), Real(1), Real(3)}) {
        Mat m = v(x);
        EXPECT_LT((m - m.adjoint()).norm(), 1e-18L);
        Eigen::SelfAdjointEigenSolver<Mat> es(m);
        Real a = family_exponential(2, 1, 1)(x)(0, 0).real(), b = family_inverse_square(1)(x)(0, 0).real();
        EXPECT_NEAR(double(es.eigenvalues()(0)), double(std::min(a, b)), 1e-14);
        EXPECT_NEAR(double(es.eigenvalues()(1)), double(std::max(a, b)), 1e-14);
    }
}

TEST(Potential, CombineComplexIsHermitian) {
    auto v = combine_scalar_to_matrix(family_exponential(2, 1, 1), zero_potential(1), CombineMode::complex);
    Mat m = v(0.5L);
    EXPECT_LT((m - m.adjoint()).norm(), 1e-18L);
    EXPECT_GT(std::abs(m(0, 1).imag()), 0);
}

TEST(Potential, ScaledPotentialMultipliesMatrix) {
    Mat s = m2(1, Cplx(0, 2), Cplx(0, -2), 3);
    auto v = scaled_potential(family_inverse_square(1), s);
    EXPECT_LT((v(1) - Real(0.5L) * s).norm(), 1e-18L);
}

TEST(Potential, TabulatedLinearReproducesLinearData) {
    std::vector<Real> xs{0, 1, 2, 3};
    std::vector<Mat> ms;
    for (Real x : xs) ms.push_back(m2(Cplx(1 - x / 4), Cplx(x, 0), Cplx(x, 0), 0));
    auto v = tabulated_potential(xs, ms, Interpolation::linear);
    EXPECT_LT((v(1.5L) - m2(Cplx(1 - 1.5L / 4), 1.5L, 1.5L, 0)).norm(), 1e-15L);
    EXPECT_LT(v(10).norm(), 1e-18L);
}

TEST(Potential, TabulatedCubicPassesThroughSamples) {
    std::vector<Real> xs{0, 0.5L, 1, 2, 3, 4};
    std::vector<Mat> ms;
    for (Real x : xs) ms.push_back(m1(std::exp(-x)));
    auto v = tabulated_potential(xs, ms, Interpolation::cubic);
    for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_NEAR(double(v(xs[i])(0, 0).real()), double(std::exp(-xs[i])), 1e-14);
}

TEST(Potential, TabulatedRejectsNonHermitianSample) {
    std::vector<Real> xs{0, 1};
    std::vector<Mat> ms{m2(1, 0, 0, 1), m2(1, 2, 0, 1)};
    EXPECT_EQ(kind_of([&] { tabulated_potential(xs, ms, Interpolation::linear); }), ErrorKind::invalid_sample);
}

TEST(Potential, TabulatedRejectsBadGrid) {
    std::vector<Mat> ms{m1(1), m1(1)};
    EXPECT_EQ(kind_of([&] { tabulated_potential({0, 0}, ms, Interpolation::linear); }), ErrorKind::invalid_grid);
    EXPECT_EQ(kind_of([&] { tabulated_potential({1, 2}, ms, Interpolation::linear); }), ErrorKind::invalid_grid);
}

TEST(Wave, FreeJostSolutionIsPlaneWave) {
    auto v = zero_potential(2);
    for (Cplx k : {Cplx(1.3L, 0), Cplx(0.5L, 0.8L)}) {
        WaveSlice f = solve_jost(v, k);
        for (Real x : {Real(0), Real(0.4L), Real(2)}) {
            EXPECT_LT((f.value(x) - std::exp(I_unit * k * x) * identity(2)).norm(), 1e-12L);
            EXPECT_LT((f.deriv(x) - I_unit * k * std::exp(I_unit * k * x) * identity(2)).norm(), 1e-12L);
        }
    }
}

TEST(Wave, FreeRobinJostMatrixIsLinearInK) {
    // J(k) = B - i k A for the zero potential.
    auto spec = make_problem(zero_potential(1), m1(1), m1(-1.5L));
    for (Cplx k : {Cplx(0.7L, 0), Cplx(0.2L, 1.1L)}) {
        Mat j = jost_matrix(spec, k);
        EXPECT_LT(std::abs(j(0, 0) - (Cplx(-1.5L) - I_unit * k)), 1e-12L);
    }
}

TEST(Wave, DirichletFreeScatteringMatrixIsMinusIdentity) {
    auto spec = make_problem(zero_potential(2), Mat::Zero(2, 2), -identity(2));
    EXPECT_LT((scattering_matrix(spec, 1.7L) + identity(2)).norm(), 1e-12L);
}

TEST(Wave, NumericalJostMatchesClosedFormForExponentialFamily) {
    auto v = family_exponential(2, 1, Real(1) / 3);
    SolverOptions so;
    so.ode.rtol = 1e-13L;
    so.ode.atol = 1e-15L;
    for (Cplx k : {Cplx(0.9L, 0), Cplx(-2, 0), Cplx(0.3L, 0.6L)}) {
        WaveSlice f = solve_jost(v, k, so);
        for (Real x : {Real(0), Real(1), Real(5)}) {
            auto oracle = v.jost_oracle(k, x);
            ASSERT_TRUE(oracle.has_value());
            EXPECT_LT((f.value(x) - oracle->f).norm() / oracle->f.norm(), 1e-9L);
            EXPECT_LT((f.deriv(x) - oracle->df).norm() / std::max(Real(1), oracle->df.norm()), 1e-9L);
        }
    }
}

TEST(Wave, NumericalJostMatchesClosedFormForInverseSquare) {
    // f(k, x) = e^{ikx} (1 + i / (k (x + a)))
    auto v = family_inverse_square(1);
    Cplx k(1.2L, 0);
    WaveSlice f = solve_jost(v, k);
    for (Real x : {Real(0), Real(2), Real(7)}) {
        Cplx want = std::exp(I_unit * k * x) * (Real(1) + I_unit / (k * (x + 1)));
        EXPECT_LT(std::abs(f.value(x)(0, 0) - want), 1e-8L);
    }
}

TEST(Wave, RegularSolutionStartsFromBoundaryPair) {
    auto spec = make_problem(family_exponential(2, 1, 1), m1(2), m1(-3));
    WaveSlice phi = solve_regular(spec, Cplx(0.8L, 0), {}, 1);
    EXPECT_LT(std::abs(phi.value(0)(0, 0) - Real(2)), 1e-15L);
    EXPECT_LT(std::abs(phi.deriv(0)(0, 0) + Real(3)), 1e-15L);
}

TEST(Wave, ZeroMomentumRejectedForJost) {
    EXPECT_THROW(solve_jost(family_inverse_square(1), Cplx(0, 0)), Error);
}

TEST(WaveProperty, ScatteringMatrixUnitaryAndSymmetricInK) {
    auto spec = make_problem(
        combine_scalar_to_matrix(family_exponential(2, 1, Real(1) / 3), zero_potential(1), CombineMode::real),
        m2(1, 2, 0, 3), m2(4, 20, 4, -2));
    for (Real k : {Real(0.3L), Real(1.1L), Real(2.5L), Real(4)}) {
        Mat s = scattering_matrix(spec, k), sm = scattering_matrix(spec, -k);
        EXPECT_LT((s.adjoint() * s - identity(2)).norm(), 1e-8L);
        EXPECT_LT((sm - s.adjoint()).norm(), 1e-8L);
    }
}

TEST(WaveProperty, ScatteringMatrixGaugeInvariant) {
    auto spec = make_problem(family_exponential(1, 2, 0.5L), m1(1), m1(0.4L));
    auto g = spec.regauged(m1(Cplx(0.3L, -2)));
    EXPECT_LT((scattering_matrix(spec, 0.9L) - scattering_matrix(g, 0.9L)).norm(), 1e-12L);
}
