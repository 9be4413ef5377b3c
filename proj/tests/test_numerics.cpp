#include <gtest/gtest.h>

#include <atomic>
#include <random>

#include "specsurg/core.hpp"
#include "specsurg/linalg.hpp"
#include "specsurg/ode.hpp"
#include "specsurg/parallel.hpp"
#include "specsurg/quadrature.hpp"
#include "specsurg/verify.hpp"

using namespace specsurg;

namespace {

Mat random_mat(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> nd;
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = Cplx(nd(rng), nd(rng));
    return m;
}

}  // namespace

TEST(Linalg, PseudoinverseOfInvertibleIsInverse) {
    Mat m(2, 2);
    m << Cplx(2, 1), Cplx(0, 1), Cplx(1, 0), Cplx(3, -1);
    EXPECT_LT((pinv(m) - m.inverse()).norm(), 1e-15L);
}

TEST(Linalg, PseudoinverseOfZeroIsZero) {
    Mat z = Mat::Zero(3, 2);
    Mat p = pinv(z);
    EXPECT_EQ(p.rows(), 2);
    EXPECT_EQ(p.cols(), 3);
    EXPECT_EQ(p.norm(), 0);
}

TEST(Linalg, PseudoinverseOfRankOneOuterProduct) {
    // (u v^dagger)^+ = v u^dagger / (|u|^2 |v|^2)
    Vec u(2), v(3);
    u << Cplx(1, 2), Cplx(-1, 0);
    v << Cplx(0, 1), Cplx(2, 0), Cplx(1, -1);
    Mat m = u * v.adjoint();
    Mat want = v * u.adjoint() / (u.squaredNorm() * v.squaredNorm());
    EXPECT_LT((pinv(m) - want).norm(), 1e-15L);
}

TEST(LinalgProperty, PenroseIdentitiesOnRandomRankDeficientMatrices) {
    EXPECT_LT(penrose_battery(200, 7), 1e-10L);
}

TEST(LinalgProperty, PseudoinverseIsAnInvolution) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        Mat m = random_mat(rng, 4, 2) * random_mat(rng, 2, 3);
        EXPECT_LT((pinv(pinv(m)) - m).norm() / m.norm(), 1e-10L);
    }
}

TEST(Linalg, HermitianSquareRootSquaresBack) {
    Mat h(2, 2);
    h << Cplx(5, 0), Cplx(1, 2), Cplx(1, -2), Cplx(3, 0);
    auto s = herm_sqrt_inv(h);
    EXPECT_LT((s.sqrt * s.sqrt - h).norm(), 1e-15L);
    EXPECT_LT((s.inv_sqrt * h * s.inv_sqrt - identity(2)).norm(), 1e-15L);
}

TEST(Linalg, HermitianSquareRootRejectsIndefinite) {
    Mat h(2, 2);
    h << Cplx(1, 0), Cplx(0, 0), Cplx(0, 0), Cplx(-1, 0);
    try {
        herm_sqrt_inv(h);
        FAIL() << "expected not_positive";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::not_positive);
    }
}

TEST(Linalg, ProjectorFromColumnsSpansRange) {
    Mat m(3, 2);
    m << 1, 2, 0, 0, 1, 2;  // rank one, range spanned by (1,0,1)
    OrthProjection p = projector_from_columns(m);
    Mat want(3, 3);
    want << 0.5L, 0, 0.5L, 0, 0, 0, 0.5L, 0, 0.5L;
    EXPECT_EQ(p.rank(), 1);
    EXPECT_LT((p.matrix() - want).norm(), 1e-15L);
}

TEST(LinalgProperty, KernelProjectorAnnihilatesAndComplementsRange) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
        Mat m = random_mat(rng, 3, 1) * random_mat(rng, 1, 3);
        OrthProjection k = kernel_projector(m);
        EXPECT_EQ(k.rank(), 2);
        EXPECT_LT((m * k.matrix()).norm() / m.norm(), 1e-12L);
        Mat p = k.matrix();
        EXPECT_LT((p * p - p).norm(), 1e-12L);
        EXPECT_LT((p.adjoint() - p).norm(), 1e-12L);
    }
}

TEST(Linalg, OrthProjectionRejectsNonIdempotent) {
    Mat m(2, 2);
    m << 1, 1, 0, 1;
    EXPECT_THROW(OrthProjection{m}, Error);
}

TEST(Ode, ExponentialGrowthMatchesClosedForm) {
    DormandPrince dp(OdeOptions{1e-14L, 1e-16L});
    Mat y0 = Mat::Constant(1, 1, Cplx(1, 0));
    auto sol = dp.solve([](Real, const Mat& y) -> Mat { return Cplx(0.5L, 2) * y; }, 0, 3, y0);
    Cplx want = std::exp(Cplx(0.5L, 2) * Real(3));
    EXPECT_LT(std::abs(sol.final_state()(0, 0) - want) / std::abs(want), 1e-12L);
    Cplx mid = std::exp(Cplx(0.5L, 2) * Real(1.3L));
    EXPECT_LT(std::abs(sol.at(1.3L)(0, 0) - mid) / std::abs(mid), 1e-9L);
}

TEST(Ode, BackwardIntegrationOfOscillator) {
    // y'' = -y written as a first-order system, integrated from 2 down to 0.
    DormandPrince dp(OdeOptions{1e-13L, 1e-15L});
    Mat y0(2, 1);
    y0 << std::sin(Real(2)), std::cos(Real(2));
    auto sol = dp.solve(
        [](Real, const Mat& y) -> Mat {
            Mat d(2, 1);
            d << y(1, 0), -y(0, 0);
            return d;
        },
        2, 0, y0);
    EXPECT_LT(std::abs(sol.final_state()(0, 0)), 1e-11L);
    EXPECT_LT(std::abs(sol.final_state()(1, 0) - Real(1)), 1e-11L);
}

TEST(Ode, StepLimitRaisesSolverDiverged) {
    OdeOptions o;
    o.max_steps = 3;
    DormandPrince dp(o);
    Mat y0 = Mat::Constant(1, 1, Cplx(1, 0));
    try {
        dp.solve([](Real, const Mat& y) -> Mat { return Real(50) * y; }, 0, 10, y0);
        FAIL() << "expected solver_diverged";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::solver_diverged);
    }
}

TEST(Quadrature, ScalarIntegrals) {
    EXPECT_NEAR(double(integrate([](Real x) { return std::exp(-x); }, 0, 30)), 1 - std::exp(-30.0), 1e-13);
    EXPECT_NEAR(double(integrate([](Real x) { return std::sqrt(x); }, 0, 1)), 2.0 / 3, 1e-10);
}

TEST(Quadrature, MatrixIntegrandOnPanels) {
    auto f = [](Real x) -> Mat {
        Mat m(2, 2);
        m << std::exp(-x), Cplx(0, x * std::exp(-x)), Cplx(0, -x * std::exp(-x)), std::exp(-2 * x);
        return m;
    };
    Mat got = integrate_panels(f, Real(0), Real(60), Real(2));
    Mat want(2, 2);
    want << 1, Cplx(0, 1), Cplx(0, -1), 0.5L;
    EXPECT_LT((got - want).norm(), 1e-12L);
}

TEST(Parallel, EveryIndexVisitedOnce) {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Parallel, ExceptionPropagatesToCaller) {
    EXPECT_THROW(parallel_for(8,
                              [](std::size_t i) {
                                  if (i == 5) throw Error(ErrorKind::invalid_input, "boom");
                              }),
                 Error);
}

TEST(Errors, WrappedErrorKeepsRootCause) {
    Error inner(ErrorKind::no_such_state, "missing");
    EXPECT_EQ(inner.cause(), ErrorKind::no_such_state);
    Error outer(ErrorKind::plan_step_failed, "step 0", inner.cause());
    EXPECT_EQ(outer.kind(), ErrorKind::plan_step_failed);
    EXPECT_EQ(outer.cause(), ErrorKind::no_such_state);
    EXPECT_EQ(to_string(ErrorKind::no_such_state), "no-such-state");
}
