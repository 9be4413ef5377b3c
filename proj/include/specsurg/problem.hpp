#pragma once

#include <string>
#include <utility>

#include "specsurg/core.hpp"
#include "specsurg/linalg.hpp"
#include "specsurg/potential.hpp"

namespace specsurg {

class BoundaryPair {
public:
    const Mat& A() const { return a_; }
    const Mat& B() const { return b_; }
    Eigen::Index dim() const { return a_.rows(); }
    // Smallest eigenvalue of A^dagger A + B^dagger B, recorded at validation.
    Real min_eigenvalue() const { return min_eig_; }

private:
    friend BoundaryPair validate_boundary(const Mat&, const Mat&, double);
    Mat a_, b_;
    Real min_eig_ = 0;
};

// Checks -B^dagger A + A^dagger B = 0 and A^dagger A + B^dagger B > 0.
inline BoundaryPair validate_boundary(const Mat& a, const Mat& b, double tol = 1e-10) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows() || a.rows() == 0)
        throw Error(ErrorKind::invalid_input, "boundary matrices must be square and of equal size");
    if (!all_finite(a) || !all_finite(b)) throw Error(ErrorKind::invalid_input, "boundary matrices not finite");
    Real scale = std::max<Real>(Real(1), std::max(a.norm(), b.norm()));
    Mat sa = -b.adjoint() * a + a.adjoint() * b;
    if (sa.norm() > Real(tol) * scale * scale)
        throw Error(ErrorKind::non_selfadjoint_boundary,
                    "-B^dagger A + A^dagger B has norm " + std::to_string(double(sa.norm())));
    Mat g = a.adjoint() * a + b.adjoint() * b;
    Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(g));
    Real lo = es.eigenvalues()(0);
    if (!(lo > Real(tol) * scale * scale))
        throw Error(ErrorKind::degenerate_boundary,
                    "A^dagger A + B^dagger B is not positive definite (min eigenvalue " +
                        std::to_string(double(lo)) + ")");
    BoundaryPair p;
    p.a_ = a;
    p.b_ = b;
    p.min_eig_ = lo;
    return p;
}

inline Mat boundary_gram(const BoundaryPair& p) { return p.A().adjoint() * p.A() + p.B().adjoint() * p.B(); }

class ProblemSpec {
public:
    ProblemSpec(Potential v, BoundaryPair bc) : v_(std::move(v)), bc_(std::move(bc)) {
        if (!v_) throw Error(ErrorKind::invalid_input, "problem without potential");
        if (v_.dim() != bc_.dim())
            throw Error(ErrorKind::invalid_input, "potential and boundary matrices have different sizes");
    }
    const Potential& potential() const { return v_; }
    const BoundaryPair& boundary() const { return bc_; }
    const Mat& A() const { return bc_.A(); }
    const Mat& B() const { return bc_.B(); }
    Eigen::Index n() const { return bc_.dim(); }

    // Same potential, boundary pair right-multiplied by an invertible T.
    ProblemSpec regauged(const Mat& t) const { return {v_, validate_boundary(A() * t, B() * t)}; }

private:
    Potential v_;
    BoundaryPair bc_;
};

inline ProblemSpec make_problem(Potential v, const Mat& a, const Mat& b) {
    return ProblemSpec(std::move(v), validate_boundary(a, b));
}

}  // namespace specsurg
