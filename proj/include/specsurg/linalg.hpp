#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "specsurg/core.hpp"

namespace specsurg {

struct LinalgTolerances {
    double rank_tol = 1e-8;  // relative to sigma_max
    double lin = 1e-10;      // Penrose / square-root residuals, relative to norm
    double pos = 1e-12;      // positivity floor, relative to norm
    double herm = 1e-12;     // hermiticity, relative to norm
    double proj = 1e-8;      // trace-is-integer slack for projections
};

template <class R>
R spectral_norm(const CMat<R>& m) {
    if (m.size() == 0) return R(0);
    Eigen::JacobiSVD<CMat<R>> svd(m);
    return svd.singularValues()(0);
}

template <class R>
CMat<R> adjoint(const CMat<R>& m) {
    return m.adjoint();
}

template <class R>
CMat<R> hermitian_part(const CMat<R>& m) {
    return (m + m.adjoint()) * R(0.5);
}

template <class R>
bool is_hermitian(const CMat<R>& m, double tol = 1e-12) {
    if (m.rows() != m.cols()) return false;
    R scale = std::max<R>(R(1), m.cwiseAbs().maxCoeff());
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= R(tol) * scale;
}

// Moore-Penrose inverse; singular values below rank_tol * sigma_max are dropped.
template <class R>
CMat<R> pinv(const CMat<R>& m, double rank_tol = 1e-8) {
    if (!all_finite(m)) throw Error(ErrorKind::invalid_input, "pinv: non-finite entries");
    if (m.size() == 0) return CMat<R>(m.cols(), m.rows());
    Eigen::JacobiSVD<CMat<R>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    R cut = s.size() ? R(rank_tol) * s(0) : R(0);
    CMat<R> sinv = CMat<R>::Zero(m.cols(), m.rows());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cut && s(i) > R(0)) sinv(i, i) = R(1) / s(i);
    return svd.matrixV() * sinv * svd.matrixU().adjoint();
}

template <class R>
struct PenroseResiduals {
    R mpm, pmp, mp_herm, pm_herm;
    R max() const { return std::max({mpm, pmp, mp_herm, pm_herm}); }
};

// Relative residuals of the four Penrose identities.
template <class R>
PenroseResiduals<R> penrose_residuals(const CMat<R>& m, const CMat<R>& p) {
    auto rel = [](const CMat<R>& a, const CMat<R>& b) {
        R s = std::max<R>(R(1), b.norm());
        return (a - b).norm() / s;
    };
    CMat<R> mp = m * p, pm = p * m;
    return {rel(mp * m, m), rel(pm * p, p), rel(mp.adjoint(), mp), rel(pm.adjoint(), pm)};
}

template <class R>
struct SqrtPair {
    CMat<R> sqrt;
    CMat<R> inv_sqrt;
};

// Positive square root and its inverse through the eigendecomposition.
template <class R>
SqrtPair<R> herm_sqrt_inv(const CMat<R>& h, double pos_tol = 1e-12, double herm_tol = 1e-10) {
    if (!all_finite(h)) throw Error(ErrorKind::invalid_input, "herm_sqrt_inv: non-finite entries");
    if (!is_hermitian(h, herm_tol)) throw Error(ErrorKind::invalid_input, "herm_sqrt_inv: not Hermitian");
    CMat<R> hs = hermitian_part(h);
    Eigen::SelfAdjointEigenSolver<CMat<R>> es(hs);
    const auto& ev = es.eigenvalues();
    R scale = std::max<R>(R(1e-300L), ev.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (!(ev(i) > R(pos_tol) * scale))
            throw Error(ErrorKind::not_positive, "herm_sqrt_inv: eigenvalue " +
                                                     std::to_string(double(ev(i))) + " not positive");
    const CMat<R>& u = es.eigenvectors();
    CMat<R> d = CMat<R>::Zero(h.rows(), h.cols()), di = d;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        d(i, i) = std::sqrt(ev(i));
        di(i, i) = R(1) / std::sqrt(ev(i));
    }
    CMat<R> s = u * d * u.adjoint(), si = u * di * u.adjoint();
    return {hermitian_part(s), hermitian_part(si)};
}

// Hermitian matrix with validated symmetry.
template <class R>
class HermMatrixT {
public:
    explicit HermMatrixT(const CMat<R>& m, double tol = 1e-12) {
        if (!is_hermitian(m, tol)) throw Error(ErrorKind::invalid_input, "matrix is not Hermitian");
        m_ = hermitian_part(m);
    }
    const CMat<R>& matrix() const { return m_; }
    Eigen::Index size() const { return m_.rows(); }

private:
    CMat<R> m_;
};

// Orthogonal projection: P^2 = P, P^dagger = P, integer trace.
template <class R>
class OrthProjectionT {
public:
    OrthProjectionT() = default;
    explicit OrthProjectionT(const CMat<R>& p, double tol = 1e-8) {
        if (p.rows() != p.cols()) throw Error(ErrorKind::invalid_input, "projection must be square");
        CMat<R> h = hermitian_part(p);
        R err = std::max((p - p.adjoint()).cwiseAbs().maxCoeff(), (p * p - p).cwiseAbs().maxCoeff());
        if (err > R(tol)) throw Error(ErrorKind::invalid_input, "matrix is not an orthogonal projection");
        R tr = std::real(h.trace());
        int r = static_cast<int>(std::lround(static_cast<double>(tr)));
        if (std::abs(tr - R(r)) > R(tol)) throw Error(ErrorKind::invalid_input, "projection trace not integral");
        m_ = h;
        rank_ = r;
    }
    static OrthProjectionT zero(Eigen::Index n) {
        OrthProjectionT p;
        p.m_ = CMat<R>::Zero(n, n);
        p.rank_ = 0;
        return p;
    }
    const CMat<R>& matrix() const { return m_; }
    int rank() const { return rank_; }
    Eigen::Index size() const { return m_.rows(); }
    // Orthonormal basis of the range (n x rank).
    CMat<R> basis() const {
        Eigen::SelfAdjointEigenSolver<CMat<R>> es(m_);
        return es.eigenvectors().rightCols(rank_);
    }
    // Residuals of P^2 = P and P^dagger = P.
    R idempotency_residual() const { return (m_ * m_ - m_).cwiseAbs().maxCoeff(); }
    R hermiticity_residual() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }

private:
    CMat<R> m_;
    int rank_ = 0;
};

using HermMatrix = HermMatrixT<Real>;
using OrthProjection = OrthProjectionT<Real>;

// Projector onto span{v_i}; orthonormalized with an SVD of the stacked columns.
template <class R>
OrthProjectionT<R> projector_from_span(const std::vector<CVec<R>>& vectors, double rank_tol = 1e-8) {
    if (vectors.empty()) throw Error(ErrorKind::invalid_span, "no vectors given");
    Eigen::Index n = vectors.front().size();
    CMat<R> m(n, static_cast<Eigen::Index>(vectors.size()));
    for (std::size_t j = 0; j < vectors.size(); ++j) {
        if (vectors[j].size() != n) throw Error(ErrorKind::invalid_input, "vectors of unequal length");
        m.col(static_cast<Eigen::Index>(j)) = vectors[j];
    }
    if (!all_finite(m)) throw Error(ErrorKind::invalid_input, "non-finite span vector");
    Eigen::JacobiSVD<CMat<R>> svd(m, Eigen::ComputeFullU);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == R(0)) throw Error(ErrorKind::invalid_span, "all vectors are zero");
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > R(rank_tol) * s(0)) ++r;
    CMat<R> u = svd.matrixU().leftCols(r);
    return OrthProjectionT<R>(CMat<R>(u * u.adjoint()));
}

template <class R>
OrthProjectionT<R> projector_from_columns(const CMat<R>& m, double rank_tol = 1e-8) {
    std::vector<CVec<R>> v;
    for (Eigen::Index j = 0; j < m.cols(); ++j) v.push_back(m.col(j));
    return projector_from_span(v, rank_tol);
}

template <class R>
struct KernelResult {
    OrthProjectionT<R> projector;
    bool rank_ambiguous = false;
    R smallest_kept = R(0);   // smallest singular value treated as nonzero
    R largest_dropped = R(0); // largest singular value treated as zero
};

// Projector onto the numerical null space. When scale > 0 it replaces sigma_max as the
// reference for the relative threshold.
template <class R>
KernelResult<R> kernel_projector_ex(const CMat<R>& m, double rank_tol = 1e-8, R scale = R(-1)) {
    if (!all_finite(m)) throw Error(ErrorKind::invalid_input, "kernel_projector: non-finite entries");
    Eigen::Index n = m.cols();
    Eigen::JacobiSVD<CMat<R>> svd(m, Eigen::ComputeFullV);
    CVec<R> s = CVec<R>::Zero(n);
    const auto& sv = svd.singularValues();
    for (Eigen::Index i = 0; i < sv.size(); ++i) s(i) = sv(i);
    R ref = scale > R(0) ? scale : (sv.size() ? sv(0) : R(0));
    R cut = R(rank_tol) * ref;
    KernelResult<R> out;
    CMat<R> p = CMat<R>::Zero(n, n);
    bool any_kept = false;
    for (Eigen::Index i = 0; i < n; ++i) {
        R si = std::real(s(i));
        if (si < cut || ref == R(0)) {
            p += svd.matrixV().col(i) * svd.matrixV().col(i).adjoint();
            out.largest_dropped = std::max(out.largest_dropped, si);
            if (si > cut / R(10)) out.rank_ambiguous = true;
        } else {
            out.smallest_kept = any_kept ? std::min(out.smallest_kept, si) : si;
            any_kept = true;
            if (si < cut * R(10)) out.rank_ambiguous = true;
        }
    }
    out.projector = OrthProjectionT<R>(p);
    return out;
}

template <class R>
OrthProjectionT<R> kernel_projector(const CMat<R>& m, double rank_tol = 1e-8) {
    return kernel_projector_ex(m, rank_tol).projector;
}

// 2x2 rank-one projection parametrized by (beta, gamma) and the sign of the diagonal root.
template <class R>
OrthProjectionT<R> rank_one_proj_2x2(R beta, R gamma, int sign) {
    R d = R(0.25) - beta * beta - gamma * gamma;
    if (d < R(0)) throw Error(ErrorKind::out_of_domain, "beta^2 + gamma^2 > 1/4");
    R root = std::sqrt(d) * (sign >= 0 ? R(1) : R(-1));
    CMat<R> p(2, 2);
    p(0, 0) = R(0.5) + root;
    p(0, 1) = std::complex<R>(beta, gamma);
    p(1, 0) = std::complex<R>(beta, -gamma);
    p(1, 1) = R(0.5) - root;
    return OrthProjectionT<R>(p);
}

// I - P for a rank-one 2x2 projection.
template <class R>
OrthProjectionT<R> complementary_projection_2x2(const OrthProjectionT<R>& p) {
    if (p.size() != 2 || p.rank() != 1) throw Error(ErrorKind::invalid_rank, "expected a 2x2 rank-one projection");
    return OrthProjectionT<R>(CMat<R>(CMat<R>::Identity(2, 2) - p.matrix()));
}

// Inverse of m restricted to range(u): u (u^dagger m u)^{-1} u^dagger, u orthonormal columns.
template <class R>
CMat<R> restricted_inverse(const CMat<R>& m, const CMat<R>& u) {
    CMat<R> core = u.adjoint() * m * u;
    return u * core.inverse() * u.adjoint();
}

template <class R>
R condition_number(const CMat<R>& m) {
    Eigen::JacobiSVD<CMat<R>> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return R(1);
    R lo = s(s.size() - 1);
    return lo > R(0) ? s(0) / lo : std::numeric_limits<R>::infinity();
}

}  // namespace specsurg
