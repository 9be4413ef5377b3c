#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/interpolators/makima.hpp>

#include "specsurg/core.hpp"
#include "specsurg/linalg.hpp"
#include "specsurg/quadrature.hpp"

namespace specsurg {

enum class MomentClass { L1, L1_1, L1_2, L1_3, compact_support };

struct DeclClass {
    MomentClass cls = MomentClass::L1;
    Real support = 0;  // only for compact_support

    // Highest moment order covered; compact support covers all of them.
    int order() const {
        switch (cls) {
        case MomentClass::L1: return 0;
        case MomentClass::L1_1: return 1;
        case MomentClass::L1_2: return 2;
        case MomentClass::L1_3: return 3;
        case MomentClass::compact_support: return 99;
        }
        return 0;
    }
};

inline std::string to_string(const DeclClass& c) {
    switch (c.cls) {
    case MomentClass::L1: return "L1";
    case MomentClass::L1_1: return "L1_1";
    case MomentClass::L1_2: return "L1_2";
    case MomentClass::L1_3: return "L1_3";
    case MomentClass::compact_support: return "compact_support(" + std::to_string(double(c.support)) + ")";
    }
    return "L1";
}

inline DeclClass weaker(const DeclClass& a, const DeclClass& b) {
    if (a.cls == MomentClass::compact_support && b.cls == MomentClass::compact_support)
        return {MomentClass::compact_support, std::max(a.support, b.support)};
    return a.order() <= b.order() ? a : b;
}

// Value and x-derivative of the scaled Jost solution m = e^{-ikx} f at a large x.
struct TailData {
    Mat m, dm;
};

// Closed-form Jost solution f(k,x) and f'(k,x).
struct JostPair {
    Mat f, df;
};

class PotentialModel {
public:
    virtual ~PotentialModel() = default;
    virtual Eigen::Index dim() const = 0;
    virtual Mat value(Real x) const = 0;
    virtual DeclClass decl_class() const = 0;
    // Estimate of the integral of |V| over [x, inf).
    virtual Real tail_l1(Real x) const = 0;
    // Asymptotic data for the scaled Jost solution at x; Levinson data by default.
    virtual TailData jost_tail(Cplx /*k*/, Real /*x*/) const {
        return {identity(dim()), Mat::Zero(dim(), dim())};
    }
    virtual bool power_law_tail() const { return false; }
    virtual std::optional<JostPair> jost_oracle(Cplx, Real) const { return std::nullopt; }
    // Point beyond which V is identically zero; inf if none.
    virtual Real support_end() const { return std::numeric_limits<Real>::infinity(); }
    // Smallest x from which jost_tail is accurate to tail_tol, at most cap. By default the
    // Levinson data is used once the integral of |V| beyond x drops below tail_tol.
    virtual Real tail_start(Real tail_tol, Real cap) const {
        Real se = support_end();
        if (std::isfinite(static_cast<double>(se))) return std::min(se, cap);
        if (tail_l1(cap) >= tail_tol) return cap;
        if (tail_l1(0) < tail_tol) return 0;
        Real lo = 0, hi = cap;
        while (hi - lo > Real(1e-3) * std::max(Real(1), hi)) {
            Real mid = (lo + hi) / 2;
            (tail_l1(mid) < tail_tol ? hi : lo) = mid;
        }
        return hi;
    }
    virtual std::string name() const = 0;
};

class Potential {
public:
    Potential() = default;
    explicit Potential(std::shared_ptr<const PotentialModel> m) : m_(std::move(m)) {}

    Eigen::Index dim() const { return m_->dim(); }
    Mat operator()(Real x) const { return m_->value(x); }
    DeclClass decl_class() const { return m_->decl_class(); }
    Real tail_l1(Real x) const { return m_->tail_l1(x); }
    TailData jost_tail(Cplx k, Real x) const { return m_->jost_tail(k, x); }
    bool power_law_tail() const { return m_->power_law_tail(); }
    std::optional<JostPair> jost_oracle(Cplx k, Real x) const { return m_->jost_oracle(k, x); }
    Real support_end() const { return m_->support_end(); }
    Real tail_start(Real tail_tol, Real cap) const { return m_->tail_start(tail_tol, cap); }
    std::string name() const { return m_->name(); }
    const PotentialModel& model() const { return *m_; }
    std::shared_ptr<const PotentialModel> shared() const { return m_; }
    explicit operator bool() const { return static_cast<bool>(m_); }

private:
    std::shared_ptr<const PotentialModel> m_;
};

// ---------------------------------------------------------------------------
// Scalar families

class ZeroPotential final : public PotentialModel {
public:
    explicit ZeroPotential(Eigen::Index n) : n_(n) {}
    Eigen::Index dim() const override { return n_; }
    Mat value(Real) const override { return Mat::Zero(n_, n_); }
    DeclClass decl_class() const override { return {MomentClass::compact_support, 0}; }
    Real tail_l1(Real) const override { return 0; }
    Real support_end() const override { return 0; }
    std::optional<JostPair> jost_oracle(Cplx k, Real x) const override {
        Cplx e = std::exp(I_unit * k * x);
        return JostPair{identity(n_) * e, identity(n_) * (I_unit * k * e)};
    }
    std::string name() const override { return "zero"; }

private:
    Eigen::Index n_;
};

// V(x) = -8 a e b^2 e^{2bx} / (a + e e^{2bx})^2 with closed-form Jost solution.
class ExponentialFamily final : public PotentialModel {
public:
    ExponentialFamily(Real alpha, Real epsilon, Real beta) : a_(alpha), e_(epsilon), b_(beta) {
        if (!(alpha > 0 && epsilon > 0 && beta > 0))
            throw Error(ErrorKind::invalid_parameter, "exponential family needs alpha, epsilon, beta > 0");
    }
    Eigen::Index dim() const override { return 1; }
    Mat value(Real x) const override {
        Real q = std::exp(-2 * b_ * x);
        Real den = a_ * q + e_;
        Mat v(1, 1);
        v(0, 0) = -8 * a_ * e_ * b_ * b_ * q / (den * den);
        return v;
    }
    DeclClass decl_class() const override { return {MomentClass::L1_3, 0}; }
    Real tail_l1(Real x) const override {
        Real q = std::exp(-2 * b_ * x);
        return 4 * a_ * b_ * q / (a_ * q + e_);
    }
    std::optional<JostPair> jost_oracle(Cplx k, Real x) const override {
        Real q = std::exp(-2 * b_ * x);
        Real den = a_ * q + e_;  // (a + e e^{2bx}) e^{-2bx}
        Cplx ex = std::exp(I_unit * k * x);
        Cplx kb = k + I_unit * b_;
        Cplx frac = Real(2) * I_unit * a_ * b_ * q / (kb * den);
        Cplx dfrac = Real(4) * I_unit * a_ * b_ * b_ * e_ * q / (kb * den * den);
        Mat f(1, 1), df(1, 1);
        f(0, 0) = ex * (Real(1) - frac);
        df(0, 0) = I_unit * k * f(0, 0) + ex * dfrac;
        return JostPair{f, df};
    }
    std::string name() const override { return "exponential"; }
    Real alpha() const { return a_; }
    Real epsilon() const { return e_; }
    Real beta() const { return b_; }

private:
    Real a_, e_, b_;
};

// V(x) = 2/(x+a)^2; integrable but outside L1_1.
class InverseSquareFamily final : public PotentialModel {
public:
    explicit InverseSquareFamily(Real a) : a_(a) {
        if (!(a > 0)) throw Error(ErrorKind::invalid_parameter, "inverse-square family needs a > 0");
    }
    Eigen::Index dim() const override { return 1; }
    Mat value(Real x) const override {
        Mat v(1, 1);
        v(0, 0) = 2 / ((x + a_) * (x + a_));
        return v;
    }
    DeclClass decl_class() const override { return {MomentClass::L1, 0}; }
    Real tail_l1(Real x) const override { return 2 / (x + a_); }
    TailData jost_tail(Cplx k, Real x) const override {
        Real y = x + a_;
        Mat m(1, 1), dm(1, 1);
        m(0, 0) = Real(1) + I_unit / (k * y);
        dm(0, 0) = -I_unit / (k * y * y);
        return {m, dm};
    }
    bool power_law_tail() const override { return true; }
    // The tail data is exact; start the numerical solve at a moderate distance.
    Real tail_start(Real, Real cap) const override { return std::min(Real(20), cap); }
    std::optional<JostPair> jost_oracle(Cplx k, Real x) const override {
        TailData t = jost_tail(k, x);
        Cplx ex = std::exp(I_unit * k * x);
        Mat f = t.m * ex;
        Mat df = (I_unit * k) * f + t.dm * ex;
        return JostPair{f, df};
    }
    std::string name() const override { return "inverse_square"; }
    Real a() const { return a_; }

private:
    Real a_;
};

// ---------------------------------------------------------------------------
// 2x2 combination V = V1 E1 + V2 E2 with complementary rank-one projectors E1, E2.

enum class CombineMode { real, complex };

class CombinedPotential final : public PotentialModel {
public:
    CombinedPotential(Potential v1, Potential v2, CombineMode mode)
        : v1_(std::move(v1)), v2_(std::move(v2)), mode_(mode) {
        if (v1_.dim() != 1 || v2_.dim() != 1)
            throw Error(ErrorKind::invalid_input, "combine expects two scalar potentials");
        e1_ = Mat(2, 2);
        e2_ = Mat(2, 2);
        if (mode == CombineMode::real) {
            e1_ << 0.5L, 0.5L, 0.5L, 0.5L;
            e2_ << 0.5L, -0.5L, -0.5L, 0.5L;
        } else {
            e1_ << Cplx(0.5L, 0), Cplx(0, 0.5L), Cplx(0, -0.5L), Cplx(0.5L, 0);
            e2_ << Cplx(0.5L, 0), Cplx(0, -0.5L), Cplx(0, 0.5L), Cplx(0.5L, 0);
        }
    }
    Eigen::Index dim() const override { return 2; }
    Mat value(Real x) const override { return v1_(x)(0, 0) * e1_ + v2_(x)(0, 0) * e2_; }
    DeclClass decl_class() const override { return weaker(v1_.decl_class(), v2_.decl_class()); }
    Real tail_l1(Real x) const override { return v1_.tail_l1(x) + v2_.tail_l1(x); }
    TailData jost_tail(Cplx k, Real x) const override {
        TailData a = v1_.jost_tail(k, x), b = v2_.jost_tail(k, x);
        return {a.m(0, 0) * e1_ + b.m(0, 0) * e2_, a.dm(0, 0) * e1_ + b.dm(0, 0) * e2_};
    }
    bool power_law_tail() const override { return v1_.power_law_tail() || v2_.power_law_tail(); }
    Real support_end() const override { return std::max(v1_.support_end(), v2_.support_end()); }
    Real tail_start(Real tail_tol, Real cap) const override {
        return std::max(v1_.tail_start(tail_tol, cap), v2_.tail_start(tail_tol, cap));
    }
    std::optional<JostPair> jost_oracle(Cplx k, Real x) const override {
        auto a = v1_.jost_oracle(k, x), b = v2_.jost_oracle(k, x);
        if (!a || !b) return std::nullopt;
        return JostPair{a->f(0, 0) * e1_ + b->f(0, 0) * e2_, a->df(0, 0) * e1_ + b->df(0, 0) * e2_};
    }
    std::string name() const override { return "combine"; }
    const Potential& first() const { return v1_; }
    const Potential& second() const { return v2_; }
    CombineMode mode() const { return mode_; }

private:
    Potential v1_, v2_;
    CombineMode mode_;
    Mat e1_, e2_;
};

// Constant Hermitian matrix times a scalar potential: V(x) = v(x) * M.
class ScaledPotential final : public PotentialModel {
public:
    ScaledPotential(Potential scalar, Mat m) : v_(std::move(scalar)), m_(std::move(m)) {
        if (v_.dim() != 1) throw Error(ErrorKind::invalid_input, "scaled potential expects a scalar base");
        if (!is_hermitian(m_)) throw Error(ErrorKind::invalid_input, "scaled potential matrix must be Hermitian");
    }
    Eigen::Index dim() const override { return m_.rows(); }
    Mat value(Real x) const override { return v_(x)(0, 0) * m_; }
    DeclClass decl_class() const override { return v_.decl_class(); }
    Real tail_l1(Real x) const override { return v_.tail_l1(x) * spectral_norm(m_); }
    Real support_end() const override { return v_.support_end(); }
    std::string name() const override { return "scaled"; }

private:
    Potential v_;
    Mat m_;
};

// ---------------------------------------------------------------------------
// Tabulated samples, zero beyond the last grid point.

enum class Interpolation { linear, cubic };

class TabulatedPotential final : public PotentialModel {
public:
    TabulatedPotential(std::vector<Real> grid, std::vector<Mat> samples, Interpolation interp)
        : x_(std::move(grid)), v_(std::move(samples)), interp_(interp) {
        if (x_.empty() || x_.size() != v_.size())
            throw Error(ErrorKind::invalid_grid, "grid and samples must be non-empty and equal length");
        if (x_.front() != 0) throw Error(ErrorKind::invalid_grid, "grid must start at x = 0");
        for (std::size_t i = 1; i < x_.size(); ++i)
            if (!(x_[i] > x_[i - 1])) throw Error(ErrorKind::invalid_grid, "grid must be strictly increasing");
        n_ = v_.front().rows();
        for (std::size_t i = 0; i < v_.size(); ++i) {
            if (v_[i].rows() != n_ || v_[i].cols() != n_)
                throw Error(ErrorKind::invalid_sample, "sample " + std::to_string(i) + " has wrong shape");
            if (!all_finite(v_[i])) throw Error(ErrorKind::invalid_sample, "sample " + std::to_string(i) + " not finite");
            if (!is_hermitian(v_[i], 1e-12))
                throw Error(ErrorKind::invalid_sample, "sample " + std::to_string(i) + " is not Hermitian");
        }
        if (interp_ == Interpolation::cubic && x_.size() >= 4) build_cubic();
        // cumulative integral of |V| from the right, trapezoid rule
        cum_.assign(x_.size(), 0);
        for (std::size_t i = x_.size() - 1; i-- > 0;) {
            Real a = spectral_norm(v_[i]), b = spectral_norm(v_[i + 1]);
            cum_[i] = cum_[i + 1] + (x_[i + 1] - x_[i]) * (a + b) / 2;
        }
    }
    Eigen::Index dim() const override { return n_; }
    Mat value(Real x) const override {
        if (x < 0 || x > x_.back()) return Mat::Zero(n_, n_);
        if (x_.size() == 1) return v_.front();
        if (!splines_.empty()) {
            Mat out(n_, n_);
            std::size_t s = 0;
            for (Eigen::Index i = 0; i < n_; ++i)
                for (Eigen::Index j = i; j < n_; ++j) {
                    Real re = splines_[s++](x);
                    Real im = i == j ? Real(0) : splines_[s](x);
                    if (i != j) ++s;
                    out(i, j) = Cplx(re, im);
                    out(j, i) = std::conj(out(i, j));
                }
            return out;
        }
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - x_.begin()), x_.size() - 1);
        if (i == 0) i = 1;
        Real t = (x - x_[i - 1]) / (x_[i] - x_[i - 1]);
        return (1 - t) * v_[i - 1] + t * v_[i];
    }
    DeclClass decl_class() const override { return {MomentClass::compact_support, x_.back()}; }
    Real tail_l1(Real x) const override {
        if (x >= x_.back()) return 0;
        if (x <= 0) return cum_.front();
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = static_cast<std::size_t>(it - x_.begin());
        return cum_[i] + (x_[i] - x) * spectral_norm(v_[i]);
    }
    Real support_end() const override { return x_.back(); }
    std::string name() const override { return "tabulated"; }
    const std::vector<Real>& grid() const { return x_; }
    const std::vector<Mat>& samples() const { return v_; }
    Interpolation interpolation() const { return interp_; }

private:
    using Spline = boost::math::interpolators::makima<std::vector<Real>>;
    void build_cubic() {
        for (Eigen::Index i = 0; i < n_; ++i)
            for (Eigen::Index j = i; j < n_; ++j) {
                std::vector<Real> re, im;
                for (const auto& m : v_) {
                    re.push_back(m(i, j).real());
                    im.push_back(m(i, j).imag());
                }
                splines_.emplace_back(std::vector<Real>(x_), std::move(re));
                if (i != j) splines_.emplace_back(std::vector<Real>(x_), std::move(im));
            }
    }
    std::vector<Real> x_;
    std::vector<Mat> v_;
    Interpolation interp_;
    Eigen::Index n_ = 0;
    std::vector<Spline> splines_;
    std::vector<Real> cum_;
};

// ---------------------------------------------------------------------------
// Constructors

inline Potential zero_potential(Eigen::Index n) { return Potential(std::make_shared<ZeroPotential>(n)); }

inline Potential family_exponential(Real alpha, Real epsilon, Real beta) {
    return Potential(std::make_shared<ExponentialFamily>(alpha, epsilon, beta));
}

inline Potential family_inverse_square(Real a) { return Potential(std::make_shared<InverseSquareFamily>(a)); }

inline Potential combine_scalar_to_matrix(Potential v1, Potential v2, CombineMode mode) {
    return Potential(std::make_shared<CombinedPotential>(std::move(v1), std::move(v2), mode));
}

inline Potential scaled_potential(Potential scalar, Mat m) {
    return Potential(std::make_shared<ScaledPotential>(std::move(scalar), std::move(m)));
}

inline Potential tabulated_potential(std::vector<Real> grid, std::vector<Mat> samples, Interpolation interp) {
    return Potential(std::make_shared<TabulatedPotential>(std::move(grid), std::move(samples), interp));
}

// ---------------------------------------------------------------------------
// Moment-class check by windowed quadrature of (1+x)^eps |V|.

struct MomentReport {
    int epsilon = 0;
    std::vector<Real> windows;    // X values
    std::vector<Real> integrals;  // integral over [0, X]
    bool converging = false;      // last-decade relative growth below 1%
};

inline MomentReport certify_moment_class(const Potential& v, int epsilon,
                                         std::vector<Real> windows = {1e2L, 1e3L, 1e4L}) {
    MomentReport r;
    r.epsilon = epsilon;
    r.windows = windows;
    Real prev_x = 0, acc = 0;
    QuadOptions q;
    q.rel_tol = 1e-9L;
    for (Real X : windows) {
        auto integrand = [&](Real x) { return std::pow(1 + x, Real(epsilon)) * spectral_norm(v(x)); };
        // logarithmic panels keep long windows cheap
        Real a = prev_x;
        while (a < X) {
            Real b = std::min(X, std::max(a + 1, a * 2));
            acc += integrate(integrand, a, b, q);
            a = b;
        }
        r.integrals.push_back(acc);
        prev_x = X;
    }
    std::size_t n = r.integrals.size();
    if (n >= 2) {
        Real last = r.integrals[n - 1], before = r.integrals[n - 2];
        r.converging = std::abs(last - before) <= Real(0.01) * std::max(std::abs(last), Real(1e-300L));
    }
    return r;
}

}  // namespace specsurg
