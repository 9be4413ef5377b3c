#pragma once

#include <cmath>
#include <memory>
#include <optional>

#include "specsurg/core.hpp"
#include "specsurg/ode.hpp"
#include "specsurg/problem.hpp"

namespace specsurg {

struct SolverOptions {
    OdeOptions ode{};
    Real tail_tol = 1e-12L;   // x_inf: integral of |V| beyond it
    Real x_cap = 200;         // x_inf <= x_cap / min(1, |Im k| + 0.1)
    Real phi_x_max = 50;      // default range of forward regular solves
};

enum class WaveKind { jost_f, regular_phi, growing_g, physical_psi };

// x_inf: where the potential's tail data becomes accurate, capped to limit growth.
inline Real choose_x_inf(const Potential& v, Cplx k, const SolverOptions& opt) {
    Real cap = opt.x_cap / std::min(Real(1), std::abs(k.imag()) + Real(0.1));
    return v.tail_start(opt.tail_tol, cap);
}

// One k-slice of a matrix wave solution u(k,x) = e^{sigma x} m(x), optionally with a
// co-integrated Gram function Gamma(x) (stored scaled by e^{-2 Re(sigma) x}).
class WaveSlice {
public:
    struct Parts {
        Mat m, p, gram;  // scaled value, scaled derivative m', scaled Gram
    };

    WaveKind kind() const { return kind_; }
    Cplx k() const { return k_; }
    Cplx sigma() const { return sigma_; }
    Eigen::Index n() const { return n_; }
    Eigen::Index cols() const { return cols_; }
    bool has_gram() const { return gram_; }
    Real x_lo() const { return lo_; }
    Real x_hi() const { return hi_; }
    const DenseSolution& dense() const { return sol_; }

    Parts parts(Real x) const {
        if (x < lo_ - Real(1e-12))
            throw Error(ErrorKind::invalid_input, "wave slice queried below its range");
        if (x > hi_ + Real(1e-12)) {
            if (kind_ == WaveKind::jost_f || kind_ == WaveKind::growing_g) return beyond(x);
            throw Error(ErrorKind::invalid_input,
                        "regular solution queried beyond x_max = " + std::to_string(double(hi_)));
        }
        Mat y = sol_.empty() ? sol_.final_state() : sol_.at(x);
        Parts out;
        out.m = y.topRows(n_);
        out.p = y.middleRows(n_, n_);
        if (gram_) out.gram = y.bottomRows(cols_);
        return out;
    }
    Cplx scale(Real x) const { return std::exp(sigma_ * x); }
    Mat value(Real x) const { return parts(x).m * scale(x); }
    Mat deriv(Real x) const {
        Parts p = parts(x);
        return (sigma_ * p.m + p.p) * scale(x);
    }
    // Scaled derivative: e^{-sigma x} u'(x).
    Mat scaled_deriv(Real x) const {
        Parts p = parts(x);
        return sigma_ * p.m + p.p;
    }
    Mat gram(Real x) const { return parts(x).gram * std::exp(Real(2) * sigma_.real() * x); }

    // internal construction
    WaveSlice(WaveKind kind, Cplx k, Cplx sigma, Eigen::Index n, Eigen::Index cols, bool gram, Real lo,
              Real hi, DenseSolution sol, Potential v, Mat right, Real gram_sign)
        : kind_(kind), k_(k), sigma_(sigma), n_(n), cols_(cols), gram_(gram), lo_(lo), hi_(hi),
          sol_(std::move(sol)), v_(std::move(v)), right_(std::move(right)), gram_sign_(gram_sign) {}

private:
    Parts beyond(Real x) const {
        Cplx kk = kind_ == WaveKind::jost_f ? k_ : -k_;
        TailData t = v_.jost_tail(kk, x);
        Parts out;
        out.m = t.m * right_;
        out.p = t.dm * right_;
        if (gram_) {
            // Tail Gram of a decaying solution with slowly varying m beyond x_inf.
            out.gram = out.m.adjoint() * out.m / (Real(-2) * sigma_.real());
        }
        return out;
    }

    WaveKind kind_;
    Cplx k_, sigma_;
    Eigen::Index n_, cols_;
    bool gram_;
    Real lo_, hi_;
    DenseSolution sol_;
    Potential v_;
    Mat right_;
    Real gram_sign_;
};

namespace detail {

struct ScaledSystem {
    Potential v;
    Eigen::Index n, cols;
    Cplx sigma, c0;       // c0 = k^2 + sigma^2
    bool gram;
    Real gram_sign;       // +1: Gamma' = u^dagger u, -1: Gamma' = -u^dagger u

    Mat operator()(Real x, const Mat& y) const {
        Mat d(y.rows(), y.cols());
        auto m = y.topRows(n);
        auto p = y.middleRows(n, n);
        d.topRows(n) = p;
        Mat vm = v(x);
        vm.diagonal().array() -= c0;
        d.middleRows(n, n) = vm * m - (Real(2) * sigma) * p;
        if (gram) {
            d.bottomRows(cols) = (Real(-2) * sigma.real()) * y.bottomRows(cols) + gram_sign * (m.adjoint() * m);
        }
        return d;
    }
};

inline WaveSlice integrate_scaled(WaveKind kind, const Potential& v, Cplx k, Cplx sigma, Real x0, Real x1,
                                  const Mat& m0, const Mat& p0, const Mat* gram0, Real gram_sign,
                                  const Mat& right, const OdeOptions& ode) {
    Eigen::Index n = v.dim(), cols = m0.cols();
    bool gram = gram0 != nullptr;
    Mat y0(2 * n + (gram ? cols : 0), cols);
    y0.topRows(n) = m0;
    y0.middleRows(n, n) = p0;
    if (gram) y0.bottomRows(cols) = *gram0;
    ScaledSystem sys{v, n, cols, sigma, k * k + sigma * sigma, gram, gram_sign};
    DormandPrince dp(ode);
    DenseSolution sol = dp.solve(std::cref(sys), x0, x1, y0);
    Real lo = std::min(x0, x1), hi = std::max(x0, x1);
    return WaveSlice(kind, k, sigma, n, cols, gram, lo, hi, std::move(sol), v, right, gram_sign);
}

}  // namespace detail

// Regular solution phi(k,x) * right on [0, x_max]; phi(k,0) = A, phi'(k,0) = B.
// With gram0 set, Gamma(x) = gram0 + integral_0^x (phi right)^dagger (phi right) is co-integrated.
inline WaveSlice solve_regular(const ProblemSpec& spec, Cplx k, const SolverOptions& opt = {},
                               Real x_max = -1, const Mat* right = nullptr, const Mat* gram0 = nullptr) {
    if (x_max < 0) x_max = opt.phi_x_max;
    Mat r = right ? *right : identity(spec.n());
    Cplx sigma = std::abs(k.imag());
    Mat m0 = spec.A() * r, p0 = spec.B() * r - sigma * m0;
    return detail::integrate_scaled(WaveKind::regular_phi, spec.potential(), k, sigma, 0, x_max, m0, p0, gram0,
                                    Real(1), r, opt.ode);
}

inline void check_k_for_jost(const Potential& v, Cplx k) {
    if (k == Cplx(0)) {
        if (v.decl_class().order() < 1)
            throw Error(ErrorKind::unsupported_at_zero, "Jost solution at k=0 needs an L1_1 potential");
    }
}

// Jost solution f(k,x) * right, integrated backward from x_inf. With with_gram the
// function F(x) = integral_x^inf (f right)^dagger (f right) is co-integrated (Im k > 0).
inline WaveSlice solve_jost(const Potential& v, Cplx k, const SolverOptions& opt = {}, const Mat* right = nullptr,
                            bool with_gram = false, Real x_min = 0) {
    check_k_for_jost(v, k);
    Eigen::Index n = v.dim();
    Mat r = right ? *right : identity(n);
    Real xi = std::max(choose_x_inf(v, k, opt), x_min);
    Cplx sigma = I_unit * k;
    TailData t = v.jost_tail(k, xi);
    Mat m0 = t.m * r, p0 = t.dm * r;
    Mat g0;
    if (with_gram) {
        if (!(k.imag() > 0)) throw Error(ErrorKind::invalid_input, "Gram tail needs Im k > 0");
        g0 = m0.adjoint() * m0 / (Real(2) * k.imag());
    }
    return detail::integrate_scaled(WaveKind::jost_f, v, k, sigma, xi, x_min, m0, p0, with_gram ? &g0 : nullptr,
                                    Real(-1), r, opt.ode);
}

inline WaveSlice solve_jost(const ProblemSpec& spec, Cplx k, const SolverOptions& opt = {}) {
    return solve_jost(spec.potential(), k, opt);
}

// Growing solution g(k,x) = e^{-ikx}[I + o(1)], backward from x_inf.
inline WaveSlice solve_growing_g(const Potential& v, Cplx k, const SolverOptions& opt = {}, Real x_min = 0) {
    if (k == Cplx(0)) throw Error(ErrorKind::unsupported_at_zero, "growing solution needs k != 0");
    Eigen::Index n = v.dim();
    Real xi = std::max(choose_x_inf(v, k, opt), x_min);
    Cplx sigma = -I_unit * k;
    TailData t = v.jost_tail(-k, xi);
    return detail::integrate_scaled(WaveKind::growing_g, v, k, sigma, xi, x_min, t.m, t.dm, nullptr, Real(1),
                                    identity(n), opt.ode);
}

inline WaveSlice solve_growing_g(const ProblemSpec& spec, Cplx k, const SolverOptions& opt = {}) {
    return solve_growing_g(spec.potential(), k, opt);
}

// Jost matrix J(k) = f(-k*,0)^dagger B - f'(-k*,0)^dagger A.
inline Mat jost_matrix(const ProblemSpec& spec, Cplx k, const SolverOptions& opt = {}) {
    Cplx km = -std::conj(k);
    WaveSlice f = solve_jost(spec.potential(), km, opt);
    Mat f0 = f.value(0), df0 = f.deriv(0);
    return f0.adjoint() * spec.B() - df0.adjoint() * spec.A();
}

// Scattering matrix S(k) = -J(-k) J(k)^{-1} for real k != 0.
inline Mat scattering_matrix_from(const Mat& j_plus, const Mat& j_minus, Real k) {
    Eigen::JacobiSVD<Mat> svd(j_plus);
    const auto& s = svd.singularValues();
    if (s(s.size() - 1) <= Real(1e-13) * std::max(Real(1), s(0)))
        throw Error(ErrorKind::exceptional_point, "J(k) singular at real k = " + std::to_string(double(k)));
    return -j_minus * j_plus.inverse();
}

inline Mat scattering_matrix(const ProblemSpec& spec, Real k, const SolverOptions& opt = {}) {
    if (k == 0) throw Error(ErrorKind::exceptional_point, "scattering matrix requested at k = 0");
    return scattering_matrix_from(jost_matrix(spec, k, opt), jost_matrix(spec, -k, opt), k);
}

// Physical solution Psi(k,x) = f(-k,x) + f(k,x) S(k) for real k.
class PhysicalSolution {
public:
    PhysicalSolution(const ProblemSpec& spec, Real k, const SolverOptions& opt = {})
        : k_(k), fp_(solve_jost(spec.potential(), Cplx(k), opt)), fm_(solve_jost(spec.potential(), Cplx(-k), opt)) {
        Mat fpm0 = fm_.value(0), dfpm0 = fm_.deriv(0);
        Mat fpp0 = fp_.value(0), dfpp0 = fp_.deriv(0);
        // J(k) uses f(-k,0) for real k; J(-k) uses f(k,0).
        jk_ = fpm0.adjoint() * spec.B() - dfpm0.adjoint() * spec.A();
        jmk_ = fpp0.adjoint() * spec.B() - dfpp0.adjoint() * spec.A();
        s_ = scattering_matrix_from(jk_, jmk_, k);
    }
    Mat value(Real x) const { return fm_.value(x) + fp_.value(x) * s_; }
    Mat deriv(Real x) const { return fm_.deriv(x) + fp_.deriv(x) * s_; }
    const Mat& smatrix() const { return s_; }
    const Mat& jost_k() const { return jk_; }
    const Mat& jost_minus_k() const { return jmk_; }
    Real k() const { return k_; }

private:
    Real k_;
    WaveSlice fp_, fm_;
    Mat jk_, jmk_, s_;
};

}  // namespace specsurg
