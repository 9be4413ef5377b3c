#pragma once

#include <array>
#include <cmath>
#include <queue>
#include <vector>

#include "specsurg/core.hpp"

namespace specsurg {

namespace detail {

inline Real norm_of(Real v) { return std::abs(v); }
inline Real norm_of(const Cplx& v) { return std::abs(v); }
inline Real norm_of(const Mat& v) { return v.cwiseAbs().maxCoeff(); }

// 15-point Kronrod nodes on [0,1] (symmetric half) with the embedded 7-point Gauss rule.
inline constexpr std::array<Real, 8> kronrod_x = {
    0.991455371120812639206854697526329L, 0.949107912342758524526189684047851L,
    0.864864423359769072789712788640926L, 0.741531185599394439863864773280788L,
    0.586087235467691130294144845693013L, 0.405845151377397166906606412076961L,
    0.207784955007898467600689403773245L, 0.000000000000000000000000000000000L};
inline constexpr std::array<Real, 8> kronrod_w = {
    0.022935322010529224963732008058970L, 0.063092092629978553290700663189204L,
    0.104790010322250183839876322541518L, 0.140653259715525918745189590510238L,
    0.169004726639267902826583426598550L, 0.190350578064785409913256402421014L,
    0.204432940075298892414161999234649L, 0.209482141084727828012999174891714L};
inline constexpr std::array<Real, 4> gauss_w = {
    0.129484966168869693270611432679082L, 0.279705391489276667901467771423780L,
    0.381830050505118944950369775488975L, 0.417959183673469387755102040816327L};

template <class F, class T = std::invoke_result_t<F, Real>>
std::pair<T, Real> gk15(const F& f, Real a, Real b) {
    Real c = (a + b) / 2, hl = (b - a) / 2;
    T fc = f(c);
    T resk = fc * kronrod_w[7];
    T resg = fc * gauss_w[3];
    for (int j = 0; j < 7; ++j) {
        Real dx = hl * kronrod_x[j];
        T s = f(c - dx) + f(c + dx);
        resk = resk + s * kronrod_w[j];
        if (j % 2 == 1) resg = resg + s * gauss_w[j / 2];
    }
    T diff = resk - resg;
    return {resk * hl, norm_of(diff) * std::abs(hl)};
}

}  // namespace detail

struct QuadOptions {
    Real rel_tol = 1e-11L;
    Real abs_tol = 1e-14L;
    int max_intervals = 4000;
};

// Adaptive Gauss-Kronrod (G7/K15) on [a,b] for scalar or matrix-valued integrands.
template <class F, class T = std::invoke_result_t<F, Real>>
T integrate(const F& f, Real a, Real b, QuadOptions opt = {}) {
    struct Piece {
        Real a, b;
        T val;
        Real err;
        bool operator<(const Piece& o) const { return err < o.err; }
    };
    std::priority_queue<Piece> heap;
    auto [v0, e0] = detail::gk15(f, a, b);
    heap.push({a, b, v0, e0});
    T total = v0;
    Real err = e0;
    int count = 1;
    while (err > std::max(opt.abs_tol, opt.rel_tol * detail::norm_of(total)) && count < opt.max_intervals) {
        Piece p = heap.top();
        heap.pop();
        Real m = (p.a + p.b) / 2;
        auto [vl, el] = detail::gk15(f, p.a, m);
        auto [vr, er] = detail::gk15(f, m, p.b);
        total = total - p.val + vl + vr;
        err = err - p.err + el + er;
        heap.push({p.a, m, vl, el});
        heap.push({m, p.b, vr, er});
        count += 1;
    }
    // Re-sum to avoid drift from repeated subtraction.
    T sum = heap.top().val * Real(0);
    while (!heap.empty()) {
        sum = sum + heap.top().val;
        heap.pop();
    }
    return sum;
}

// Integral over [a, b] split into unit-ish panels; useful for long oscillation-free ranges.
template <class F, class T = std::invoke_result_t<F, Real>>
T integrate_panels(const F& f, Real a, Real b, Real panel, QuadOptions opt = {}) {
    int n = std::max(1, static_cast<int>(std::ceil((b - a) / panel)));
    Real h = (b - a) / n;
    T sum = integrate(f, a, a + h, opt);
    for (int i = 1; i < n; ++i) sum = sum + integrate(f, a + i * h, a + (i + 1) * h, opt);
    return sum;
}

}  // namespace specsurg
