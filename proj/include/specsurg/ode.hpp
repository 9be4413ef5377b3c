#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "specsurg/core.hpp"

namespace specsurg {

struct OdeOptions {
    Real rtol = 1e-10L;
    Real atol = 1e-12L;
    Real h_init = 0;  // 0 selects automatically
    Real h_max = 0;   // 0 means unbounded
    long max_steps = 2'000'000;
};

// Dormand-Prince 5(4) on a matrix-valued state, with the standard
// fourth-order continuous extension kept for every accepted step.
class DenseSolution {
public:
    struct Step {
        Real x0, h;
        Mat y0, r1, r2, r3, r4;  // interpolation coefficients
    };

    Real x_begin() const { return x_begin_; }
    Real x_end() const { return x_end_; }
    bool empty() const { return steps_.empty(); }
    std::size_t size() const { return steps_.size(); }
    const Mat& final_state() const { return y_end_; }

    Mat at(Real x) const {
        if (steps_.empty()) return y_end_;
        const Step& s = locate(x);
        Real th = (x - s.x0) / s.h;
        th = std::clamp(th, Real(0), Real(1));
        Real th1 = Real(1) - th;
        return s.y0 + th * (s.r1 + th1 * (s.r2 + th * (s.r3 + th1 * s.r4)));
    }

private:
    friend class DormandPrince;
    const Step& locate(Real x) const {
        bool fwd = x_end_ >= x_begin_;
        auto it = std::upper_bound(steps_.begin(), steps_.end(), x, [fwd](Real v, const Step& s) {
            return fwd ? v < s.x0 : v > s.x0;
        });
        if (it == steps_.begin()) return steps_.front();
        return *(it - 1);
    }
    std::vector<Step> steps_;
    Real x_begin_ = 0, x_end_ = 0;
    Mat y_end_;
};

class DormandPrince {
public:
    using Rhs = std::function<Mat(Real, const Mat&)>;
    // Error weights per row of the state; empty means all rows count.
    explicit DormandPrince(OdeOptions opt = {}) : opt_(opt) {}

    // Integrate y' = f(x, y) from x0 to x1 (either direction).
    DenseSolution solve(const Rhs& f, Real x0, Real x1, const Mat& y0, bool keep_dense = true) const {
        static constexpr Real c2 = 1.0L / 5, c3 = 3.0L / 10, c4 = 4.0L / 5, c5 = 8.0L / 9;
        static constexpr Real a21 = 1.0L / 5;
        static constexpr Real a31 = 3.0L / 40, a32 = 9.0L / 40;
        static constexpr Real a41 = 44.0L / 45, a42 = -56.0L / 15, a43 = 32.0L / 9;
        static constexpr Real a51 = 19372.0L / 6561, a52 = -25360.0L / 2187, a53 = 64448.0L / 6561,
                              a54 = -212.0L / 729;
        static constexpr Real a61 = 9017.0L / 3168, a62 = -355.0L / 33, a63 = 46732.0L / 5247,
                              a64 = 49.0L / 176, a65 = -5103.0L / 18656;
        static constexpr Real a71 = 35.0L / 384, a73 = 500.0L / 1113, a74 = 125.0L / 192,
                              a75 = -2187.0L / 6784, a76 = 11.0L / 84;
        static constexpr Real e1 = 71.0L / 57600, e3 = -71.0L / 16695, e4 = 71.0L / 1920,
                              e5 = -17253.0L / 339200, e6 = 22.0L / 525, e7 = -1.0L / 40;
        static constexpr Real d1 = -12715105075.0L / 11282082432, d3 = 87487479700.0L / 32700410799,
                              d4 = -10690763975.0L / 1880347072, d5 = 701980252875.0L / 199316789632,
                              d6 = -1453857185.0L / 822651844, d7 = 69997945.0L / 29380423;

        DenseSolution sol;
        sol.x_begin_ = x0;
        sol.x_end_ = x1;
        if (!all_finite(y0)) throw Error(ErrorKind::solver_diverged, "non-finite initial data");
        if (x0 == x1) {
            sol.y_end_ = y0;
            return sol;
        }
        const Real dir = x1 > x0 ? Real(1) : Real(-1);
        const Real span = std::abs(x1 - x0);
        Real x = x0;
        Mat y = y0;
        Mat k1 = f(x, y);
        Real h = opt_.h_init > 0 ? opt_.h_init : initial_step(f, x, y, k1, dir, span);
        if (opt_.h_max > 0) h = std::min(h, opt_.h_max);
        long steps = 0;
        Real err_prev = 1e-4L;
        while (dir * (x1 - x) > Real(0)) {
            if (++steps > opt_.max_steps)
                throw Error(ErrorKind::solver_diverged, "step limit exceeded at x=" + std::to_string(double(x)));
            bool last = false;
            if (h >= std::abs(x1 - x)) {
                h = std::abs(x1 - x);
                last = true;
            }
            Real hs = dir * h;
            Mat k2 = f(x + c2 * hs, y + hs * (a21 * k1));
            Mat k3 = f(x + c3 * hs, y + hs * (a31 * k1 + a32 * k2));
            Mat k4 = f(x + c4 * hs, y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
            Mat k5 = f(x + c5 * hs, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            Mat k6 = f(x + hs, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            Mat ynew = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            Mat k7 = f(x + hs, ynew);
            Mat errv = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            Real err = 0;
            for (Eigen::Index j = 0; j < y.cols(); ++j)
                for (Eigen::Index i = 0; i < y.rows(); ++i) {
                    Real sc = opt_.atol + opt_.rtol * std::max(std::abs(y(i, j)), std::abs(ynew(i, j)));
                    err = std::max(err, std::abs(errv(i, j)) / sc);
                }
            if (!std::isfinite(static_cast<double>(err)))
                throw Error(ErrorKind::solver_diverged, "non-finite state at x=" + std::to_string(double(x)));
            if (err <= Real(1)) {
                if (keep_dense) {
                    DenseSolution::Step s;
                    s.x0 = x;
                    s.h = hs;
                    Mat dy = ynew - y;
                    Mat bspl = hs * k1 - dy;
                    s.y0 = y;
                    s.r1 = dy;
                    s.r2 = bspl;
                    s.r3 = dy - hs * k7 - bspl;
                    s.r4 = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
                    sol.steps_.push_back(std::move(s));
                }
                x = last ? x1 : x + hs;
                y = std::move(ynew);
                k1 = std::move(k7);
                // PI step control
                Real fac = Real(0.9) * std::pow(std::max(err, Real(1e-10)), Real(-0.7) / 5) *
                           std::pow(err_prev, Real(0.4) / 5);
                fac = std::clamp(fac, Real(0.2), Real(5));
                err_prev = std::max(err, Real(1e-4));
                h *= fac;
            } else {
                h *= std::max(Real(0.2), Real(0.9) * std::pow(err, Real(-0.2)));
            }
            if (opt_.h_max > 0) h = std::min(h, opt_.h_max);
            if (h < span * Real(1e-16))
                throw Error(ErrorKind::solver_diverged, "step size underflow at x=" + std::to_string(double(x)));
        }
        sol.y_end_ = y;
        return sol;
    }

private:
    Real initial_step(const Rhs& f, Real x, const Mat& y, const Mat& k1, Real dir, Real span) const {
        auto sc_norm = [&](const Mat& v) {
            Real s = 0;
            for (Eigen::Index j = 0; j < y.cols(); ++j)
                for (Eigen::Index i = 0; i < y.rows(); ++i) {
                    Real w = opt_.atol + opt_.rtol * std::abs(y(i, j));
                    s = std::max(s, std::abs(v(i, j)) / w);
                }
            return s;
        };
        Real d0 = sc_norm(y), d1 = sc_norm(k1);
        Real h0 = (d0 < 1e-5L || d1 < 1e-5L) ? Real(1e-6) : Real(0.01) * d0 / d1;
        h0 = std::min(h0, span);
        Mat k2 = f(x + dir * h0, y + dir * h0 * k1);
        Real d2 = sc_norm(k2 - k1) / h0;
        Real h1 = std::max(d1, d2) <= 1e-15L ? std::max(Real(1e-6), h0 * Real(1e-3))
                                              : std::pow(Real(0.01) / std::max(d1, d2), Real(0.2));
        return std::min({Real(100) * h0, h1, span});
    }

    OdeOptions opt_;
};

}  // namespace specsurg
