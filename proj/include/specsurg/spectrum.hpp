#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "specsurg/core.hpp"
#include "specsurg/linalg.hpp"
#include "specsurg/parallel.hpp"
#include "specsurg/problem.hpp"
#include "specsurg/quadrature.hpp"
#include "specsurg/wave.hpp"

namespace specsurg {

struct SpectrumOptions {
    SolverOptions solver{};
    QuadOptions quad{};
    Real kappa_min = 1e-3L;
    Real kappa_max = 50;
    int scan_points = 400;
    Real kappa_tol = 1e-10L;      // root bracket width, relative to max(1, kappa)
    double nullity_tol = 1e-6;    // singular values below this times the local scale are zero
    double realness_tol = 1e-8;   // |Im det| relative to the scale of det on the axis
    double merge_tol = 1e-6;      // roots closer than this (relative) are one root
};

struct RootInfo {
    Real kappa = 0;
    int multiplicity = 0;
    Real local_scale = 0;  // sigma_max of J(i kappa) at the neighbouring scan points
    bool rank_ambiguous = false;
};

struct ScanResult {
    std::vector<RootInfo> roots;  // sorted by kappa descending
    Real max_imag_residual = 0;   // largest |Im det| / scale seen on the grid
    Warnings warnings;
};

namespace detail {

inline Cplx det_of(const Mat& m) { return m.determinant(); }

inline Real sigma_max(const Mat& m) { return spectral_norm(m); }

inline Real sigma_min(const Mat& m) {
    Eigen::JacobiSVD<Mat> svd(m);
    const auto& s = svd.singularValues();
    return s(s.size() - 1);
}

}  // namespace detail

// J(i kappa) on the positive imaginary axis.
inline Mat jost_on_axis(const ProblemSpec& spec, Real kappa, const SolverOptions& opt = {}) {
    return jost_matrix(spec, Cplx(0, kappa), opt);
}

// Zeros of det J(i kappa) on [kappa_min, kappa_max] with multiplicity read from the nullity.
inline ScanResult find_bound_states(const ProblemSpec& spec, const SpectrumOptions& opt = {}) {
    if (!(opt.kappa_min > 0 && opt.kappa_max > opt.kappa_min))
        throw Error(ErrorKind::invalid_input, "need 0 < kappa_min < kappa_max");
    ScanResult out;
    if (spec.potential().decl_class().order() < 1)
        out.warnings.push_back("potential declared only L1: finiteness of the bound-state count is not guaranteed");

    const int npts = std::max(opt.scan_points, 8);
    std::vector<Real> grid(static_cast<std::size_t>(npts));
    Real la = std::log(opt.kappa_min), lb = std::log(opt.kappa_max);
    for (int i = 0; i < npts; ++i) grid[static_cast<std::size_t>(i)] = std::exp(la + (lb - la) * i / (npts - 1));

    std::vector<Cplx> det(grid.size());
    std::vector<Real> smax(grid.size()), smin(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        Mat j = jost_on_axis(spec, grid[i], opt.solver);
        det[i] = detail::det_of(j);
        smax[i] = detail::sigma_max(j);
        smin[i] = detail::sigma_min(j);
    });

    const auto n = static_cast<int>(spec.n());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        Real scale = std::pow(std::max(smax[i], Real(1e-300L)), Real(n));
        Real r = std::abs(det[i].imag()) / scale;
        out.max_imag_residual = std::max(out.max_imag_residual, r);
    }
    if (out.max_imag_residual > Real(opt.realness_tol))
        out.warnings.push_back("det J(i kappa) has imaginary part " + std::to_string(double(out.max_imag_residual)) +
                               " relative to its scale; sign changes use the real part");

    auto real_det = [&](Real kappa) { return detail::det_of(jost_on_axis(spec, kappa, opt.solver)).real(); };
    auto local_scale = [&](std::size_t i) {
        Real s = smax[i];
        if (i > 0) s = std::max(s, smax[i - 1]);
        if (i + 1 < grid.size()) s = std::max(s, smax[i + 1]);
        return s;
    };
    auto nullity_at = [&](Real kappa, Real scale) {
        Mat j = jost_on_axis(spec, kappa, opt.solver);
        return kernel_projector_ex(j, opt.nullity_tol, scale);
    };

    std::vector<RootInfo> roots;
    std::vector<bool> bracketed(grid.size(), false);

    // Sign changes: bisection until the bracket is small, then guarded secant steps.
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        Real fa = det[i].real(), fb = det[i + 1].real();
        if (fa == 0 || fb == 0 || (fa < 0) != (fb < 0)) {
            bracketed[i] = bracketed[i + 1] = true;
            Real a = grid[i], b = grid[i + 1];
            if (fa == 0) b = a;
            if (fb == 0) a = b;
            int iter = 0;
            while (b - a > opt.kappa_tol * std::max(Real(1), a) && iter < 200) {
                Real m = (a + b) / 2;
                if (b - a < Real(1e-4) * std::max(Real(1), a) && fb != fa) {
                    Real s = b - fb * (b - a) / (fb - fa);
                    if (s > a && s < b) m = s;
                }
                Real fm = real_det(m);
                if (fm == 0) {
                    a = b = m;
                    break;
                }
                if ((fm < 0) == (fa < 0)) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                    fb = fm;
                }
                // Secant steps can stall on one side; force a bisection every few iterations.
                if (++iter % 4 == 0 && b - a > opt.kappa_tol) {
                    Real mid = (a + b) / 2;
                    Real fmid = real_det(mid);
                    if ((fmid < 0) == (fa < 0)) {
                        a = mid;
                        fa = fmid;
                    } else {
                        b = mid;
                        fb = fmid;
                    }
                }
            }
            if (b - a > Real(1e-8) * std::max(Real(1), a))
                throw Error(ErrorKind::unresolved_root, "root polishing did not converge in [" +
                                                            std::to_string(double(a)) + ", " +
                                                            std::to_string(double(b)) + "]");
            Real kappa = (a + b) / 2;
            Real scale = local_scale(i);
            auto ker = nullity_at(kappa, scale);
            int m = ker.projector.rank();
            if (m == 0) {
                out.warnings.push_back("sign change of det near kappa = " + std::to_string(double(kappa)) +
                                       " without a kernel; treated as a pole and skipped");
                continue;
            }
            roots.push_back({kappa, m, scale, ker.rank_ambiguous});
        }
    }

    // Even-order zeros: local minima of |det| not adjacent to a sign change.
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        if (bracketed[i]) continue;
        Real ai = std::abs(det[i]);
        if (!(ai < std::abs(det[i - 1]) && ai < std::abs(det[i + 1]))) continue;
        Real scale = local_scale(i);
        auto objective = [&](Real kappa) { return detail::sigma_min(jost_on_axis(spec, kappa, opt.solver)) / scale; };
        boost::uintmax_t max_iter = 200;
        auto res = boost::math::tools::brent_find_minima(objective, grid[i - 1], grid[i + 1],
                                                         std::numeric_limits<Real>::digits, max_iter);
        Real kappa = res.first;
        auto ker = nullity_at(kappa, scale);
        int m = ker.projector.rank();
        if (m == 0) continue;
        roots.push_back({kappa, m, scale, ker.rank_ambiguous});
    }

    std::sort(roots.begin(), roots.end(), [](const RootInfo& a, const RootInfo& b) { return a.kappa > b.kappa; });
    for (const auto& r : roots) {
        if (!out.roots.empty() &&
            std::abs(out.roots.back().kappa - r.kappa) <= Real(opt.merge_tol) * std::max(Real(1), r.kappa)) {
            out.roots.back().multiplicity = std::max(out.roots.back().multiplicity, r.multiplicity);
            continue;
        }
        if (r.rank_ambiguous)
            out.warnings.push_back("nullity of J(i kappa) at kappa = " + std::to_string(double(r.kappa)) +
                                   " is close to the rank threshold");
        out.roots.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normalization data

// Integral over [0, inf) of g(x)^dagger g(x) for g = f(i kappa, x) R: Gauss-Kronrod on [0, X]
// with X = 40/kappa + extent, plus the tail of a pure e^{-2 kappa x} decay.
inline Mat decaying_gram(const WaveSlice& f, const Mat& right, Real kappa, const QuadOptions& q) {
    Real extent = std::min(f.x_hi(), Real(1e6));
    Real big_x = Real(40) / kappa + extent;
    auto integrand = [&](Real x) -> Mat {
        Mat g = f.parts(x).m * right;
        return g.adjoint() * g * std::exp(Real(-2) * kappa * x);
    };
    Real panel = std::max(Real(1) / kappa, Real(1));
    Mat a = integrate_panels(integrand, 0, big_x, panel, q);
    Mat gx = f.parts(big_x).m * right;
    a += gx.adjoint() * gx * (std::exp(Real(-2) * kappa * big_x) / (Real(2) * kappa));
    return hermitian_part(a);
}

struct MarchenkoData {
    Mat A, B, M;         // integral of P f^dagger f P, I - P + A, B^{-1/2} P
    Mat A_gram;          // the same integral from the co-integrated Gram function
};

inline MarchenkoData marchenko_data(const WaveSlice& f, Real kappa, const OrthProjection& p, const QuadOptions& q = {}) {
    const Mat& pm = p.matrix();
    MarchenkoData d;
    d.A = hermitian_part(Mat(pm * decaying_gram(f, identity(f.n()), kappa, q) * pm));
    if (f.has_gram()) d.A_gram = hermitian_part(Mat(pm * f.gram(0) * pm));
    d.B = identity(f.n()) - pm + d.A;
    SqrtPair<Real> s;
    try {
        s = herm_sqrt_inv(d.B, 1e-12, 1e-8);
    } catch (const Error& e) {
        throw Error(ErrorKind::inconsistent_bound_state, std::string("Marchenko matrix not positive: ") + e.what());
    }
    d.M = hermitian_part(Mat(s.inv_sqrt * pm));
    return d;
}

struct GelfandLevitanData {
    Mat X;               // phi(i kappa, x) Q = f(i kappa, x) X
    Real x_residual = 0; // relative residual of the boundary fit for X
    Mat G, H, C;
};

// X with [f(0); f'(0)] X = [A Q; B Q]; the decaying part of phi(i kappa, x) Q.
inline Mat decaying_coefficients(const WaveSlice& f, const ProblemSpec& spec, const Mat& q, Real* residual) {
    Eigen::Index n = spec.n();
    Mat lhs(2 * n, n), rhs(2 * n, n);
    lhs.topRows(n) = f.value(0);
    lhs.bottomRows(n) = f.deriv(0);
    rhs.topRows(n) = spec.A() * q;
    rhs.bottomRows(n) = spec.B() * q;
    Mat x = lhs.colPivHouseholderQr().solve(rhs);
    if (residual) *residual = (lhs * x - rhs).norm() / std::max<Real>(Real(1), rhs.norm());
    return x;
}

inline GelfandLevitanData gl_data(const WaveSlice& f, const ProblemSpec& spec, Real kappa, const OrthProjection& q,
                                  const QuadOptions& quad = {}) {
    const Mat& qm = q.matrix();
    GelfandLevitanData d;
    d.X = decaying_coefficients(f, spec, qm, &d.x_residual);
    if (d.x_residual > Real(1e-6))
        throw Error(ErrorKind::inconsistent_bound_state,
                    "phi(i kappa, x) Q has a growing part (residual " + std::to_string(double(d.x_residual)) + ")");
    d.G = hermitian_part(Mat(qm * decaying_gram(f, d.X, kappa, quad) * qm));
    d.H = identity(spec.n()) - qm + d.G;
    SqrtPair<Real> s;
    try {
        s = herm_sqrt_inv(d.H, 1e-12, 1e-8);
    } catch (const Error& e) {
        throw Error(ErrorKind::inconsistent_bound_state, std::string("Gel'fand-Levitan matrix not positive: ") + e.what());
    }
    d.C = hermitian_part(Mat(s.inv_sqrt * qm));
    return d;
}

struct DependencyResult {
    Mat D;
    Real x_used = 0;
    bool derivative_form = false;
    Real spread = 0;  // difference to the value at the second probe, when computed
};

// D = M^+ f(i kappa, x)^{-1} Phi(x) at x = 0, falling back to x = 1 and then to the
// derivative form M^+ f'(x)^{-1} Phi'(x). phi_at returns (Phi(x), Phi'(x)).
inline DependencyResult dependency_matrix(const WaveSlice& f, const Mat& m,
                                          const std::function<std::pair<Mat, Mat>(Real)>& phi_at,
                                          bool allow_derivative = true, double cond_limit = 1e10) {
    Mat mp = pinv(m, 1e-8);
    auto try_at = [&](Real x, bool deriv) -> std::optional<Mat> {
        Mat fx = deriv ? f.deriv(x) : f.value(x);
        if (condition_number(fx) > Real(cond_limit)) return std::nullopt;
        auto [phi, dphi] = phi_at(x);
        return Mat(mp * fx.partialPivLu().solve(deriv ? dphi : phi));
    };
    const Real probes[2] = {0, 1};
    std::optional<Mat> first, second;
    DependencyResult r;
    for (Real x : probes) {
        auto d = try_at(x, false);
        if (!d) continue;
        if (!first) {
            first = d;
            r.x_used = x;
        } else {
            second = d;
        }
    }
    if (!first && allow_derivative) {
        for (Real x : probes) {
            auto d = try_at(x, true);
            if (!d) continue;
            if (!first) {
                first = d;
                r.x_used = x;
                r.derivative_form = true;
            } else {
                second = d;
            }
        }
    }
    if (!first) throw Error(ErrorKind::dependency_unresolved, "f and f' singular at every probe point");
    r.D = *first;
    if (second) r.spread = (*first - *second).cwiseAbs().maxCoeff();
    return r;
}

// ---------------------------------------------------------------------------
// Assembled report

struct BoundState {
    Real kappa = 0;
    int multiplicity = 0;
    OrthProjection Q, P;
    Mat M, C, D;
    Mat A_mat, B_mat, G_mat, H_mat;  // Marchenko and Gel'fand-Levitan integrals
    Mat A_gram;                      // Marchenko integral from the Gram function
    Mat X;                           // phi(i kappa, x) Q = f(i kappa, x) X
    Mat J;                           // J(i kappa)
    Real local_scale = 0;
    DependencyResult dependency;
    std::shared_ptr<const WaveSlice> f;  // f(i kappa, x) with its Gram function

    Mat Psi(Real x) const { return f->value(x) * M; }
    Mat Psi_deriv(Real x) const { return f->deriv(x) * M; }
    Mat Phi(Real x) const { return f->value(x) * X * C; }
    Mat Phi_deriv(Real x) const { return f->deriv(x) * X * C; }
    Real lambda() const { return -kappa * kappa; }
};

// Full data of a bound state at kappa, given the local scale of J used for the nullity.
inline BoundState bound_state_at(const ProblemSpec& spec, Real kappa, Real local_scale, const SpectrumOptions& opt = {}) {
    BoundState s;
    s.kappa = kappa;
    s.local_scale = local_scale;
    Cplx k(0, kappa);
    auto f = std::make_shared<WaveSlice>(solve_jost(spec.potential(), k, opt.solver, nullptr, true));
    s.f = f;
    Mat f0 = f->value(0), df0 = f->deriv(0);
    s.J = f0.adjoint() * spec.B() - df0.adjoint() * spec.A();
    Real scale = local_scale > 0 ? local_scale : spectral_norm(s.J);
    s.Q = kernel_projector_ex(s.J, opt.nullity_tol, scale).projector;
    s.P = kernel_projector_ex(Mat(s.J.adjoint()), opt.nullity_tol, scale).projector;
    if (s.Q.rank() == 0)
        throw Error(ErrorKind::inconsistent_bound_state, "J(i kappa) has no kernel at kappa = " + std::to_string(double(kappa)));
    if (s.Q.rank() != s.P.rank())
        throw Error(ErrorKind::inconsistent_bound_state, "kernels of J and J^dagger differ in dimension");
    s.multiplicity = s.Q.rank();

    MarchenkoData md = marchenko_data(*f, kappa, s.P, opt.quad);
    s.A_mat = md.A;
    s.B_mat = md.B;
    s.M = md.M;
    s.A_gram = md.A_gram;

    GelfandLevitanData gd = gl_data(*f, spec, kappa, s.Q, opt.quad);
    s.X = gd.X;
    s.G_mat = gd.G;
    s.H_mat = gd.H;
    s.C = gd.C;

    // Phi at x = 0 is A C exactly; at x = 1 it comes from a forward regular solve.
    Mat c = s.C;
    auto phi_at = [&spec, &opt, k, c](Real x) -> std::pair<Mat, Mat> {
        if (x == 0) return {spec.A() * c, spec.B() * c};
        WaveSlice phi = solve_regular(spec, k, opt.solver, x, &c);
        return {phi.value(x), phi.deriv(x)};
    };
    s.dependency = dependency_matrix(*f, s.M, phi_at);
    s.D = s.dependency.D;
    return s;
}

class SpectrumReport {
public:
    SpectrumReport(ProblemSpec spec, std::vector<BoundState> states, SpectrumOptions opt, Warnings warnings,
                   std::optional<bool> generic)
        : spec_(std::move(spec)), states_(std::move(states)), opt_(std::move(opt)), warnings_(std::move(warnings)),
          generic_(generic) {}

    const std::vector<BoundState>& states() const { return states_; }
    std::size_t N() const { return states_.size(); }
    int total_N() const {
        int t = 0;
        for (const auto& s : states_) t += s.multiplicity;
        return t;
    }
    const Warnings& warnings() const { return warnings_; }
    const ProblemSpec& spec() const { return spec_; }
    const SpectrumOptions& options() const { return opt_; }
    // J(0) invertible (generic case); empty when k = 0 is not supported by the potential class.
    std::optional<bool> generic() const { return generic_; }

    Mat jost_at(Cplx k) const { return jost_matrix(spec_, k, opt_.solver); }
    Mat smatrix_at(Real k) const { return scattering_matrix(spec_, k, opt_.solver); }
    // (sqrt(lambda)/pi) (J^dagger J)^{-1} at k = sqrt(lambda).
    Mat rho_density_at(Real lambda) const {
        if (!(lambda > 0)) throw Error(ErrorKind::invalid_input, "density is defined for lambda > 0");
        Real k = std::sqrt(lambda);
        Mat j = jost_at(Cplx(k));
        Mat jj = j.adjoint() * j;
        return hermitian_part(Mat(jj.inverse() * (k / pi_v)));
    }

private:
    ProblemSpec spec_;
    std::vector<BoundState> states_;
    SpectrumOptions opt_;
    Warnings warnings_;
    std::optional<bool> generic_;
};

inline SpectrumReport assemble_spectrum(const ProblemSpec& spec, const SpectrumOptions& opt = {}) {
    ScanResult scan = find_bound_states(spec, opt);
    std::vector<BoundState> states(scan.roots.size());
    parallel_for(states.size(), [&](std::size_t i) {
        states[i] = bound_state_at(spec, scan.roots[i].kappa, scan.roots[i].local_scale, opt);
    });
    std::optional<bool> generic;
    if (spec.potential().decl_class().order() >= 1) {
        Mat j0 = jost_matrix(spec, Cplx(0), opt.solver);
        generic = condition_number(j0) < Real(1e10);
    }
    return SpectrumReport(spec, std::move(states), opt, std::move(scan.warnings), generic);
}

}  // namespace specsurg
