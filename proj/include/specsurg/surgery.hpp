#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "specsurg/core.hpp"
#include "specsurg/linalg.hpp"
#include "specsurg/potential.hpp"
#include "specsurg/problem.hpp"
#include "specsurg/quadrature.hpp"
#include "specsurg/spectrum.hpp"
#include "specsurg/wave.hpp"

namespace specsurg {

enum class SurgeryKind { remove, lower, add, raise };

inline std::string to_string(SurgeryKind k) {
    switch (k) {
    case SurgeryKind::remove: return "remove";
    case SurgeryKind::lower: return "lower";
    case SurgeryKind::add: return "add";
    case SurgeryKind::raise: return "raise";
    }
    return "remove";
}

// Removal-type operations shrink the spectrum (Gram W' = -Y^dagger Y); addition-type grow it
// (Gram Omega' = +Y^dagger Y).
inline Real surgery_sign(SurgeryKind k) {
    return (k == SurgeryKind::remove || k == SurgeryKind::lower) ? Real(-1) : Real(1);
}

struct SurgeryOptions {
    SpectrumOptions spectrum{};
    double near_pole = 1e-3;       // |k -+ i kappa| below this switches to singularity-free forms
    int circle_points = 24;        // mean-value rule used for the Jost closure near k = i kappa
    Real circle_radius = 0.2L;     // relative to kappa
    double state_match = 1e-6;     // relative tolerance when locating a target kappa
    double station_spread = 1e-6;  // consistency of the L fit across stations
    double rank_tol = 1e-8;
};

// ---------------------------------------------------------------------------
// Bridge solution Y(x) = u(x) R with Gram function Gamma(x); u is a WaveSlice at i kappa.

class Bridge {
public:
    struct Values {
        Mat m;      // e^{-sigma x} Y
        Mat d;      // e^{-sigma x} Y'
        Mat ginv;   // e^{2 sigma x} Gamma^+
    };

    Bridge(std::shared_ptr<const WaveSlice> slice, Mat right, Mat gamma0, Real sign, Mat basis, Real kappa,
           Real x_end)
        : slice_(std::move(slice)), right_(std::move(right)), gamma0_(std::move(gamma0)), sign_(sign),
          basis_(std::move(basis)), kappa_(kappa), x_end_(x_end) {}

    Real sign() const { return sign_; }
    Real kappa() const { return kappa_; }
    Real x_end() const { return x_end_; }
    bool covers(Real x) const { return x <= x_end_; }
    const Mat& basis() const { return basis_; }
    Real sigma() const { return slice_->sigma().real(); }

    // Scaled Gram: e^{-2 sigma x} Gamma(x).
    Mat gram(Real x) const {
        WaveSlice::Parts p = slice_->parts(x);
        Mat g = right_.adjoint() * p.gram * right_;
        if (gamma0_.size()) g += gamma0_ * std::exp(Real(-2) * sigma() * x);
        return hermitian_part(g);
    }

    Values at(Real x) const {
        if (!covers(x)) throw Error(ErrorKind::invalid_input, "bridge queried beyond its range");
        WaveSlice::Parts p = slice_->parts(x);
        Values v;
        v.m = p.m * right_;
        v.d = (slice_->sigma() * p.m + p.p) * right_;
        Mat g = right_.adjoint() * p.gram * right_;
        if (gamma0_.size()) g += gamma0_ * std::exp(Real(-2) * sigma() * x);
        Mat core = basis_.adjoint() * hermitian_part(g) * basis_;
        Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(core));
        Real lo = es.eigenvalues()(0), hi = es.eigenvalues()(es.eigenvalues().size() - 1);
        if (!(lo > Real(1e-14) * std::max(hi, Real(1e-300L))))
            throw Error(ErrorKind::kernel_degeneracy,
                        "Gram function lost rank at x = " + std::to_string(double(x)));
        v.ginv = basis_ * core.inverse() * basis_.adjoint();
        return v;
    }

    // B(x) = Y Gamma^+ Y^dagger.
    Mat kernel(Real x) const {
        Values v = at(x);
        return hermitian_part(Mat(v.m * v.ginv * v.m.adjoint()));
    }

    // B'(x) = Y' Gamma^+ Y^dagger + Y Gamma^+ Y'^dagger - s Y Gamma^+ Y^dagger Y Gamma^+ Y^dagger.
    Mat kernel_deriv(Real x) const {
        Values v = at(x);
        Mat b = v.m * v.ginv * v.m.adjoint();
        Mat t = v.d * v.ginv * v.m.adjoint();
        return hermitian_part(Mat(t + t.adjoint() - sign_ * b * b));
    }

    // Applies u -> u - s (k^2 + kappa^2)^{-1} Y Gamma^+ (Y'^dagger u - Y^dagger u') to a solution
    // at k given (u, u') at x; returns the transformed pair. Any common scale of u cancels.
    std::pair<Mat, Mat> wronskian_transform(Cplx k, Real x, const Mat& u, const Mat& du) const {
        Values v = at(x);
        Cplx den = k * k + kappa_ * kappa_;
        Mat q = v.d.adjoint() * u - v.m.adjoint() * du;
        Mat gq = v.ginv * q;
        Mat b = v.m * v.ginv * v.m.adjoint();
        Mat out = u - (sign_ / den) * (v.m * gq);
        Mat dout = du - (sign_ / den) * (v.d * gq - sign_ * (b * (v.m * gq))) - sign_ * (b * u);
        return {out, dout};
    }

    // Integral form: u - s Y Gamma^+ int_0^x Y^dagger u, with u given as a regular slice at k.
    std::pair<Mat, Mat> integral_transform(const WaveSlice& u, Real x, const QuadOptions& q) const {
        Values v = at(x);
        Real tau = u.sigma().real();
        Real sg = sigma();
        auto integrand = [&](Real y) -> Mat {
            Values w = at(y);
            return w.m.adjoint() * u.parts(y).m * std::exp((sg + tau) * (y - x));
        };
        Mat integral = x > 0 ? integrate(integrand, Real(0), x, q) : Mat(Mat::Zero(v.m.cols(), u.cols()));
        // Scaled by e^{-tau x}: value and derivative of u at x in the same scaling.
        WaveSlice::Parts up = u.parts(x);
        Mat uu = up.m, du = u.sigma() * up.m + up.p;
        Mat b = v.m * v.ginv * v.m.adjoint();
        Mat gi = v.ginv * integral;
        Mat out = uu - sign_ * (v.m * gi);
        Mat dout = du - sign_ * (v.d * gi - sign_ * (b * (v.m * gi)) + b * uu);
        Cplx sc = std::exp(u.sigma() * x);
        return {out * sc, dout * sc};
    }

private:
    std::shared_ptr<const WaveSlice> slice_;
    Mat right_, gamma0_;
    Real sign_;
    Mat basis_;
    Real kappa_;
    Real x_end_;
};

// Factor multiplying J(k): I + 2i kappa/(k - i kappa) P (removal type) or I - 2i kappa/(k + i kappa) P.
inline Mat jost_factor(Real sign, Real kappa, const Mat& p, Cplx k) {
    Eigen::Index n = p.rows();
    Cplx ik = I_unit * kappa;
    if (sign < 0) return identity(n) + (Real(2) * ik / (k - ik)) * p;
    return identity(n) - (Real(2) * ik / (k + ik)) * p;
}

// Factor used on both sides of S(k).
inline Mat smatrix_factor(Real sign, Real kappa, const Mat& p, Real k) {
    Eigen::Index n = p.rows();
    Cplx ik = I_unit * kappa;
    if (sign < 0) return identity(n) - (Real(2) * ik / (Cplx(k) + ik)) * p;
    return identity(n) + (Real(2) * ik / (Cplx(k) - ik)) * p;
}

// ---------------------------------------------------------------------------
// Perturbed potential V~ = V - 2 s B'(x), with Jost tail data from the closed-form f~.

class DerivedPotential final : public PotentialModel {
public:
    DerivedPotential(Potential base, std::shared_ptr<const Bridge> bridge, Mat factor_projector, DeclClass cls,
                     SurgeryKind kind, SurgeryOptions opt)
        : base_(std::move(base)), bridge_(std::move(bridge)), p_(std::move(factor_projector)), cls_(cls),
          kind_(kind), opt_(std::move(opt)) {
        b_inf_ = p_ * (Real(2) * bridge_->kappa());
    }

    Eigen::Index dim() const override { return base_.dim(); }
    Mat value(Real x) const override {
        Mat v = base_(x);
        if (!bridge_->covers(x)) return v;
        return hermitian_part(Mat(v - Real(2) * bridge_->sign() * bridge_->kernel_deriv(x)));
    }
    Mat increment(Real x) const {
        if (!bridge_->covers(x)) return Mat::Zero(dim(), dim());
        return Real(-2) * bridge_->sign() * bridge_->kernel_deriv(x);
    }
    DeclClass decl_class() const override { return cls_; }
    // Integral of the increment over [x, inf) is -2 s (B(inf) - B(x)); its norm serves as the estimate.
    Real tail_l1(Real x) const override {
        Real t = base_.tail_l1(x);
        if (!bridge_->covers(x)) return t;
        return t + Real(2) * spectral_norm(Mat(b_inf_ - bridge_->kernel(x)));
    }
    bool power_law_tail() const override { return base_.power_law_tail(); }
    Real support_end() const override {
        return (kind_ == SurgeryKind::remove || kind_ == SurgeryKind::lower) ? base_.support_end()
                                                                                : std::numeric_limits<Real>::infinity();
    }
    Real tail_start(Real tail_tol, Real cap) const override {
        Real h = std::max(base_.tail_start(tail_tol, cap), Real(16) / bridge_->kappa());
        return std::min({h, cap, bridge_->x_end()});
    }
    TailData jost_tail(Cplx k, Real x) const override {
        if (!bridge_->covers(x)) return base_.jost_tail(k, x);
        Real kappa = bridge_->kappa();
        Cplx ik = I_unit * kappa;
        Real near = Real(opt_.near_pole) * std::max(Real(1), kappa);
        if (std::abs(k + ik) < near)
            throw Error(ErrorKind::exceptional_point, "Jost closure requested at k = -i kappa");
        if (std::abs(k - ik) >= near) return closure(k, x);
        // Removable singularity: mean value over a circle around k.
        Real r = opt_.circle_radius * kappa;
        int np = std::max(opt_.circle_points, 4);
        Mat m = Mat::Zero(dim(), dim()), dm = m;
        for (int j = 0; j < np; ++j) {
            Cplx kj = k + r * std::exp(I_unit * (Real(2) * pi_v * j / np));
            TailData t = closure(kj, x);
            m += t.m;
            dm += t.dm;
        }
        return {m / Real(np), dm / Real(np)};
    }
    std::string name() const override { return "derived(" + to_string(kind_) + ")"; }

    const Potential& base() const { return base_; }
    const Bridge& bridge() const { return *bridge_; }
    SurgeryKind kind() const { return kind_; }

private:
    // m~ = e^{-ikx} f~ and its derivative from the base tail data at x.
    TailData closure(Cplx k, Real x) const {
        TailData t = base_.jost_tail(k, x);
        Cplx ikc = I_unit * k;
        Mat du = ikc * t.m + t.dm;  // e^{-ikx} f'
        auto [u2, du2] = bridge_->wronskian_transform(k, x, t.m, du);
        Mat r = jost_factor(bridge_->sign(), bridge_->kappa(), p_, k);
        Mat m = u2 * r;
        Mat dm = du2 * r - ikc * m;
        return {m, dm};
    }

    Potential base_;
    std::shared_ptr<const Bridge> bridge_;
    Mat p_, b_inf_;
    DeclClass cls_;
    SurgeryKind kind_;
    SurgeryOptions opt_;
};

// ---------------------------------------------------------------------------
// Growing-coefficient matrix L in phi(i kappa, x) = f(i kappa, x) K + g(i kappa, x) L.

struct LExtraction {
    Mat L;              // route actually used
    Mat L_fit;          // least squares at large-x stations (empty if unavailable)
    Mat L_wronskian;    // J(i kappa) / (2 kappa)
    Real station_spread = 0;
    bool from_fit = false;
    std::vector<Real> stations;
    Warnings warnings;
};

inline LExtraction extract_L(const ProblemSpec& spec, Real kappa, const SurgeryOptions& opt = {}) {
    const SolverOptions& so = opt.spectrum.solver;
    Cplx k(0, kappa);
    LExtraction out;
    WaveSlice f = solve_jost(spec.potential(), k, so);
    Mat j = f.value(0).adjoint() * spec.B() - f.deriv(0).adjoint() * spec.A();
    out.L_wronskian = j / (Real(2) * kappa);

    Real x0 = choose_x_inf(spec.potential(), k, so);
    for (int s = 0; s < 5; ++s) out.stations.push_back(x0 + Real(0.5) * s / kappa);
    try {
        WaveSlice g = solve_growing_g(spec.potential(), k, so);
        WaveSlice phi = solve_regular(spec, k, so, out.stations.back());
        Eigen::Index n = spec.n();
        std::vector<Mat> fits;
        for (Real x : out.stations) {
            WaveSlice::Parts pf = f.parts(x), pg = g.parts(x), pp = phi.parts(x);
            Mat sys(2 * n, 2 * n), rhs(2 * n, n);
            sys.block(0, 0, n, n) = pf.m;
            sys.block(0, n, n, n) = pg.m;
            sys.block(n, 0, n, n) = f.sigma() * pf.m + pf.p;
            sys.block(n, n, n, n) = g.sigma() * pg.m + pg.p;
            rhs.topRows(n) = pp.m;
            rhs.bottomRows(n) = phi.sigma() * pp.m + pp.p;
            Mat sol = sys.colPivHouseholderQr().solve(rhs);
            fits.push_back(sol.bottomRows(n));
        }
        Real scale = std::max<Real>(Real(1), fits.front().norm());
        for (const auto& l : fits) out.station_spread = std::max(out.station_spread, (l - fits.front()).norm() / scale);
        out.L_fit = fits.front();
        if (out.station_spread <= Real(opt.station_spread)) {
            out.L = out.L_fit;
            out.from_fit = true;
        } else {
            out.warnings.push_back("L fit inconsistent across stations (spread " +
                                   std::to_string(double(out.station_spread)) + "); using J(i kappa)/(2 kappa)");
        }
    } catch (const Error& e) {
        out.warnings.push_back(std::string("growing solution unavailable (") + e.what() +
                               "); using J(i kappa)/(2 kappa)");
    }
    if (!out.from_fit) out.L = out.L_wronskian;
    return out;
}

// ---------------------------------------------------------------------------
// Plans and results

struct RemovePlan {
    Real kappa;
};
struct LowerPlan {
    Real kappa;
    Mat Q_r;
};
struct AddPlan {
    Real kappa;
    std::optional<Mat> C;         // C~ given directly
    std::optional<Mat> Q, G;      // or the (Q~, G~) pair
};
struct RaisePlan {
    Real kappa;
    Mat Q_i, G_i;
};
using SurgeryPlan = std::variant<RemovePlan, LowerPlan, AddPlan, RaisePlan>;

struct TransformResult {
    SurgeryKind kind = SurgeryKind::remove;
    Real kappa = 0;
    int multiplicity_change = 0;  // number of dimensions removed or added at kappa
    int old_multiplicity = 0;
    Real sign = -1;
    std::shared_ptr<const ProblemSpec> base_spec, perturbed_spec;
    std::shared_ptr<const DerivedPotential> derived;
    std::shared_ptr<const Bridge> bridge;
    Mat C;                   // normalization entering the kernel (C_N, C_r, C~, C~_i)
    OrthProjection Q;        // range of C
    OrthProjection P;        // projector in the Jost factor (P_N, P_r, P~, P~_i)
    std::optional<LExtraction> L;
    Mat X;                   // decaying coefficients (removal type)
    SurgeryOptions options;
    Warnings warnings;

    const ProblemSpec& spec() const { return *perturbed_spec; }
    Mat factor(Cplx k) const { return jost_factor(sign, kappa, P.matrix(), k); }
    Cplx det_factor(Cplx k) const {
        Cplx ik = I_unit * kappa;
        Cplx r = sign < 0 ? (k + ik) / (k - ik) : (k - ik) / (k + ik);
        return std::pow(r, multiplicity_change);
    }
    // J~(k) from the closed-form factor applied to the numerically computed J(k).
    Mat perturbed_jost(Cplx k) const { return factor(k) * jost_matrix(*base_spec, k, options.spectrum.solver); }
    Mat perturbed_smatrix(Real k) const {
        Mat g = smatrix_factor(sign, kappa, P.matrix(), k);
        return g * scattering_matrix(*base_spec, k, options.spectrum.solver) * g;
    }
    Mat delta_v(Real x) const { return derived->increment(x); }

    // phi~(k, x) and phi~'(k, x) from the bridge closure (integral form near k = +-i kappa).
    std::pair<Mat, Mat> phi_tilde(Cplx k, Real x) const {
        const SolverOptions& so = options.spectrum.solver;
        Real near = Real(options.near_pole) * std::max(Real(1), kappa);
        Cplx ik = I_unit * kappa;
        WaveSlice phi = solve_regular(*base_spec, k, so, std::max(x, Real(1e-9L)));
        if (std::abs(k - ik) < near || std::abs(k + ik) < near)
            return bridge->integral_transform(phi, x, options.spectrum.quad);
        return bridge->wronskian_transform(k, x, phi.value(x), phi.deriv(x));
    }
    // f~(k, x) and f~'(k, x) from the closed form, away from k = +-i kappa.
    std::pair<Mat, Mat> f_tilde(Cplx k, Real x) const {
        Real near = Real(options.near_pole) * std::max(Real(1), kappa);
        Cplx ik = I_unit * kappa;
        if (std::abs(k - ik) < near || std::abs(k + ik) < near)
            throw Error(ErrorKind::exceptional_point, "closed-form Jost solution requested at k = +-i kappa");
        WaveSlice f = solve_jost(base_spec->potential(), k, options.spectrum.solver);
        auto [u, du] = bridge->wronskian_transform(k, x, f.value(x), f.deriv(x));
        Mat r = factor(k);
        return {u * r, du * r};
    }
};

// I - P for a rank-one 2x2 orthogonal projection.
inline OrthProjection complementary_projection_2x2(const OrthProjection& p) {
    if (p.matrix().rows() != 2 || p.rank() != 1)
        throw Error(ErrorKind::invalid_rank, "complementary projection needs a rank-one 2x2 projection");
    return OrthProjection(Mat(identity(2) - p.matrix()));
}

// ---------------------------------------------------------------------------
// Decay diagnostics for the potential increment on [x1, x2].

struct DecayOptions {
    Real x1 = 5, x2 = 15;
    int samples = 41;
    Real compensation = 2;     // c in |dV| e^{c x}
    Real bound_rate = 2;       // rate of the applicable exponential bound
    Real poly_allowance = 3;   // polynomial factor tolerated on top of the bound
};

struct DecayReport {
    std::vector<std::pair<Real, Real>> samples;  // (x, |dV(x)|)
    Real compensated_slope = 0;  // d log(|dV| e^{c x}) / d log x, least squares
    Real fitted_rate = 0;        // r in |dV| ~ e^{-r x}, least squares
    Real bound_slope = 0;        // compensated slope at the bound rate
    bool bound_satisfied = false;
};

namespace detail {
inline Real ls_slope(const std::vector<Real>& t, const std::vector<Real>& y) {
    Real n = Real(t.size()), st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        st += t[i];
        sy += y[i];
        stt += t[i] * t[i];
        sty += t[i] * y[i];
    }
    return (n * sty - st * sy) / (n * stt - st * st);
}
}  // namespace detail

// Diagnostic only: reports the fitted envelope and whether it stays within the bound up to a
// polynomial factor. Sharpness is never asserted.
inline DecayReport decay_estimate_check(const TransformResult& r, const DecayOptions& opt = {}) {
    if (!(opt.x2 > opt.x1 && opt.x1 > 0) || opt.samples < 3)
        throw Error(ErrorKind::invalid_grid, "decay window must satisfy 0 < x1 < x2 with at least 3 samples");
    DecayReport out;
    std::vector<Real> lx, xs, lc, lb, ld;
    for (int i = 0; i < opt.samples; ++i) {
        Real x = opt.x1 + (opt.x2 - opt.x1) * i / (opt.samples - 1);
        Real d = spectral_norm(r.delta_v(x));
        out.samples.emplace_back(x, d);
        if (!(d > 0)) continue;
        xs.push_back(x);
        lx.push_back(std::log(x));
        ld.push_back(std::log(d));
        lc.push_back(std::log(d) + opt.compensation * x);
        lb.push_back(std::log(d) + opt.bound_rate * x);
    }
    if (xs.size() < 3) throw Error(ErrorKind::invalid_sample, "increment vanishes on the decay window");
    out.compensated_slope = detail::ls_slope(lx, lc);
    out.fitted_rate = -detail::ls_slope(xs, ld);
    out.bound_slope = detail::ls_slope(lx, lb);
    out.bound_satisfied = out.bound_slope <= opt.poly_allowance;
    return out;
}

namespace detail {

inline const BoundState& find_state(const SpectrumReport& rep, Real kappa, double tol) {
    for (const auto& s : rep.states())
        if (std::abs(s.kappa - kappa) <= Real(tol) * std::max(Real(1), kappa)) return s;
    throw Error(ErrorKind::no_such_state, "no bound state at kappa = " + std::to_string(double(kappa)));
}

inline DeclClass derived_class(const DeclClass& base, SurgeryKind kind) {
    if (base.cls == MomentClass::compact_support) {
        if (kind == SurgeryKind::remove || kind == SurgeryKind::lower) return base;
        return {MomentClass::L1_3, 0};
    }
    int o = std::max(0, base.order() - 1);
    static constexpr MomentClass by_order[] = {MomentClass::L1, MomentClass::L1_1, MomentClass::L1_2, MomentClass::L1_3};
    return {by_order[o], 0};
}

inline void class_warnings(const Potential& v, Warnings& w) {
    int o = v.decl_class().order();
    if (o < 1) w.push_back("potential declared only L1: the transform is proven for L1_1 and above");
    if (o < 2) w.push_back("potential below L1_2: Jost, scattering and Jost-solution closures are used without the sufficiency condition");
}

// Normalization from (Q, G): C = (I - Q + G)^{-1/2} Q after checking G Q = Q G = G and invertibility on Q.
inline Mat normalization_from(const OrthProjection& q, const Mat& g) {
    const Mat& qm = q.matrix();
    Real scale = std::max<Real>(Real(1), g.cwiseAbs().maxCoeff());
    if (!is_hermitian(g, 1e-10))
        throw Error(ErrorKind::invalid_normalization, "G must be Hermitian");
    if ((g * qm - g).cwiseAbs().maxCoeff() > Real(1e-9) * scale || (qm * g - g).cwiseAbs().maxCoeff() > Real(1e-9) * scale)
        throw Error(ErrorKind::invalid_normalization, "G must satisfy G Q = Q G = G");
    Mat basis = q.basis();
    Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(Mat(basis.adjoint() * g * basis)));
    if (es.eigenvalues().size() == 0 || !(es.eigenvalues()(0) > Real(1e-12) * scale))
        throw Error(ErrorKind::invalid_normalization, "G must be positive on the range of Q");
    Mat h = identity(qm.rows()) - qm + g;
    return hermitian_part(Mat(herm_sqrt_inv(h).inv_sqrt * qm));
}

inline TransformResult finish(TransformResult r, const ProblemSpec& spec, std::shared_ptr<const Bridge> bridge,
                              const SurgeryOptions& opt) {
    r.bridge = bridge;
    r.options = opt;
    r.base_spec = std::make_shared<const ProblemSpec>(spec);
    detail::class_warnings(spec.potential(), r.warnings);
    auto derived = std::make_shared<const DerivedPotential>(spec.potential(), bridge, r.P.matrix(),
                                                            derived_class(spec.potential().decl_class(), r.kind),
                                                            r.kind, opt);
    r.derived = derived;
    Mat c2 = r.C * r.C;
    Mat b_new = spec.B() - r.sign * (spec.A() * c2 * spec.A().adjoint() * spec.A());
    r.perturbed_spec = std::make_shared<const ProblemSpec>(Potential(derived), validate_boundary(spec.A(), b_new));
    // Rank of the Gram function must be constant; probe a few points.
    for (Real x : {Real(0), Real(0.5) / r.kappa, Real(2) / r.kappa}) {
        if (!bridge->covers(x)) continue;
        (void)bridge->at(x);
    }
    return r;
}

// Bridge for removal-type operations: Y = f(i kappa, x) X C with W(x) = int_x^inf Y^dagger Y.
inline std::shared_ptr<const Bridge> decaying_bridge(const BoundState& s, const Mat& c, const OrthProjection& range) {
    Mat right = s.X * c;
    return std::make_shared<const Bridge>(s.f, right, Mat(), Real(-1), range.basis(), s.kappa,
                                          std::numeric_limits<Real>::infinity());
}

// Bridge for addition-type operations: Y = phi(i kappa, x) C with Omega = Q + int_0^x Y^dagger Y.
inline std::shared_ptr<const Bridge> growing_bridge(const ProblemSpec& spec, Real kappa, const Mat& c,
                                                    const OrthProjection& q, const SurgeryOptions& opt) {
    const SolverOptions& so = opt.spectrum.solver;
    Real cap = so.x_cap / std::min(Real(1), kappa + Real(0.1));
    Real x_end = std::max(spec.potential().tail_start(so.tail_tol, cap), Real(16) / kappa) + Real(2) / kappa;
    Mat zero = Mat::Zero(spec.n(), spec.n());
    auto slice = std::make_shared<const WaveSlice>(solve_regular(spec, Cplx(0, kappa), so, x_end, nullptr, &zero));
    return std::make_shared<const Bridge>(slice, c, q.matrix(), Real(1), q.basis(), kappa, x_end);
}

}  // namespace detail

inline TransformResult remove_bound_state(const SpectrumReport& rep, Real kappa, const SurgeryOptions& opt = {}) {
    const BoundState& s = detail::find_state(rep, kappa, opt.state_match);
    TransformResult r;
    r.kind = SurgeryKind::remove;
    r.sign = -1;
    r.kappa = s.kappa;
    r.old_multiplicity = s.multiplicity;
    r.multiplicity_change = s.multiplicity;
    r.C = s.C;
    r.Q = s.Q;
    r.P = s.P;
    r.X = s.X;
    return detail::finish(std::move(r), rep.spec(), detail::decaying_bridge(s, s.C, s.Q), opt);
}

inline TransformResult lower_multiplicity(const SpectrumReport& rep, Real kappa, const Mat& q_r,
                                          const SurgeryOptions& opt = {}) {
    const BoundState& s = detail::find_state(rep, kappa, opt.state_match);
    OrthProjection qr;
    try {
        qr = OrthProjection(q_r);
    } catch (const Error& e) {
        throw Error(ErrorKind::invalid_subprojection, std::string("Q_r: ") + e.what());
    }
    const Mat& qn = s.Q.matrix();
    if ((qr.matrix() * qn - qr.matrix()).cwiseAbs().maxCoeff() > Real(1e-6) ||
        (qn * qr.matrix() - qr.matrix()).cwiseAbs().maxCoeff() > Real(1e-6))
        throw Error(ErrorKind::invalid_subprojection, "Q_r is not a subprojection of Q_N");
    if (qr.rank() < 1) throw Error(ErrorKind::invalid_subprojection, "Q_r has rank zero");
    if (qr.rank() >= s.multiplicity) {
        TransformResult r = remove_bound_state(rep, kappa, opt);
        r.warnings.push_back("rank(Q_r) equals the multiplicity: redirected to removal");
        return r;
    }
    Mat xr = s.X * qr.matrix();
    Mat g = hermitian_part(Mat(qr.matrix() * decaying_gram(*s.f, xr, s.kappa, opt.spectrum.quad) * qr.matrix()));
    Mat h = identity(rep.spec().n()) - qr.matrix() + g;
    Mat c_r = hermitian_part(Mat(herm_sqrt_inv(h).inv_sqrt * qr.matrix()));

    // Span of the beta vectors: phi(i kappa, x) w = f(i kappa, x) beta with beta = X w.
    Mat betas = s.X * qr.basis();
    Eigen::JacobiSVD<Mat> svd(betas);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= Real(1e-8) * sv(0))
        throw Error(ErrorKind::kernel_degeneracy, "beta vectors are linearly dependent");

    TransformResult r;
    r.kind = SurgeryKind::lower;
    r.sign = -1;
    r.kappa = s.kappa;
    r.old_multiplicity = s.multiplicity;
    r.multiplicity_change = qr.rank();
    r.C = c_r;
    r.Q = qr;
    r.P = projector_from_columns(betas);
    r.X = s.X;
    return detail::finish(std::move(r), rep.spec(), detail::decaying_bridge(s, c_r, qr), opt);
}

namespace detail {

inline TransformResult growing_transform(const SpectrumReport& rep, SurgeryKind kind, Real kappa, const Mat& c,
                                         const OrthProjection& q, const SurgeryOptions& opt) {
    const ProblemSpec& spec = rep.spec();
    TransformResult r;
    r.kind = kind;
    r.sign = 1;
    r.kappa = kappa;
    r.multiplicity_change = q.rank();
    r.C = c;
    r.Q = q;
    r.L = extract_L(spec, kappa, opt);
    for (const auto& w : r.L->warnings) r.warnings.push_back(w);
    Mat lc = r.L->L * c;
    OrthProjection p = projector_from_columns(lc, opt.rank_tol);
    if (p.rank() != q.rank())
        throw Error(ErrorKind::invalid_normalization, "L C has rank " + std::to_string(p.rank()) + ", expected " +
                                                          std::to_string(q.rank()));
    r.P = p;
    return finish(std::move(r), spec, growing_bridge(spec, kappa, c, q, opt), opt);
}

}  // namespace detail

inline TransformResult add_bound_state(const SpectrumReport& rep, const AddPlan& plan, const SurgeryOptions& opt = {}) {
    if (!(plan.kappa > 0)) throw Error(ErrorKind::invalid_parameter, "new kappa must be positive");
    for (const auto& s : rep.states())
        if (std::abs(s.kappa - plan.kappa) <= Real(opt.state_match) * std::max(Real(1), plan.kappa) ||
            std::abs(s.kappa - plan.kappa) <= Real(1e-6))
            throw Error(ErrorKind::collision, "kappa = " + std::to_string(double(plan.kappa)) + " is already a bound state");
    Mat c;
    OrthProjection q;
    if (plan.C) {
        c = *plan.C;
        if (!is_hermitian(c, 1e-10)) throw Error(ErrorKind::invalid_normalization, "C must be Hermitian");
        c = hermitian_part(c);
        Eigen::SelfAdjointEigenSolver<Mat> es(c);
        Real top = std::max<Real>(es.eigenvalues().cwiseAbs().maxCoeff(), Real(1e-300L));
        if (es.eigenvalues()(0) < -Real(1e-10) * top)
            throw Error(ErrorKind::invalid_normalization, "C must be nonnegative");
        std::vector<CVec<Real>> cols;
        for (Eigen::Index i = 0; i < c.rows(); ++i)
            if (es.eigenvalues()(i) > Real(1e-10) * top) cols.push_back(es.eigenvectors().col(i));
        if (cols.empty()) throw Error(ErrorKind::invalid_normalization, "C must be nonzero");
        q = projector_from_span(cols);
    } else {
        if (!plan.Q || !plan.G) throw Error(ErrorKind::invalid_input, "add needs C or the pair (Q, G)");
        try {
            q = OrthProjection(*plan.Q);
        } catch (const Error& e) {
            throw Error(ErrorKind::invalid_normalization, std::string("Q: ") + e.what());
        }
        if (q.rank() < 1) throw Error(ErrorKind::invalid_normalization, "Q has rank zero");
        c = detail::normalization_from(q, *plan.G);
    }
    return detail::growing_transform(rep, SurgeryKind::add, plan.kappa, c, q, opt);
}

inline TransformResult raise_multiplicity(const SpectrumReport& rep, Real kappa, const Mat& q_i, const Mat& g_i,
                                          const SurgeryOptions& opt = {}) {
    const BoundState& s = detail::find_state(rep, kappa, opt.state_match);
    Eigen::Index n = rep.spec().n();
    if (s.multiplicity >= n)
        throw Error(ErrorKind::projection_overlap, "multiplicity already equals n; the complement of Q_N is empty");
    OrthProjection qi;
    try {
        qi = OrthProjection(q_i);
    } catch (const Error& e) {
        throw Error(ErrorKind::projection_overlap, std::string("Q_i: ") + e.what());
    }
    if (qi.rank() < 1) throw Error(ErrorKind::projection_overlap, "Q_i has rank zero");
    if ((qi.matrix() * s.Q.matrix()).cwiseAbs().maxCoeff() > Real(1e-6))
        throw Error(ErrorKind::projection_overlap, "Q_i is not orthogonal to Q_N");
    Mat c = detail::normalization_from(qi, g_i);
    TransformResult r = detail::growing_transform(rep, SurgeryKind::raise, s.kappa, c, qi, opt);
    r.old_multiplicity = s.multiplicity;
    return r;
}

inline TransformResult apply_plan(const SpectrumReport& rep, const SurgeryPlan& plan, const SurgeryOptions& opt = {}) {
    return std::visit(
        [&](const auto& p) -> TransformResult {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, RemovePlan>) return remove_bound_state(rep, p.kappa, opt);
            else if constexpr (std::is_same_v<T, LowerPlan>) return lower_multiplicity(rep, p.kappa, p.Q_r, opt);
            else if constexpr (std::is_same_v<T, AddPlan>) return add_bound_state(rep, p, opt);
            else return raise_multiplicity(rep, p.kappa, p.Q_i, p.G_i, opt);
        },
        plan);
}

struct ComposeResult {
    ProblemSpec final_spec;
    std::vector<TransformResult> steps;
    Warnings warnings;

    // J of the final operator as the product of the step factors applied to the original J.
    Mat perturbed_jost(Cplx k, const SolverOptions& so = {}) const {
        if (steps.empty()) return jost_matrix(final_spec, k, so);
        Mat j = jost_matrix(*steps.front().base_spec, k, so);
        for (const auto& s : steps) j = s.factor(k) * j;
        return j;
    }
};

// Sequential application; the spectrum is recomputed before every step.
inline ComposeResult compose(const ProblemSpec& spec, const std::vector<SurgeryPlan>& plans,
                             const SurgeryOptions& opt = {}) {
    ComposeResult out{spec, {}, {}};
    for (std::size_t i = 0; i < plans.size(); ++i) {
        try {
            SpectrumReport rep = assemble_spectrum(out.final_spec, opt.spectrum);
            TransformResult r = apply_plan(rep, plans[i], opt);
            for (const auto& w : r.warnings) out.warnings.push_back("step " + std::to_string(i) + ": " + w);
            out.final_spec = r.spec();
            out.steps.push_back(std::move(r));
        } catch (const Error& e) {
            throw Error(ErrorKind::plan_step_failed,
                        "step " + std::to_string(i) + " (" + std::string(to_string(e.kind())) + "): " + e.what(),
                        e.cause());
        }
    }
    return out;
}

}  // namespace specsurg
