#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "specsurg/core.hpp"
#include "specsurg/linalg.hpp"
#include "specsurg/problem.hpp"
#include "specsurg/quadrature.hpp"
#include "specsurg/spectrum.hpp"
#include "specsurg/wave.hpp"

namespace specsurg {

struct InvariantCheck {
    std::string name;
    std::string group;
    Real residual = 0;
    Real tol = 0;
    bool passed = false;
    std::string detail;
};

struct InvariantReport {
    std::vector<InvariantCheck> checks;
    Warnings notes;
    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const InvariantCheck& c) { return c.passed; });
    }
    void add(std::string name, std::string group, Real res, Real tol, std::string detail = {}) {
        checks.push_back({std::move(name), std::move(group), res, tol, std::isfinite(double(res)) && res <= tol,
                          std::move(detail)});
    }
};

struct VerifyOptions {
    SpectrumOptions spectrum{};
    unsigned seed = 20240917;
    int hermiticity_points = 100;
    Real x_probe_max = 20;
    int unitarity_points = 20;
    Real k_min = 0.2L, k_max = 5;
    int representation_points = 10;
    int gauge_trials = 10;
    Real unitarity_tol = 1e-8L;
    Real representation_tol = 1e-6L;
    Real orthonormality_tol = 1e-6L;
    Real penrose_tol = 1e-10L;
    Real gauge_tol = 1e-6L;
    Real hermiticity_tol = 1e-12L;
};

namespace verify_detail {

inline Real rel(const Mat& a, const Mat& b, Real floor = 1) { return (a - b).norm() / std::max(b.norm(), floor); }

inline Mat random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> nd;
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = Cplx(nd(rng), nd(rng));
    return m;
}

// Well-conditioned random invertible matrix: identity plus a bounded perturbation.
inline Mat random_invertible(std::mt19937_64& rng, Eigen::Index n) {
    for (;;) {
        Mat t = identity(n) + Real(0.4) * random_matrix(rng, n, n);
        if (condition_number(t) < Real(20)) return t;
    }
}

inline Real max_decay_range(const SpectrumReport& rep) {
    Real kmin = std::numeric_limits<Real>::infinity();
    for (const auto& s : rep.states()) kmin = std::min(kmin, s.kappa);
    return Real(40) / kmin + 20;
}

}  // namespace verify_detail

// V(x) Hermitian at random x.
inline void check_hermiticity(const Potential& v, const VerifyOptions& opt, InvariantReport& out) {
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> ux(0, double(opt.x_probe_max));
    Real worst = 0;
    for (int i = 0; i < opt.hermiticity_points; ++i) {
        Mat m = v(Real(ux(rng)));
        worst = std::max(worst, (m - m.adjoint()).norm() / std::max(Real(1), m.norm()));
    }
    out.add("V(x) Hermitian at " + std::to_string(opt.hermiticity_points) + " random x", "hermiticity", worst,
            opt.hermiticity_tol);
}

// S(-k) = S(k)^dagger = S(k)^{-1} on an evenly spaced real grid.
inline void check_unitarity(const ProblemSpec& spec, const VerifyOptions& opt, InvariantReport& out) {
    Real worst = 0;
    const SolverOptions& so = opt.spectrum.solver;
    for (int i = 0; i < opt.unitarity_points; ++i) {
        Real k = opt.k_min + (opt.k_max - opt.k_min) * i / std::max(1, opt.unitarity_points - 1);
        Mat s = scattering_matrix(spec, k, so), sm = scattering_matrix(spec, -k, so);
        Mat id = identity(spec.n());
        worst = std::max({worst, (sm - s.adjoint()).norm(), (s.adjoint() * s - id).norm(), (sm * s - id).norm()});
    }
    out.add("S(-k) = S(k)^dagger = S(k)^-1 at " + std::to_string(opt.unitarity_points) + " real k", "unitarity",
            worst, opt.unitarity_tol);
}

// phi from a forward solve vs its representations through Psi and J, and through f and J.
inline void check_representation(const ProblemSpec& spec, const VerifyOptions& opt, InvariantReport& out) {
    std::mt19937_64 rng(opt.seed + 1);
    std::uniform_real_distribution<double> uk(double(opt.k_min) + 0.1, double(opt.k_max) - 1),
        ux(0, 5);
    const SolverOptions& so = opt.spectrum.solver;
    Real w_psi = 0, w_f = 0;
    for (int i = 0; i < opt.representation_points; ++i) {
        Real k = Real(uk(rng)), x = Real(ux(rng));
        WaveSlice phi = solve_regular(spec, Cplx(k), so, std::max(x, Real(1e-6L)));
        PhysicalSolution psi(spec, k, so);
        WaveSlice fp = solve_jost(spec.potential(), Cplx(k), so), fm = solve_jost(spec.potential(), Cplx(-k), so);
        Mat ph = phi.value(x);
        Cplx two_ik = Real(2) * I_unit * k;
        Mat via_psi = -(psi.value(x) * psi.jost_k()) / two_ik;
        Mat via_f = (fp.value(x) * psi.jost_minus_k() - fm.value(x) * psi.jost_k()) / two_ik;
        w_psi = std::max(w_psi, verify_detail::rel(via_psi, ph));
        w_f = std::max(w_f, verify_detail::rel(via_f, ph));
    }
    out.add("phi = -(1/2ik) Psi J at random (k, x)", "representation", w_psi, opt.representation_tol);
    out.add("phi = (1/2ik)[f(k) J(-k) - f(-k) J(k)] at random (k, x)", "representation", w_f,
            opt.representation_tol);
}

// Integrals of Psi_j^dagger Psi_l and Phi_j^dagger Phi_l against delta_jl P_j and delta_jl Q_j.
inline void check_orthonormality(const SpectrumReport& rep, const VerifyOptions& opt, InvariantReport& out) {
    if (rep.N() == 0) return;
    const auto& st = rep.states();
    Real lim = verify_detail::max_decay_range(rep);
    Real w_psi = 0, w_phi = 0;
    const Eigen::Index n = rep.spec().n();
    for (std::size_t a = 0; a < st.size(); ++a)
        for (std::size_t b = a; b < st.size(); ++b) {
            const BoundState &sa = st[a], &sb = st[b];
            Mat ip = integrate_panels([&](Real x) -> Mat { return sa.Psi(x).adjoint() * sb.Psi(x); }, Real(0), lim,
                                      Real(2), opt.spectrum.quad);
            Mat iq = integrate_panels([&](Real x) -> Mat { return sa.Phi(x).adjoint() * sb.Phi(x); }, Real(0), lim,
                                      Real(2), opt.spectrum.quad);
            Mat wp = a == b ? sa.P.matrix() : Mat(Mat::Zero(n, n));
            Mat wq = a == b ? sa.Q.matrix() : Mat(Mat::Zero(n, n));
            w_psi = std::max(w_psi, (ip - wp).norm());
            w_phi = std::max(w_phi, (iq - wq).norm());
        }
    out.add("integral Psi_j^dagger Psi_l = delta_jl P_j", "orthonormality", w_psi, opt.orthonormality_tol);
    out.add("integral Phi_j^dagger Phi_l = delta_jl Q_j", "orthonormality", w_phi, opt.orthonormality_tol);
}

// Penrose identities for the pseudoinverses the pipeline takes.
inline void check_state_penrose(const SpectrumReport& rep, const VerifyOptions& opt, InvariantReport& out) {
    if (rep.N() == 0) return;
    Real worst = 0;
    for (const auto& s : rep.states())
        for (const Mat* m : {&s.M, &s.C, &s.J}) worst = std::max(worst, penrose_residuals(*m, pinv(*m)).max());
    out.add("Penrose identities for M_j, C_j, J(i kappa_j)", "penrose", worst, opt.penrose_tol);
}

// Penrose identities on random matrices of random shape and rank.
inline Real penrose_battery(int count, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dim(1, 6);
    Real worst = 0;
    for (int i = 0; i < count; ++i) {
        int r = dim(rng), c = dim(rng), k = std::uniform_int_distribution<int>(1, std::min(r, c))(rng);
        Mat m = verify_detail::random_matrix(rng, r, k) * verify_detail::random_matrix(rng, k, c);
        worst = std::max(worst, penrose_residuals(m, pinv(m)).max());
    }
    return worst;
}

// (A, B) -> (A T, B T) leaves S, the bound-state energies and multiplicities, P_j and M_j unchanged.
inline void check_gauge(const ProblemSpec& spec, const SpectrumReport& rep, const VerifyOptions& opt,
                        InvariantReport& out) {
    std::mt19937_64 rng(opt.seed + 2);
    const SolverOptions& so = opt.spectrum.solver;
    const std::vector<Real> ks{0.4L, 1.3L, 2.9L};
    std::vector<Mat> s0;
    for (Real k : ks) s0.push_back(scattering_matrix(spec, k, so));
    Real w_s = 0, w_state = 0;
    bool same_count = true;
    for (int t = 0; t < opt.gauge_trials; ++t) {
        Mat tm = verify_detail::random_invertible(rng, spec.n());
        ProblemSpec g = make_problem(spec.potential(), Mat(spec.A() * tm), Mat(spec.B() * tm));
        for (std::size_t i = 0; i < ks.size(); ++i) w_s = std::max(w_s, (scattering_matrix(g, ks[i], so) - s0[i]).norm());
        SpectrumReport gr = assemble_spectrum(g, opt.spectrum);
        if (gr.N() != rep.N()) {
            same_count = false;
            continue;
        }
        for (std::size_t j = 0; j < rep.N(); ++j) {
            const BoundState &a = rep.states()[j], &b = gr.states()[j];
            if (a.multiplicity != b.multiplicity) same_count = false;
            w_state = std::max({w_state, std::abs(a.kappa - b.kappa) / a.kappa, (a.P.matrix() - b.P.matrix()).norm(),
                                verify_detail::rel(b.M, a.M)});
        }
    }
    std::string tag = " under " + std::to_string(opt.gauge_trials) + " random T";
    out.add("S(k) invariant" + tag, "gauge", w_s, opt.gauge_tol);
    out.add("bound-state count and multiplicities invariant" + tag, "gauge", same_count ? Real(0) : Real(1),
            Real(0.5));
    out.add("kappa_j, P_j, M_j invariant" + tag, "gauge", w_state, opt.gauge_tol);
}

// Full battery on one problem.
inline InvariantReport verify_problem(const ProblemSpec& spec, const VerifyOptions& opt = {}) {
    InvariantReport out;
    check_hermiticity(spec.potential(), opt, out);
    check_unitarity(spec, opt, out);
    check_representation(spec, opt, out);
    SpectrumReport rep = assemble_spectrum(spec, opt.spectrum);
    for (const auto& w : rep.warnings()) out.notes.push_back(w);
    if (rep.N() == 0) out.notes.push_back("no bound states: orthonormality and state Penrose checks are vacuous");
    check_orthonormality(rep, opt, out);
    check_state_penrose(rep, opt, out);
    check_gauge(spec, rep, opt, out);
    return out;
}

}  // namespace specsurg
