#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace specsurg {

// Working precision of the numerical pipeline.
using Real = long double;
using Cplx = std::complex<Real>;

template <class R>
using CMat = Eigen::Matrix<std::complex<R>, Eigen::Dynamic, Eigen::Dynamic>;
template <class R>
using CVec = Eigen::Matrix<std::complex<R>, Eigen::Dynamic, 1>;

using Mat = CMat<Real>;
using Vec = CVec<Real>;

inline constexpr Cplx I_unit{0.0L, 1.0L};
inline constexpr Real pi_v = 3.141592653589793238462643383279502884L;

enum class ErrorKind {
    invalid_input,
    invalid_span,
    not_positive,
    out_of_domain,
    invalid_rank,
    non_selfadjoint_boundary,
    degenerate_boundary,
    invalid_parameter,
    invalid_sample,
    invalid_grid,
    solver_diverged,
    unsupported_at_zero,
    exceptional_point,
    unresolved_root,
    inconsistent_bound_state,
    dependency_unresolved,
    no_such_state,
    kernel_degeneracy,
    invalid_subprojection,
    redirected_to_remove,
    collision,
    invalid_normalization,
    projection_overlap,
    plan_step_failed,
    unknown_fixture,
    parse_error,
};

inline std::string_view to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::invalid_span: return "invalid-span";
    case ErrorKind::not_positive: return "not-positive";
    case ErrorKind::out_of_domain: return "out-of-domain";
    case ErrorKind::invalid_rank: return "invalid-rank";
    case ErrorKind::non_selfadjoint_boundary: return "non-selfadjoint-boundary";
    case ErrorKind::degenerate_boundary: return "degenerate-boundary";
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::invalid_sample: return "invalid-sample";
    case ErrorKind::invalid_grid: return "invalid-grid";
    case ErrorKind::solver_diverged: return "solver-diverged";
    case ErrorKind::unsupported_at_zero: return "unsupported-at-zero";
    case ErrorKind::exceptional_point: return "exceptional-point";
    case ErrorKind::unresolved_root: return "unresolved-root";
    case ErrorKind::inconsistent_bound_state: return "inconsistent-bound-state";
    case ErrorKind::dependency_unresolved: return "dependency-unresolved";
    case ErrorKind::no_such_state: return "no-such-state";
    case ErrorKind::kernel_degeneracy: return "kernel-degeneracy";
    case ErrorKind::invalid_subprojection: return "invalid-subprojection";
    case ErrorKind::redirected_to_remove: return "redirected-to-remove";
    case ErrorKind::collision: return "collision";
    case ErrorKind::invalid_normalization: return "invalid-normalization";
    case ErrorKind::projection_overlap: return "projection-overlap";
    case ErrorKind::plan_step_failed: return "plan-step-failed";
    case ErrorKind::unknown_fixture: return "unknown-fixture";
    case ErrorKind::parse_error: return "parse-error";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), cause_(kind) {}
    // Wrapping error that remembers the kind of the error it wraps.
    Error(ErrorKind kind, const std::string& what, ErrorKind cause)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), cause_(cause) {}
    ErrorKind kind() const noexcept { return kind_; }
    ErrorKind cause() const noexcept { return cause_; }

private:
    ErrorKind kind_;
    ErrorKind cause_;
};

// Non-fatal diagnostics carried on results.
using Warnings = std::vector<std::string>;

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            auto v = m(i, j);
            if (!std::isfinite(std::real(v)) || !std::isfinite(std::imag(v))) return false;
        }
    return true;
}

inline Mat identity(Eigen::Index n) { return Mat::Identity(n, n); }

// Conversions between the working precision and double.
template <class To, class From>
CMat<To> cast_mat(const CMat<From>& m) {
    CMat<To> out(m.rows(), m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            out(i, j) = std::complex<To>(static_cast<To>(m(i, j).real()),
                                         static_cast<To>(m(i, j).imag()));
    return out;
}

}  // namespace specsurg
