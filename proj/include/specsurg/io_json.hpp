#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "specsurg/core.hpp"
#include "specsurg/potential.hpp"
#include "specsurg/problem.hpp"
#include "specsurg/spectrum.hpp"
#include "specsurg/surgery.hpp"

namespace specsurg {

using json = nlohmann::json;

// Shortest decimal of the value rounded to 12 significant digits.
inline double round12(Real v) {
    if (!std::isfinite(double(v))) return double(v);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12Lg", v);
    return std::strtod(buf, nullptr);
}

inline json to_json(Cplx z) { return json::array({round12(z.real()), round12(z.imag())}); }

inline json to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(to_json(m(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

// Sorted keys (the default object map), two-space indent, trailing newline.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

namespace io_detail {

[[noreturn]] inline void fail(const std::string& where, const std::string& what) {
    throw Error(ErrorKind::parse_error, where + ": " + what);
}

inline const json& field(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) fail(where, std::string("missing field '") + key + "'");
    return j.at(key);
}

inline Real number(const json& j, const std::string& where) {
    if (!j.is_number()) fail(where, "expected a number");
    return j.get<double>();
}

inline Cplx complex_entry(const json& j, const std::string& where) {
    if (j.is_number()) return Cplx(j.get<double>(), 0);
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return Cplx(j[0].get<double>(), j[1].get<double>());
    fail(where, "expected a number or a [re, im] pair");
}

}  // namespace io_detail

// Square or rectangular complex matrix; entries are numbers or [re, im] pairs.
inline Mat matrix_from_json(const json& j, const std::string& where) {
    using namespace io_detail;
    if (!j.is_array() || j.empty()) fail(where, "expected a non-empty array of rows");
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    if (cols == 0) fail(where, "rows must be non-empty arrays");
    Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols) fail(where, "row " + std::to_string(i) + " has the wrong length");
        for (std::size_t c = 0; c < cols; ++c)
            m(Eigen::Index(i), Eigen::Index(c)) =
                complex_entry(j[i][c], where + "[" + std::to_string(i) + "][" + std::to_string(c) + "]");
    }
    return m;
}

inline Potential potential_from_json(const json& j, Eigen::Index n, const std::string& where = "potential") {
    using namespace io_detail;
    if (!j.is_object()) fail(where, "expected an object");
    if (j.contains("family")) {
        std::string fam = j.at("family").get<std::string>();
        json params = j.value("params", json::object());
        std::string pw = where + ".params";
        if (fam == "zero") return zero_potential(j.contains("n") ? j.at("n").get<int>() : n);
        if (fam == "exponential")
            return family_exponential(number(field(params, "alpha", pw), pw + ".alpha"),
                                      number(field(params, "epsilon", pw), pw + ".epsilon"),
                                      number(field(params, "beta", pw), pw + ".beta"));
        if (fam == "inverse_square") return family_inverse_square(number(field(params, "a", pw), pw + ".a"));
        fail(where + ".family", "unknown family '" + fam + "'");
    }
    if (j.contains("combine")) {
        const json& c = j.at("combine");
        std::string mode = c.value("mode", std::string("real"));
        if (mode != "real" && mode != "complex") fail(where + ".combine.mode", "expected 'real' or 'complex'");
        return combine_scalar_to_matrix(potential_from_json(field(c, "v1", where + ".combine"), 1, where + ".combine.v1"),
                                        potential_from_json(field(c, "v2", where + ".combine"), 1, where + ".combine.v2"),
                                        mode == "real" ? CombineMode::real : CombineMode::complex);
    }
    if (j.contains("scaled")) {
        const json& c = j.at("scaled");
        return scaled_potential(potential_from_json(field(c, "potential", where + ".scaled"), 1, where + ".scaled.potential"),
                                matrix_from_json(field(c, "matrix", where + ".scaled"), where + ".scaled.matrix"));
    }
    if (j.contains("tabulated")) {
        const json& t = j.at("tabulated");
        std::string tw = where + ".tabulated";
        const json& grid = field(t, "grid", tw);
        const json& mats = field(t, "matrices", tw);
        if (!grid.is_array() || !mats.is_array()) fail(tw, "grid and matrices must be arrays");
        std::vector<Real> xs;
        std::vector<Mat> ms;
        for (std::size_t i = 0; i < grid.size(); ++i) xs.push_back(number(grid[i], tw + ".grid"));
        for (std::size_t i = 0; i < mats.size(); ++i)
            ms.push_back(matrix_from_json(mats[i], tw + ".matrices[" + std::to_string(i) + "]"));
        std::string interp = t.value("interpolation", std::string("cubic"));
        if (interp != "linear" && interp != "cubic") fail(tw + ".interpolation", "expected 'linear' or 'cubic'");
        return tabulated_potential(std::move(xs), std::move(ms),
                                   interp == "linear" ? Interpolation::linear : Interpolation::cubic);
    }
    fail(where, "expected one of 'family', 'combine', 'scaled', 'tabulated', 'surgery'");
}

// --- plans -------------------------------------------------------------------

inline SurgeryPlan plan_from_json(const json& j, const std::string& where = "plan") {
    using namespace io_detail;
    std::string op = field(j, "op", where).get<std::string>();
    Real kappa = number(field(j, "kappa", where), where + ".kappa");
    auto mat = [&](const char* key) { return matrix_from_json(field(j, key, where), where + "." + key); };
    if (op == "remove") return RemovePlan{kappa};
    if (op == "lower") return LowerPlan{kappa, mat("Q_r")};
    if (op == "add") {
        AddPlan p{kappa, {}, {}, {}};
        if (j.contains("C")) p.C = mat("C");
        if (j.contains("Q")) p.Q = mat("Q");
        if (j.contains("G")) p.G = mat("G");
        if (!p.C && !(p.Q && p.G)) fail(where, "add needs 'C' or both 'Q' and 'G'");
        return p;
    }
    if (op == "raise") return RaisePlan{kappa, mat("Q_i"), mat("G_i")};
    fail(where + ".op", "unknown operation '" + op + "'");
}

inline json plan_to_json(const SurgeryPlan& plan) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            json j;
            j["kappa"] = round12(p.kappa);
            if constexpr (std::is_same_v<T, RemovePlan>) {
                j["op"] = "remove";
            } else if constexpr (std::is_same_v<T, LowerPlan>) {
                j["op"] = "lower";
                j["Q_r"] = to_json(p.Q_r);
            } else if constexpr (std::is_same_v<T, AddPlan>) {
                j["op"] = "add";
                if (p.C) j["C"] = to_json(*p.C);
                if (p.Q) j["Q"] = to_json(*p.Q);
                if (p.G) j["G"] = to_json(*p.G);
            } else {
                j["op"] = "raise";
                j["Q_i"] = to_json(p.Q_i);
                j["G_i"] = to_json(p.G_i);
            }
            return j;
        },
        plan);
}

// A plan file is either an array of steps or {"steps": [...]}.
inline std::vector<SurgeryPlan> plans_from_json(const json& j) {
    const json& steps = j.is_object() ? io_detail::field(j, "steps", "plan file") : j;
    if (!steps.is_array()) io_detail::fail("plan file", "expected an array of steps");
    std::vector<SurgeryPlan> out;
    for (std::size_t i = 0; i < steps.size(); ++i) out.push_back(plan_from_json(steps[i], "steps[" + std::to_string(i) + "]"));
    return out;
}

// --- problems ----------------------------------------------------------------

// The source JSON is kept so derived problems can be written back as base + plans.
struct ParsedProblem {
    ProblemSpec spec;
    json source;
};

// A derived problem stores its base problem and the plan list; the potential is rebuilt on load.
inline ParsedProblem problem_from_json(const json& j, const SurgeryOptions& opt = {}) {
    using namespace io_detail;
    if (!j.is_object()) fail("problem", "expected an object");
    const json& pot = field(j, "potential", "problem");
    if (pot.is_object() && pot.contains("surgery")) {
        const json& s = pot.at("surgery");
        ParsedProblem base = problem_from_json(field(s, "base", "potential.surgery"), opt);
        ComposeResult c = compose(base.spec, plans_from_json(field(s, "plans", "potential.surgery")), opt);
        if (j.contains("boundary")) {
            const json& bc = j.at("boundary");
            Mat a = matrix_from_json(field(bc, "A", "boundary"), "boundary.A");
            Mat b = matrix_from_json(field(bc, "B", "boundary"), "boundary.B");
            Real da = (a - c.final_spec.A()).norm(), db = (b - c.final_spec.B()).norm();
            Real scale = std::max(Real(1), c.final_spec.A().norm() + c.final_spec.B().norm());
            if (da + db > Real(1e-8L) * scale)
                fail("boundary", "stated boundary pair disagrees with the one produced by the plans");
        }
        return {c.final_spec, j};
    }
    const json& bc = field(j, "boundary", "problem");
    Mat a = matrix_from_json(field(bc, "A", "boundary"), "boundary.A");
    Mat b = matrix_from_json(field(bc, "B", "boundary"), "boundary.B");
    Eigen::Index n = j.contains("n") ? j.at("n").get<int>() : a.rows();
    if (a.rows() != n) fail("problem.n", "does not match the boundary matrices");
    return {make_problem(potential_from_json(pot, n), a, b), j};
}

inline json derived_problem_json(const json& base_source, const std::vector<SurgeryPlan>& plans,
                                 const ProblemSpec& result) {
    json plist = json::array();
    for (const auto& p : plans) plist.push_back(plan_to_json(p));
    json j;
    j["n"] = result.n();
    j["potential"] = {{"surgery", {{"base", base_source}, {"plans", plist}}}};
    j["boundary"] = {{"A", to_json(result.A())}, {"B", to_json(result.B())}};
    return j;
}

// Reads a JSON file; syntax errors carry the line number.
inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::parse_error, "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1 + std::count(text.begin(), text.begin() + std::min(e.byte, text.size()), '\n');
        throw Error(ErrorKind::parse_error, path + ":" + std::to_string(line) + ": " + e.what());
    }
}

inline ParsedProblem read_problem(const std::string& path, const SurgeryOptions& opt = {}) {
    json j = read_json_file(path);
    try {
        return problem_from_json(j, opt);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse_error, path + ": " + e.what());
    }
}

// --- reports -------------------------------------------------------------------

inline json bound_state_json(const BoundState& s) {
    json j;
    j["kappa"] = round12(s.kappa);
    j["energy"] = round12(s.lambda());
    j["multiplicity"] = s.multiplicity;
    j["Q"] = to_json(s.Q.matrix());
    j["P"] = to_json(s.P.matrix());
    j["M"] = to_json(s.M);
    j["C"] = to_json(s.C);
    j["D"] = to_json(s.D);
    j["J_at_i_kappa"] = to_json(s.J);
    j["marchenko_A"] = to_json(s.A_mat);
    j["marchenko_B"] = to_json(s.B_mat);
    j["gelfand_levitan_G"] = to_json(s.G_mat);
    j["gelfand_levitan_H"] = to_json(s.H_mat);
    return j;
}

inline json spectrum_json(const SpectrumReport& rep) {
    json j;
    j["n"] = rep.spec().n();
    j["bound_state_count"] = rep.N();
    j["total_multiplicity"] = rep.total_N();
    j["generic"] = rep.generic() ? json(*rep.generic()) : json(nullptr);
    j["warnings"] = rep.warnings();
    j["bound_states"] = json::array();
    for (const auto& s : rep.states()) j["bound_states"].push_back(bound_state_json(s));
    j["potential_class"] = to_string(rep.spec().potential().decl_class());
    return j;
}

inline json transform_json(const TransformResult& r) {
    json j;
    j["operation"] = to_string(r.kind);
    j["kappa"] = round12(r.kappa);
    j["multiplicity_change"] = r.multiplicity_change;
    j["old_multiplicity"] = r.old_multiplicity;
    j["C"] = to_json(r.C);
    j["Q"] = to_json(r.Q.matrix());
    j["P"] = to_json(r.P.matrix());
    j["A_perturbed"] = to_json(r.spec().A());
    j["B_perturbed"] = to_json(r.spec().B());
    if (r.L) {
        j["L"] = to_json(r.L->L);
        j["L_station_spread"] = round12(r.L->station_spread);
        j["L_from_fit"] = r.L->from_fit;
    }
    j["warnings"] = r.warnings;
    return j;
}

}  // namespace specsurg
