#pragma once

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "specsurg/fixtures.hpp"
#include "specsurg/io_json.hpp"
#include "specsurg/spectrum.hpp"
#include "specsurg/surgery.hpp"
#include "specsurg/verify.hpp"

namespace specsurg::cli {

enum ExitCode : int { ok = 0, input_error = 2, plan_mismatch = 3, unknown_fixture_id = 4, numerical_failure = 5 };

inline int exit_code_for(ErrorKind k) {
    switch (k) {
    case ErrorKind::unknown_fixture: return unknown_fixture_id;
    case ErrorKind::no_such_state:
    case ErrorKind::collision:
    case ErrorKind::invalid_subprojection:
    case ErrorKind::projection_overlap:
    case ErrorKind::invalid_normalization:
    case ErrorKind::redirected_to_remove: return plan_mismatch;
    case ErrorKind::solver_diverged:
    case ErrorKind::unsupported_at_zero:
    case ErrorKind::exceptional_point:
    case ErrorKind::unresolved_root:
    case ErrorKind::inconsistent_bound_state:
    case ErrorKind::dependency_unresolved:
    case ErrorKind::kernel_degeneracy: return numerical_failure;
    default: return input_error;
    }
}

struct Grid {
    Real lo = 0, hi = 0;
    int count = 0;
    std::vector<Real> points() const {
        std::vector<Real> out;
        for (int i = 0; i < count; ++i) out.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
        return out;
    }
};

// "min:max:count" with count >= 1 and min <= max.
inline Grid parse_grid(const std::string& s, const std::string& flag) {
    std::stringstream ss(s);
    std::string a, b, c;
    if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c) )
        throw Error(ErrorKind::invalid_grid, flag + " expects min:max:count");
    Grid g;
    try {
        g.lo = std::stold(a);
        g.hi = std::stold(b);
        g.count = std::stoi(c);
    } catch (const std::exception&) {
        throw Error(ErrorKind::invalid_grid, flag + " expects min:max:count");
    }
    if (g.count < 1) throw Error(ErrorKind::invalid_grid, flag + " count must be positive");
    if (g.hi < g.lo) throw Error(ErrorKind::invalid_grid, flag + " needs min <= max");
    return g;
}

struct Config {
    std::string command;
    std::string input;
    std::string out;
    std::string format = "json";
    std::string plan;
    std::optional<Grid> k_grid, x_grid;
    SurgeryOptions surgery;
    VerifyOptions verify;
};

// NAME=VALUE overrides; every value must be positive.
inline void apply_tolerance(Config& cfg, const std::string& spec) {
    auto eq = spec.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::invalid_input, "--tol expects NAME=VALUE, got '" + spec + "'");
    std::string name = spec.substr(0, eq);
    Real v;
    try {
        v = std::stold(spec.substr(eq + 1));
    } catch (const std::exception&) {
        throw Error(ErrorKind::invalid_input, "--tol value for '" + name + "' is not a number");
    }
    if (!(v > 0)) throw Error(ErrorKind::invalid_input, "--tol value for '" + name + "' must be positive");
    SpectrumOptions& sp = cfg.surgery.spectrum;
    const std::map<std::string, std::function<void()>> setters{
        {"rtol", [&] { sp.solver.ode.rtol = v; }},
        {"atol", [&] { sp.solver.ode.atol = v; }},
        {"tail", [&] { sp.solver.tail_tol = v; }},
        {"quad_rel", [&] { sp.quad.rel_tol = v; }},
        {"quad_abs", [&] { sp.quad.abs_tol = v; }},
        {"nullity", [&] { sp.nullity_tol = double(v); }},
        {"kappa", [&] { sp.kappa_tol = v; }},
        {"rank", [&] { cfg.surgery.rank_tol = double(v); }},
        {"near_pole", [&] { cfg.surgery.near_pole = double(v); }},
        {"unitarity", [&] { cfg.verify.unitarity_tol = v; }},
        {"representation", [&] { cfg.verify.representation_tol = v; }},
        {"orthonormality", [&] { cfg.verify.orthonormality_tol = v; }},
        {"penrose", [&] { cfg.verify.penrose_tol = v; }},
        {"gauge", [&] { cfg.verify.gauge_tol = v; }},
    };
    auto it = setters.find(name);
    if (it == setters.end()) {
        std::string names;
        for (const auto& [k, _] : setters) names += (names.empty() ? "" : ", ") + k;
        throw Error(ErrorKind::invalid_input, "unknown tolerance '" + name + "' (known: " + names + ")");
    }
    it->second();
}

// Long-format CSV rows: kind, abscissa, row, col, re, im.
class CsvTable {
public:
    void add(const std::string& kind, Real at, const Mat& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                rows_.push_back(kind + "," + num(at) + "," + std::to_string(i) + "," + std::to_string(j) + "," +
                                num(m(i, j).real()) + "," + num(m(i, j).imag()));
    }
    std::string str() const {
        std::string s = "kind,abscissa,row,col,re,im\n";
        for (const auto& r : rows_) s += r + "\n";
        return s;
    }

private:
    static std::string num(Real v) {
        std::ostringstream os;
        os << std::setprecision(12) << round12(v);
        return os.str();
    }
    std::vector<std::string> rows_;
};

inline std::string csv_field(const std::string& s) {
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
}

inline std::string num12(Real v) {
    std::ostringstream os;
    os << std::setprecision(12) << round12(v);
    return os.str();
}

inline void emit(const Config& cfg, const std::string& text, std::ostream& out) {
    if (cfg.out.empty()) {
        out << text;
        return;
    }
    std::ofstream f(cfg.out);
    if (!f) throw Error(ErrorKind::invalid_input, "cannot write '" + cfg.out + "'");
    f << text;
}

inline json spectrum_summary(const SpectrumReport& rep) {
    json a = json::array();
    for (const auto& s : rep.states()) a.push_back({{"kappa", round12(s.kappa)}, {"multiplicity", s.multiplicity}});
    return a;
}

inline int cmd_analyze(const Config& cfg, std::ostream& out) {
    ParsedProblem p = read_problem(cfg.input, cfg.surgery);
    SpectrumReport rep = assemble_spectrum(p.spec, cfg.surgery.spectrum);
    if (cfg.k_grid && !(cfg.k_grid->lo > 0)) throw Error(ErrorKind::invalid_grid, "--k-grid needs min > 0");
    if (cfg.x_grid && cfg.x_grid->lo < 0) throw Error(ErrorKind::invalid_grid, "--x-grid needs min >= 0");
    if (cfg.format == "csv") {
        CsvTable t;
        for (const auto& s : rep.states()) {
            t.add("Q", s.kappa, s.Q.matrix());
            t.add("P", s.kappa, s.P.matrix());
            t.add("M", s.kappa, s.M);
            t.add("C", s.kappa, s.C);
            t.add("D", s.kappa, s.D);
        }
        if (cfg.k_grid)
            for (Real k : cfg.k_grid->points()) {
                t.add("S", k, rep.smatrix_at(k));
                t.add("rho", k * k, rep.rho_density_at(k * k));
            }
        if (cfg.x_grid)
            for (Real x : cfg.x_grid->points()) t.add("V", x, p.spec.potential()(x));
        emit(cfg, t.str(), out);
        return ok;
    }
    json j;
    j["spectrum"] = spectrum_json(rep);
    if (cfg.k_grid) {
        json ks = json::array(), ss = json::array(), rho = json::array(), dets = json::array();
        for (Real k : cfg.k_grid->points()) {
            ks.push_back(round12(k));
            ss.push_back(to_json(rep.smatrix_at(k)));
            rho.push_back(to_json(rep.rho_density_at(k * k)));
            dets.push_back(to_json(rep.jost_at(Cplx(k)).determinant()));
        }
        j["k_samples"] = {{"k", ks}, {"S", ss}, {"density_at_k_squared", rho}, {"det_J", dets}};
    }
    if (cfg.x_grid) {
        json xs = json::array(), vs = json::array();
        for (Real x : cfg.x_grid->points()) {
            xs.push_back(round12(x));
            vs.push_back(to_json(p.spec.potential()(x)));
        }
        j["x_samples"] = {{"x", xs}, {"V", vs}};
    }
    emit(cfg, dump(j), out);
    return ok;
}

// Multiplicities after the plans, predicted from the spectrum before them.
inline std::map<long long, int> predicted_spectrum(const SpectrumReport& before, const std::vector<SurgeryPlan>& plans) {
    auto key = [](Real k) { return static_cast<long long>(std::llround(double(k) * 1e6)); };
    std::map<long long, int> m;
    for (const auto& s : before.states()) m[key(s.kappa)] = s.multiplicity;
    for (const auto& p : plans)
        std::visit(
            [&](const auto& q) {
                using T = std::decay_t<decltype(q)>;
                long long k = key(q.kappa);
                if constexpr (std::is_same_v<T, RemovePlan>) {
                    m.erase(k);
                } else if constexpr (std::is_same_v<T, LowerPlan>) {
                    m[k] -= OrthProjection(q.Q_r).rank();
                    if (m[k] <= 0) m.erase(k);
                } else if constexpr (std::is_same_v<T, AddPlan>) {
                    m[k] = q.C ? projector_from_columns(*q.C, 1e-8).rank() : OrthProjection(*q.Q).rank();
                } else {
                    m[k] += OrthProjection(q.Q_i).rank();
                }
            },
            p);
    return m;
}

inline int cmd_surgery(const Config& cfg, std::ostream& out) {
    if (cfg.plan.empty()) throw Error(ErrorKind::invalid_input, "surgery needs --plan PATH");
    ParsedProblem p = read_problem(cfg.input, cfg.surgery);
    std::vector<SurgeryPlan> plans = plans_from_json(read_json_file(cfg.plan));
    SpectrumReport before = assemble_spectrum(p.spec, cfg.surgery.spectrum);
    ComposeResult c = compose(p.spec, plans, cfg.surgery);
    SpectrumReport after = assemble_spectrum(c.final_spec, cfg.surgery.spectrum);

    json steps = json::array();
    for (const auto& s : c.steps) steps.push_back(transform_json(s));
    Grid kg = cfg.k_grid.value_or(Grid{0.3L, 4, 10});
    if (!(kg.lo > 0)) throw Error(ErrorKind::invalid_grid, "--k-grid needs min > 0");
    json audit = json::array();
    Real worst = 0;
    const SolverOptions& so = cfg.surgery.spectrum.solver;
    for (Real k : kg.points()) {
        Cplx kk(k);
        Cplx ratio = jost_matrix(c.final_spec, kk, so).determinant() / jost_matrix(p.spec, kk, so).determinant();
        Cplx pred = 1;
        for (const auto& s : c.steps) pred *= s.det_factor(kk);
        Real res = std::abs(ratio - pred) / std::abs(pred);
        worst = std::max(worst, res);
        audit.push_back({{"k", round12(k)}, {"numeric_ratio", to_json(ratio)}, {"predicted", to_json(pred)},
                         {"residual", round12(res)}});
    }
    std::map<long long, int> want = predicted_spectrum(before, plans), got;
    for (const auto& s : after.states()) got[std::llround(double(s.kappa) * 1e6)] = s.multiplicity;

    json derived = derived_problem_json(p.source, plans, c.final_spec);
    json j;
    j["steps"] = steps;
    j["det_audit"] = audit;
    j["det_audit_max_residual"] = round12(worst);
    j["spectrum_before"] = spectrum_summary(before);
    j["spectrum_after"] = spectrum_summary(after);
    j["spectrum_change_as_planned"] = want == got;
    j["warnings"] = c.warnings;
    j["perturbed_problem"] = derived;
    if (!cfg.out.empty()) {
        std::string stem = cfg.out;
        if (stem.size() > 5 && stem.substr(stem.size() - 5) == ".json") stem.resize(stem.size() - 5);
        std::ofstream f(stem + ".problem.json");
        if (!f) throw Error(ErrorKind::invalid_input, "cannot write '" + stem + ".problem.json'");
        f << dump(derived);
    }
    emit(cfg, dump(j), out);
    return want == got ? ok : numerical_failure;
}

inline int cmd_verify(const Config& cfg, std::ostream& out) {
    InvariantReport r;
    int code = ok;
    try {
        ParsedProblem p = read_problem(cfg.input, cfg.surgery);
        VerifyOptions vo = cfg.verify;
        vo.spectrum = cfg.surgery.spectrum;
        r = verify_problem(p.spec, vo);
    } catch (const Error& e) {
        // A non-Hermitian sample is rejected while loading; report it as the failed check it is.
        if (e.kind() != ErrorKind::invalid_sample) throw;
        r.add("V(x) Hermitian at every sample", "hermiticity", 1, 0, e.what());
        code = input_error;
    }
    if (code == ok && !r.passed()) code = numerical_failure;
    if (cfg.format == "csv") {
        std::string s = "group,name,residual,tol,passed\n";
        for (const auto& c : r.checks)
            s += c.group + "," + csv_field(c.name) + "," + num12(c.residual) + "," + num12(c.tol) + "," +
                 (c.passed ? "true" : "false") + "\n";
        emit(cfg, s, out);
    } else {
        json checks = json::array();
        for (const auto& c : r.checks)
            checks.push_back({{"name", c.name}, {"group", c.group}, {"residual", round12(c.residual)},
                              {"tol", round12(c.tol)}, {"passed", c.passed}, {"detail", c.detail}});
        emit(cfg, dump(json{{"checks", checks}, {"notes", r.notes}, {"passed", r.passed()}}), out);
    }
    return code;
}

inline std::string fixture_table(const std::vector<FixtureReport>& reps) {
    std::ostringstream os;
    os << std::left;
    int failed = 0, total = 0;
    for (const auto& r : reps) {
        os << (r.passed() ? "PASS " : "FAIL ") << r.id << "\n";
        if (!r.error.empty()) os << "    error: " << r.error << "\n";
        for (const auto& c : r.checks) {
            ++total;
            failed += !c.passed;
            os << "    " << (c.passed ? "ok   " : "FAIL ") << std::setw(20) << c.group << " " << c.name
               << "  residual=" << std::setprecision(3) << double(c.residual) << " tol=" << double(c.tol) << "\n";
        }
    }
    os << "checks: " << total - failed << "/" << total << " passed\n";
    return os.str();
}

inline std::string fixture_csv(const std::vector<FixtureReport>& reps) {
    std::string s = "fixture,group,name,residual,tol,passed\n";
    for (const auto& r : reps)
        for (const auto& c : r.checks)
            s += r.id + "," + c.group + "," + csv_field(c.name) + "," + num12(c.residual) + "," + num12(c.tol) + "," +
                 (c.passed ? "true" : "false") + "\n";
    return s;
}

inline json fixture_json(const std::vector<FixtureReport>& reps) {
    json a = json::array();
    for (const auto& r : reps) {
        json checks = json::array();
        for (const auto& c : r.checks)
            checks.push_back({{"name", c.name}, {"group", c.group}, {"source", c.citation},
                              {"residual", round12(c.residual)}, {"tol", round12(c.tol)}, {"passed", c.passed}});
        a.push_back({{"id", r.id}, {"passed", r.passed()}, {"error", r.error}, {"checks", checks}, {"notes", r.notes}});
    }
    return a;
}

inline int cmd_reproduce(const Config& cfg, std::ostream& out, std::ostream& err) {
    std::vector<FixtureReport> reps;
    if (cfg.input == "all") {
        reps = run_all();
    } else {
        try {
            reps.push_back(run_fixture(cfg.input));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::unknown_fixture) throw;
            err << e.what() << "\nvalid ids:";
            for (const auto& id : fixture_ids()) err << " " << id;
            err << " all\n";
            return unknown_fixture_id;
        }
    }
    bool all_ok = std::all_of(reps.begin(), reps.end(), [](const FixtureReport& r) { return r.passed(); });
    if (cfg.format == "json")
        emit(cfg, dump(json{{"fixtures", fixture_json(reps)}, {"passed", all_ok}}), out);
    else if (cfg.format == "csv")
        emit(cfg, fixture_csv(reps), out);
    else
        emit(cfg, fixture_table(reps), out);
    return all_ok ? ok : numerical_failure;
}

// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Spectral analysis and bound-state surgery for half-line matrix Schrodinger operators"};
    app.require_subcommand(1);
    Config cfg;
    std::string kg, xg;
    std::vector<std::string> tols;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--out", cfg.out, "Output path (stdout when omitted)");
        sub->add_option("--tol", tols, "Tolerance override NAME=VALUE (repeatable)");
        sub->add_option("--k-grid", kg, "min:max:count");
        sub->add_option("--x-grid", xg, "min:max:count");
    };
    std::string reproduce_format = "text";
    auto format = [&](CLI::App* sub, std::string& target) {
        sub->add_option("--format", target, "json or csv (reproduce also accepts text, its default)")
            ->check(CLI::IsMember({"json", "csv", "text"}));
    };
    CLI::App* analyze = app.add_subcommand("analyze", "Bound states, normalizations and scattering data of a problem");
    analyze->add_option("problem", cfg.input, "Problem JSON file")->required();
    common(analyze);
    format(analyze, cfg.format);
    CLI::App* surgery = app.add_subcommand("surgery", "Apply a plan of bound-state surgeries to a problem");
    surgery->add_option("problem", cfg.input, "Problem JSON file")->required();
    surgery->add_option("--plan", cfg.plan, "Plan JSON file")->required();
    common(surgery);
    format(surgery, cfg.format);
    CLI::App* verify = app.add_subcommand("verify", "Run the invariant batteries on a problem");
    verify->add_option("problem", cfg.input, "Problem JSON file")->required();
    common(verify);
    format(verify, cfg.format);
    CLI::App* reproduce = app.add_subcommand("reproduce", "Run a golden fixture, or all of them");
    reproduce->add_option("fixture", cfg.input, "Fixture id or 'all'")->required();
    common(reproduce);
    format(reproduce, reproduce_format);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? ok : input_error;
    }
    try {
        for (const auto& t : tols) apply_tolerance(cfg, t);
        if (!kg.empty()) cfg.k_grid = parse_grid(kg, "--k-grid");
        if (!xg.empty()) cfg.x_grid = parse_grid(xg, "--x-grid");
        if (*analyze) return cmd_analyze(cfg, out);
        if (*surgery) return cmd_surgery(cfg, out);
        if (*verify) return cmd_verify(cfg, out);
        if (*reproduce) {
            cfg.format = reproduce_format;
            return cmd_reproduce(cfg, out, err);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind() == ErrorKind::plan_step_failed ? e.cause() : e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return input_error;
    }
    return input_error;
}

}  // namespace specsurg::cli
