#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cli_app.hpp"

using namespace specsurg;
namespace fs = std::filesystem;

namespace {

const std::string data_dir = SPECSURG_DATA_DIR;

struct CliRun {
    int code;
    std::string out, err;
};

CliRun run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "specsurg");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = cli::run(int(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "specsurg_tests";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST(Golden, OverbarDigitIsKept) {
    EXPECT_EQ(golden("0.91670|7"), 0.916707L);
    EXPECT_EQ(golden("-1.25"), -1.25L);
    Mat m = golden_matrix({{"1|5", "2"}, {"-0.5", "0.2|5"}});
    EXPECT_EQ(m(0, 0).real(), 15);
    EXPECT_EQ(m(1, 1).real(), 0.25L);
}

TEST(Fixtures, RegistryIdsAreUniqueAndContainSpecIds) {
    auto ids = fixture_ids();
    std::set<std::string> uniq(ids.begin(), ids.end());
    EXPECT_EQ(uniq.size(), ids.size());
    for (const char* id : {"ex9.3", "ex9.8", "ex10.1", "ex10.9", "thm8.1"}) EXPECT_TRUE(uniq.count(id)) << id;
}

TEST(Fixtures, UnknownIdThrows) {
    try {
        run_fixture("ex99.1");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::unknown_fixture);
    }
}

TEST(Fixtures, FreeFixturePasses) {
    FixtureReport r = run_fixture("free");
    EXPECT_TRUE(r.passed()) << r.error;
    EXPECT_FALSE(r.checks.empty());
}

TEST(Json, TwelveDigitRounding) {
    EXPECT_EQ(round12(1.0L / 3), 0.333333333333);
    EXPECT_EQ(round12(123456789.0123456789L), 123456789.012);
    EXPECT_EQ(to_json(Cplx(1, -2)).dump(), "[1.0,-2.0]");
}

TEST(Json, MatrixAcceptsRealAndComplexEntries) {
    Mat m = matrix_from_json(json::parse("[[1, [0, 2]], [[0, -2], 3.5]]"), "m");
    EXPECT_EQ(m(0, 1), Cplx(0, 2));
    EXPECT_EQ(m(1, 1), Cplx(3.5L, 0));
    EXPECT_THROW(matrix_from_json(json::parse("[[1, 2], [3]]"), "m"), Error);
    EXPECT_THROW(matrix_from_json(json::parse("[[\"a\"]]"), "m"), Error);
}

TEST(Json, PlanRoundTrip) {
    std::vector<SurgeryPlan> plans{RemovePlan{1.5L}, LowerPlan{1, mat2(1, 0, 0, 0)},
                                   AddPlan{2, mat1(3), {}, {}}};
    json j = json::array();
    for (const auto& p : plans) j.push_back(plan_to_json(p));
    auto back = plans_from_json(j);
    ASSERT_EQ(back.size(), 3u);
    EXPECT_TRUE(std::holds_alternative<RemovePlan>(back[0]));
    EXPECT_EQ(std::get<LowerPlan>(back[1]).Q_r(0, 0), Cplx(1));
    EXPECT_EQ(plan_to_json(back[2]).dump(), j[2].dump());
    EXPECT_THROW(plans_from_json(json::parse(R"([{"op": "teleport", "kappa": 1}])")), Error);
}

TEST(Json, ProblemFileMatchesBuilder) {
    ParsedProblem p = read_problem(data_dir + "/problems/example9_3.json");
    ProblemSpec want = fixture_detail::ex93_problem();
    EXPECT_LT((p.spec.A() - want.A()).norm(), 1e-15L);
    for (Real x : {Real(0), Real(1.2L), Real(6)})
        EXPECT_LT((p.spec.potential()(x) - want.potential()(x)).norm(), 1e-15L);
}

TEST(Json, ParseErrorReportsLine) {
    fs::path f = scratch("broken.json");
    std::ofstream(f) << "{\n  \"n\": 1,\n  \"potential\": {,\n}\n";
    try {
        read_problem(f.string());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::parse_error);
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
    }
}

TEST(Cli, ExitCodeMapping) {
    EXPECT_EQ(cli::exit_code_for(ErrorKind::no_such_state), cli::plan_mismatch);
    EXPECT_EQ(cli::exit_code_for(ErrorKind::solver_diverged), cli::numerical_failure);
    EXPECT_EQ(cli::exit_code_for(ErrorKind::unknown_fixture), cli::unknown_fixture_id);
    EXPECT_EQ(cli::exit_code_for(ErrorKind::non_selfadjoint_boundary), cli::input_error);
}

TEST(Cli, GridParsing) {
    auto g = cli::parse_grid("0.5:2:4", "--k-grid");
    EXPECT_EQ(g.points().size(), 4u);
    EXPECT_EQ(g.points().back(), 2);
    EXPECT_THROW(cli::parse_grid("1:2", "--k-grid"), Error);
    EXPECT_THROW(cli::parse_grid("1:2:0", "--k-grid"), Error);
    EXPECT_THROW(cli::parse_grid("3:2:5", "--k-grid"), Error);
}

TEST(Cli, AnalyzeFreeDirichletFindsNothing) {
    auto r = run_cli({"analyze", data_dir + "/problems/free_dirichlet.json"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out)["spectrum"]["bound_state_count"], 0);
}

TEST(Cli, OutputIsDeterministic) {
    std::vector<std::string> args{"analyze", data_dir + "/problems/free_robin.json", "--k-grid", "0.5:2:3"};
    auto a = run_cli(args), b = run_cli(args);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
}

TEST(Cli, CsvOutputHasHeader) {
    auto r = run_cli({"analyze", data_dir + "/problems/free_robin.json", "--format", "csv", "--k-grid", "1:2:2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("kind,abscissa,row,col,re,im\n", 0), 0u);
    EXPECT_NE(r.out.find("\nS,"), std::string::npos);
}

TEST(Cli, InputErrorsExitTwo) {
    EXPECT_EQ(run_cli({"analyze", data_dir + "/problems/non_selfadjoint_boundary.json"}).code, 2);
    EXPECT_EQ(run_cli({"analyze", data_dir + "/problems/missing.json"}).code, 2);
    EXPECT_EQ(run_cli({"analyze", data_dir + "/problems/free_robin.json", "--tol", "bogus=1"}).code, 2);
    EXPECT_EQ(run_cli({"analyze", data_dir + "/problems/free_robin.json", "--k-grid", "a:b:c"}).code, 2);
    EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
}

TEST(Cli, UnknownFixtureListsValidIds) {
    auto r = run_cli({"reproduce", "nope"});
    EXPECT_EQ(r.code, 4);
    EXPECT_NE(r.err.find("ex10.1"), std::string::npos);
}

TEST(Cli, NonHermitianSampleFailsVerify) {
    auto r = run_cli({"verify", data_dir + "/problems/tabulated_non_hermitian.json"});
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(json::parse(r.out)["passed"].get<bool>());
}

TEST(Cli, PlanAgainstMissingStateExitsThree) {
    auto r = run_cli({"surgery", data_dir + "/problems/free_robin.json", "--plan", data_dir + "/plans/remove_missing_state.json"});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("step 0"), std::string::npos);
}

TEST(CliProperty, SurgeryOutputRoundTripsThroughAnalyze) {
    fs::path out = scratch("add.json");
    auto s = run_cli({"surgery", data_dir + "/problems/free_robin.json", "--plan", data_dir + "/plans/example10_1_add.json",
                  "--out", out.string()});
    ASSERT_EQ(s.code, 0) << s.err;
    json result = json::parse(std::ifstream(out));
    EXPECT_TRUE(result["spectrum_change_as_planned"].get<bool>());
    fs::path derived = out;
    derived.replace_extension(".problem.json");
    ASSERT_TRUE(fs::exists(derived));
    auto a = run_cli({"analyze", derived.string()});
    ASSERT_EQ(a.code, 0) << a.err;
    json spec = json::parse(a.out)["spectrum"];
    ASSERT_EQ(spec["bound_state_count"], 1);
    EXPECT_NEAR(spec["bound_states"][0]["kappa"].get<double>(), 1.5, 1e-8);
    EXPECT_EQ(spec["bound_states"][0]["multiplicity"], 1);
}
