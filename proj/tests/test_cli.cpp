#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "pss/cli.hpp"

namespace fs = std::filesystem;
using namespace pss::cli;

namespace {

std::string fixture(const std::string& name) { return std::string(PSS_FIXTURE_DIR) + "/" + name; }

fs::path fresh_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("pss_cli_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_argv(std::vector<std::string> args) {
    std::vector<const char*> argv = {"pss"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run((int)argv.size(), argv.data());
}

}  // namespace

TEST_CASE("cmd_check: passing and failing fixtures") {
    Options opt;
    opt.spec = fixture("group1.pss");
    opt.out = fresh_dir("check_ok").string();
    REQUIRE(cmd_check(opt) == kOk);
    REQUIRE(fs::exists(fs::path(opt.out) / "check_report.txt"));
    REQUIRE(fs::exists(fs::path(opt.out) / "manifest.json"));

    Options bad;
    bad.spec = fixture("broken_f12.pss");
    bad.out = fresh_dir("check_bad").string();
    REQUIRE(cmd_check(bad) == kCheckFailed);
}

TEST_CASE("run: missing spec file is a usage error") {
    REQUIRE(run_argv({"check", "--spec", "/nonexistent/file.pss"}) == kUsage);
    REQUIRE(run_argv({"bogus-subcommand"}) == kUsage);
}

TEST_CASE("cmd_classify labels the fixture suite") {
    for (const auto& [file, group] : std::vector<std::pair<std::string, std::string>>{
             {"group1.pss", "\"I\""},
             {"group2.pss", "\"II\""},
             {"group3.pss", "\"III\""},
             {"group4.pss", "\"IV\""},
             {"group5.pss", "\"V\""}}) {
        Options opt;
        opt.spec = fixture(file);
        opt.out = fresh_dir("classify_" + file).string();
        REQUIRE(cmd_classify(opt) == kOk);
        const auto manifest = slurp(fs::path(opt.out) / "manifest.json");
        REQUIRE(manifest.find("\"group\": " + group) != std::string::npos);
    }
}

TEST_CASE("cmd_rhs prints the admissible right-hand side") {
    Options opt;
    opt.spec = fixture("group1.pss");
    opt.out = fresh_dir("rhs").string();
    REQUIRE(cmd_rhs(opt) == kOk);
}

TEST_CASE("cmd_solve: reproducible byte-identical output") {
    Options opt;
    opt.spec = fixture("group1.pss");
    opt.nx = 64;
    opt.dt = 2e-4;
    opt.tend = 0.01;
    opt.store_every = 10;
    opt.out = fresh_dir("solve_a").string();
    REQUIRE(cmd_solve(opt) == kOk);
    Options opt2 = opt;
    opt2.out = fresh_dir("solve_b").string();
    REQUIRE(cmd_solve(opt2) == kOk);
    REQUIRE(slurp(fs::path(opt.out) / "solution.csv") ==
            slurp(fs::path(opt2.out) / "solution.csv"));
}

TEST_CASE("cmd_solve: instability is a distinct exit code") {
    Options opt;
    opt.spec = fixture("group1.pss");
    opt.nx = 128;
    opt.dt = 0.05;
    opt.tend = 50.0;
    opt.u0 = "sin(x) + 1e-3*sin(40*x)";
    opt.out = fresh_dir("solve_unstable").string();
    REQUIRE(cmd_solve(opt) == kUnstable);
}

TEST_CASE("cmd_immerse: full pipeline on the group-I fixture") {
    Options opt;
    opt.spec = fixture("group1.pss");
    opt.out = fresh_dir("immerse").string();
    // defaults: nx=512 periodic, dt=1e-4, tend=0.04, store_every=40,
    // l=3, gamma=1, sign auto, margin 0.05
    REQUIRE(cmd_immerse(opt) == kOk);
    REQUIRE(fs::exists(fs::path(opt.out) / "mesh.obj"));
    REQUIRE(fs::exists(fs::path(opt.out) / "diagnostics.csv"));
    REQUIRE(fs::exists(fs::path(opt.out) / "foliation.txt"));
    const auto manifest = slurp(fs::path(opt.out) / "manifest.json");
    REQUIRE(manifest.find("\"abc_sign\": 1") != std::string::npos);
    const auto diag = slurp(fs::path(opt.out) / "diagnostics.csv");
    REQUIRE(diag.rfind("x,t,s,a,b,c,H_mean,K_est,metric_err", 0) == 0);
}

TEST_CASE("cmd_immerse: solution CSV input") {
    Options solve_opt;
    solve_opt.spec = fixture("group1.pss");
    solve_opt.out = fresh_dir("solve_for_csv").string();
    REQUIRE(cmd_solve(solve_opt) == kOk);

    Options opt;
    opt.spec = fixture("group1.pss");
    opt.out = fresh_dir("immerse_csv").string();
    opt.solution_csv = (fs::path(solve_opt.out) / "solution.csv").string();
    REQUIRE(cmd_immerse(opt) == kOk);
    REQUIRE(fs::exists(fs::path(opt.out) / "mesh.obj"));
}

TEST_CASE("cmd_immerse: strip misses the domain") {
    Options opt;
    opt.spec = fixture("group1.pss");
    opt.out = fresh_dir("immerse_miss").string();
    opt.dirichlet = true;
    opt.xmin = 2.0;
    opt.xmax = 3.0;
    opt.nx = 64;
    opt.dt = 1e-4;
    opt.tend = 4e-3;
    opt.store_every = 10;
    opt.abc_sign = "+";  // skip the pairing search; the window is far outside
    REQUIRE(cmd_immerse(opt) == kStripMiss);
}

TEST_CASE("cmd_immerse rejects non-admissible systems") {
    Options opt;
    opt.spec = fixture("group2.pss");
    opt.out = fresh_dir("immerse_g2").string();
    REQUIRE(cmd_immerse(opt) == kCheckFailed);
}

TEST_CASE("cmd_probe: obstructed, consistent and degenerate inputs") {
    Options opt;
    opt.spec = fixture("group2.pss");
    opt.out = fresh_dir("probe2").string();
    REQUIRE(cmd_probe(opt) == kOk);
    REQUIRE(slurp(fs::path(opt.out) / "witness.txt").find("inconsistent") != std::string::npos);

    Options g1;
    g1.spec = fixture("group1.pss");
    g1.out = fresh_dir("probe1").string();
    REQUIRE(cmd_probe(g1) == kUsage);  // rejected with a pointer to immerse

    Options g5;
    g5.spec = fixture("group5.pss");
    g5.out = fresh_dir("probe5").string();
    REQUIRE(cmd_probe(g5) == kOk);
}

TEST_CASE("cmd_report on both families") {
    Options opt;
    opt.spec = fixture("group1.pss");
    opt.out = fresh_dir("report1").string();
    REQUIRE(cmd_report(opt) == kOk);
    const auto text = slurp(fs::path(opt.out) / "report.txt");
    REQUIRE(text.find("lemma conditions") != std::string::npos);
    REQUIRE(text.find("group I") != std::string::npos);
    REQUIRE(text.find("sign pairing") != std::string::npos);

    Options g4;
    g4.spec = fixture("group4.pss");
    g4.out = fresh_dir("report4").string();
    // group IV: the lemma residuals fail (it is not an admissible system),
    // so the combined report exits nonzero but still writes the witness
    REQUIRE(cmd_report(g4) == kCheckFailed);
    REQUIRE(slurp(fs::path(g4.out) / "report.txt").find("inconsistent") != std::string::npos);
}

TEST_CASE("tolerance overrides flow into the manifest") {
    Options opt;
    opt.spec = fixture("group1.pss");
    opt.out = fresh_dir("tol").string();
    opt.tol = {"seq_residual=1e-6"};
    REQUIRE(cmd_check(opt) == kOk);
    REQUIRE(slurp(fs::path(opt.out) / "manifest.json").find("1e-06") != std::string::npos);
    opt.tol = {"not_a_tolerance=1"};
    REQUIRE_THROWS_AS(cmd_check(opt), std::invalid_argument);
}

TEST_CASE("run parses subcommands end to end") {
    const auto out = fresh_dir("argv");
    REQUIRE(run_argv({"classify", "--spec", fixture("group4.pss"), "--out", out.string()}) == kOk);
    REQUIRE(run_argv({"rhs", "--spec", fixture("group1.pss"), "--out", out.string()}) == kOk);
}
