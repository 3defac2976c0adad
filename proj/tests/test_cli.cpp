#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "bvlab/app.hpp"
#include "bvlab/error.hpp"

using namespace bvlab;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(BVLAB_SOURCE_DIR) / "configs";

// A fresh scratch directory under the test's working directory.
fs::path scratch(const std::string& name) {
    const fs::path dir = fs::current_path() / "cli_scratch" / name;
    fs::remove_all(dir);
    return dir;
}

CommonOptions options(const fs::path& out, const std::string& config = "") {
    CommonOptions o;
    o.out = out.string();
    if (!config.empty()) o.config = (kConfigs / config).string();
    o.quiet = true;
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return files;
}

std::size_t lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

int run(const std::function<int()>& body, std::string* err_text = nullptr) {
    std::ostringstream err;
    const int code = guarded(body, err);
    if (err_text) *err_text = err.str();
    return code;
}

}  // namespace

TEST_CASE("number lists") {
    CHECK(parse_vector("1,2.5,-3") == Vector{1, 2.5, -3});
    CHECK(parse_vector("9") == Vector{9});
    CHECK_THROWS_AS((void)parse_vector("1,,2"), Error);
    CHECK_THROWS_AS((void)parse_vector("1,x"), Error);
    CHECK_THROWS_AS((void)parse_vector(""), Error);
    CHECK_THROWS_AS((void)parse_vector("inf"), Error);
}

TEST_CASE("exit code mapping") {
    std::ostringstream err;
    CHECK(guarded([] { return 0; }, err) == kExitOk);
    CHECK(guarded([]() -> int { throw Error(ErrorCode::ConfigError, "x"); }, err) == kExitConfig);
    CHECK(guarded([]() -> int { throw Error(ErrorCode::LedgerViolation, "x"); }, err) == kExitFailed);
    CHECK(guarded([]() -> int { throw Error(ErrorCode::BlowUp, "x"); }, err) == kExitNumerical);
    CHECK(guarded([]() -> int { throw std::runtime_error("x"); }, err) == kExitNumerical);
}

TEST_CASE("simulate writes the trajectory and its ledger summary") {
    const fs::path dir = scratch("simulate");
    std::ostringstream out;
    CHECK(run([&] { return cmd_simulate(options(dir, "appendix_simulate.json"), out); }) == kExitOk);
    const std::string csv = slurp(dir / "trajectory.csv");
    CHECK(lines(csv) == 3001 + 1);
    const Json summary = Json::parse(slurp(dir / "summary.json"));
    CHECK(summary.contains("diagnostics"));
    // Only the two outputs remain; no temporaries are left behind.
    CHECK(tree(dir).size() == 2);
}

TEST_CASE("quadratic simulate keeps the ledger residual column small") {
    const fs::path dir = scratch("simulate_quadratic");
    std::ostringstream out;
    REQUIRE(run([&] { return cmd_simulate(options(dir, "quadratic.json"), out); }) == kExitOk);
    std::istringstream csv(slurp(dir / "trajectory.csv"));
    std::string line;
    std::getline(csv, line);
    REQUIRE(line.substr(line.rfind(',') + 1) == "residual");
    double max_res = 0.0, max_f = 0.0;
    while (std::getline(csv, line)) {
        std::vector<double> cols;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cols.push_back(std::stod(cell));
        max_res = std::max(max_res, std::abs(cols.back()));
        max_f = std::max(max_f, std::abs(cols[3]));
    }
    CHECK(max_res <= 1e-6 * (1 + max_f));
}

TEST_CASE("configuration failures exit with 2") {
    const fs::path dir = scratch("bad");
    fs::create_directories(dir);
    std::ofstream(dir / "no_potential.json") << R"({"A": 1.0, "epsilon": 0.05})";
    std::ostringstream out;
    CommonOptions o = options(dir / "out");
    o.config = (dir / "no_potential.json").string();
    std::string err;
    CHECK(run([&] { return cmd_simulate(o, out); }, &err) == kExitConfig);
    CHECK(err.find("potential") != std::string::npos);
    o.config = (dir / "missing.json").string();
    CHECK(run([&] { return cmd_simulate(o, out); }) == kExitConfig);
    CHECK(run([&] { return cmd_simulate(options(dir / "out"), out); }) == kExitConfig);
    CHECK(run([&] { return cmd_sweep(options(dir / "out", "appendix_simulate.json"), out); }) == kExitConfig);
    CHECK(run([&] { return cmd_cost(options(dir / "out"), 1.0, {0.0}, {1.0, 2.0}, std::nullopt, out); }) ==
          kExitConfig);
    CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("emitted cost paths stay inside the output directory") {
    const fs::path dir = scratch("cost");
    std::ostringstream out;
    for (const char* bad : {"../escape.csv", "/tmp/escape.csv", "a/../../escape.csv"})
        CHECK(run([&] { return cmd_cost(options(dir), 1.0, {1.0}, {2.0}, std::string(bad), out); }) == kExitConfig);
    CHECK_FALSE(fs::exists(dir.parent_path() / "escape.csv"));
    REQUIRE(run([&] { return cmd_cost(options(dir), 1.0, {1.0}, {2.0}, std::string("paths/p.csv"), out); }) == kExitOk);
    const Json doc = Json::parse(slurp(dir / "cost.json"));
    CHECK(doc["value"].get<double>() >= std::abs(doc["energy_difference"].get<double>()) - 1e-3);
    CHECK(lines(slurp(dir / "paths" / "p.csv")) > 2);
}

TEST_CASE("critical points of the default problem, deterministically") {
    const fs::path a = scratch("critical_a"), b = scratch("critical_b");
    std::ostringstream out_a, out_b;
    REQUIRE(run([&] { return cmd_critical_points(options(a), 1.0, out_a); }) == kExitOk);
    REQUIRE(run([&] { return cmd_critical_points(options(b), 1.0, out_b); }) == kExitOk);
    CHECK(out_a.str() == out_b.str());
    CHECK(tree(a) == tree(b));
    const Json arr = Json::parse(out_a.str());
    REQUIRE(arr.size() == 4);
    for (const Json& c : arr)
        for (const char* key : {"location", "residual", "eigs", "kind"}) CHECK(c.contains(key));
    CHECK(arr[0]["kind"] == "degenerate");
    CHECK(arr[3]["location"][0].get<double>() == doctest::Approx(9.0));
}

TEST_CASE("heteroclinic command") {
    const fs::path dir = scratch("heteroclinic");
    std::ostringstream out;
    REQUIRE(run([&] { return cmd_heteroclinic(options(dir), 1.0, {0.0}, false, out); }) == kExitOk);
    const Json doc = Json::parse(slurp(dir / "heteroclinic.json"));
    REQUIRE(doc["links"].size() == 1);
    CHECK(doc["links"][0]["to"][0].get<double>() == doctest::Approx(9.0).epsilon(1e-6));
    CHECK(fs::exists(dir / doc["links"][0]["file"].get<std::string>()));
    std::ostringstream out1;
    REQUIRE(run([&] { return cmd_heteroclinic(options(scratch("heteroclinic1")), 1.0, {0.0}, true, out1); }) == kExitOk);
    CHECK(Json::parse(out1.str())["links"][0]["to"][0].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
    std::ostringstream out2;
    CHECK(run([&] { return cmd_heteroclinic(options(scratch("heteroclinic_min")), 1.0, {1.0}, false, out2); }) ==
          kExitNumerical);
}

TEST_CASE("sweep and limit on the quadratic config") {
    const fs::path dir = scratch("quadratic");
    std::ostringstream out;
    REQUIRE(run([&] { return cmd_sweep(options(dir / "sweep", "quadratic.json"), out); }) == kExitOk);
    const Json sweep = Json::parse(slurp(dir / "sweep" / "sweep.json"));
    CHECK(tree(dir / "sweep").size() == 4);
    REQUIRE(run([&] { return cmd_limit(options(dir / "limit", "quadratic.json"), out); }) == kExitOk);
    const Json report = Json::parse(slurp(dir / "limit" / "report.json"));
    CHECK(report["jumps"].empty());
    CHECK(report["balance"]["passed"] == true);
    CHECK(Json::parse(slurp(dir / "limit" / "jumps.json")).empty());
    CHECK(fs::exists(dir / "limit" / "limit.csv"));
}

TEST_CASE("limit exits 1 when a jump does not certify") {
    // The double well's fold releases more dissipation than the drop at the
    // sweep's epsilons, so the atom identity fails honestly.
    const fs::path dir = scratch("double_well");
    std::ostringstream out;
    CHECK(run([&] { return cmd_limit(options(dir, "double_well.json"), out); }) == kExitFailed);
    const Json jumps = Json::parse(slurp(dir / "jumps.json"));
    REQUIRE(jumps.size() == 1);
    CHECK(jumps[0]["t_star"].get<double>() == doctest::Approx(1 + 2 / (3 * std::sqrt(3.0))).epsilon(1e-3));
    CHECK(jumps[0]["u_plus"][0].get<double>() == doctest::Approx(2 / std::sqrt(3.0)).epsilon(1e-6));
    CHECK(jumps[0]["cost_value"].get<double>() == doctest::Approx(jumps[0]["energy_drop"].get<double>()).epsilon(1e-2));
}

TEST_CASE("selftest: a clean subset passes and the gradient fault names its checks") {
    std::ostringstream a, b;
    SelftestOptions st;
    st.groups = {"algebra", "derivatives", "gradient"};
    CHECK(run([&] { return cmd_selftest(options(scratch("st")), st, a); }) == kExitOk);
    CHECK(run([&] { return cmd_selftest(options(scratch("st")), st, b); }) == kExitOk);
    CHECK(a.str() == b.str());
    st.groups = {"derivatives"};
    st.inject_fault = "gradient";
    std::ostringstream f;
    CHECK(run([&] { return cmd_selftest(options(scratch("st")), st, f); }) == kExitFailed);
    CHECK(f.str().find("FAIL derivatives.appendix.grad") != std::string::npos);
    st.inject_fault = "hessian";
    CHECK(run([&] { return cmd_selftest(options(scratch("st")), st, f); }) == kExitConfig);
}

TEST_CASE("appendix demo is byte-identical across runs") {
    const fs::path a = scratch("demo_a"), b = scratch("demo_b");
    std::ostringstream out;
    CHECK(run([&] { return cmd_appendix_demo(options(a), out); }) == kExitOk);
    CHECK(run([&] { return cmd_appendix_demo(options(b), out); }) == kExitOk);
    const auto ta = tree(a), tb = tree(b);
    CHECK(ta.size() == 6);
    CHECK(ta == tb);
    const Json s = Json::parse(ta.at("summary.json"));
    CHECK(std::abs(s["first_order_jump_target"].get<double>() - 1.0) <= 1e-3);
    CHECK(std::abs(s["second_order_jump_target"].get<double>() - 9.0) <= 1e-3);
    CHECK(ta.at("summary.txt").find("jumps from 0 to 9") != std::string::npos);
}
