#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <cstdlib>
#include <fstream>

#include "sheetsew/experiment.hpp"

using namespace sheetsew;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name)
{
    auto dir = fs::temp_directory_path() / "sheetsew_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("validate flags bad configs")
{
    // H out of range
    json doc = {{"experiment", "lnd"},
                {"params",
                 {{"model", {{"kind", "fractional_sheet"}, {"H", {1.2, 0.5}}}},
                  {"zeta", {0.5, 0.5}}}}};
    auto v = validate(ExperimentConfig::parse(doc));
    REQUIRE_FALSE(v.empty());
    CHECK(v.front().find("H_i must lie in (0,1)") != std::string::npos);

    // grid above the sampler limit
    json big = {{"experiment", "sample"}, {"params", {{"grid_level", 12}, {"route", "dense"}}}};
    auto v2 = validate(ExperimentConfig::parse(big));
    REQUIRE_FALSE(v2.empty());
    CHECK(v2.front().find("sampler limit") != std::string::npos);

    // alpha above the admissible bound, citing the inequality
    json alpha = {{"experiment", "localtime"},
                  {"params", {{"alpha", 0.9}, {"zeta", {0.5, 0.5}}}}};
    auto v3 = validate(ExperimentConfig::parse(alpha));
    REQUIRE_FALSE(v3.empty());
    CHECK(v3.front().find("alpha < sum 1/(2 zeta_i) - n/2") != std::string::npos);

    // unknown experiment
    json nope = {{"experiment", "frobnicate"}};
    CHECK_FALSE(validate(ExperimentConfig::parse(nope)).empty());

    // a clean config has no violations
    json ok = {{"experiment", "lnd"},
               {"params",
                {{"model", {{"kind", "fractional_sheet"}, {"H", {0.5, 0.5}}}},
                 {"zeta", {0.5, 0.5}}}}};
    CHECK(validate(ExperimentConfig::parse(ok)).empty());
}

TEST_CASE("algebra selftest passes and serializes")
{
    auto dir = scratch("selftest");
    json doc = {{"experiment", "algebra-selftest"},
                {"seed", 7},
                {"out", dir.string()},
                {"params", {{"checks", 500}}}};
    auto cfg = ExperimentConfig::parse(doc);
    cfg.check_mode = true;
    auto res = run(cfg);
    CHECK(res.check_passed);
    CHECK(res.summary.at("all_passed").get<bool>());
    CHECK(fs::exists(dir / "algebra_selftest.json"));
    CHECK(fs::exists(dir / "manifest.json"));
    CHECK(fs::exists(dir / "config.json"));

    auto manifest = json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest.at("config_hash").get<std::uint64_t>() == cfg.config_hash());
    CHECK(manifest.at("version").get<std::string>() == kToolVersion);
}

TEST_CASE("sample experiment is byte-identical across reruns")
{
    json base = {{"experiment", "sample"},
                 {"seed", 99},
                 {"params",
                  {{"model", {{"kind", "fractional_sheet"}, {"H", {0.7, 0.3}}}},
                   {"grid_level", 3},
                   {"count", 2}}}};

    auto dir1 = scratch("sample1");
    auto dir2 = scratch("sample2");
    base["out"] = dir1.string();
    run(ExperimentConfig::parse(base));
    base["out"] = dir2.string();
    run(ExperimentConfig::parse(base));

    for (const char* name : {"field_sample_0.csv", "field_sample_1.csv"}) {
        const auto a = slurp(dir1 / name), b = slurp(dir2 / name);
        CHECK(a == b);
        CHECK(a.find("# model=") == 0);
        CHECK(a.find("i1,i2,t1,t2,comp,value") != std::string::npos);
    }
}

TEST_CASE("lnd experiment emits the report and is worker-invariant")
{
    json doc = {{"experiment", "lnd"},
                {"seed", 5},
                {"samples", 20},
                {"params",
                 {{"model", {{"kind", "fractional_sheet"}, {"H", {0.5, 0.5}}}},
                  {"notion", "multiplicative"},
                  {"zeta", {0.5, 0.5}},
                  {"level", 3}}},
                {"check", {{"min_c_hat", 0.2}}}};

    auto dir1 = scratch("lnd1");
    doc["out"] = dir1.string();
    doc["workers"] = 1;
    auto cfg1 = ExperimentConfig::parse(doc);
    cfg1.check_mode = true;
    auto res1 = run(cfg1);
    CHECK(res1.check_passed);

    auto dir2 = scratch("lnd2");
    doc["out"] = dir2.string();
    doc["workers"] = 2;
    auto res2 = run(ExperimentConfig::parse(doc));

    auto r1 = json::parse(slurp(dir1 / "lnd_report.json"));
    auto r2 = json::parse(slurp(dir2 / "lnd_report.json"));
    CHECK(r1.at("c_hat") == r2.at("c_hat"));
    CHECK(r1.at("pairs_tested") == r2.at("pairs_tested"));
    CHECK(r1.at("c_hat").get<double>() > 0.2);
}

TEST_CASE("solve experiment reproduces the series and exports the solution")
{
    auto dir = scratch("solve");
    json doc = {{"experiment", "solve"},
                {"out", dir.string()},
                {"params",
                 {{"b", {{"kind", "linear"}, {"lambda", 1.0}}},
                  {"x0", 1.0},
                  {"level", 5},
                  {"mode", "direct"},
                  {"order", 4},
                  {"regularization",
                   {{"rho", 2.0}, {"zeta", {0.25, 0.25}}, {"n", 1}, {"notion", "additive"}}}}},
                {"check", {{"series_tol", 1e-6}}}};
    auto cfg = ExperimentConfig::parse(doc);
    cfg.check_mode = true;
    auto res = run(cfg);
    CHECK(res.check_passed);
    CHECK(res.summary.at("series_deviation").get<double>() <= 1e-6);
    CHECK(res.summary.at("regularization").at("satisfied").get<bool>());
    CHECK(res.summary.at("regularization").at("margin").get<double>() == Catch::Approx(2.5));

    const auto csv = slurp(dir / "solution.csv");
    CHECK(csv.rfind("t1,t2,comp,y\n", 0) == 0);
    CHECK(fs::exists(dir / "picard_log.json"));
}

TEST_CASE("invalid configs are rejected by run() with a validation error")
{
    json doc = {{"experiment", "lnd"},
                {"params",
                 {{"model", {{"kind", "fractional_sheet"}, {"H", {1.5, 0.5}}}},
                  {"zeta", {0.5, 0.5}}}}};
    CHECK_THROWS_AS(run(ExperimentConfig::parse(doc)), std::invalid_argument);
}

#ifdef SHEETSEW_CLI_PATH
TEST_CASE("CLI exit codes")
{
    const std::string cli = SHEETSEW_CLI_PATH;
    auto dir = scratch("cli");
    auto cfg = dir / "cfg.json";

    // ok run
    {
        std::ofstream os(cfg);
        os << R"({"params": {"checks": 200}})";
    }
    std::string cmd = cli + " algebra-selftest --config " + cfg.string() + " --out " +
                      (dir / "ok").string() + " --check > /dev/null 2>&1";
    CHECK(std::system(cmd.c_str()) == 0);

    // validation failure: H out of range
    {
        std::ofstream os(cfg);
        os << R"({"params": {"model": {"kind": "fractional_sheet", "H": [1.5, 0.5]},
                  "zeta": [0.5, 0.5]}})";
    }
    cmd = cli + " lnd --config " + cfg.string() + " --out " + (dir / "bad").string() +
          " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(rc) == 1);

    // acceptance-check failure: impossible c_hat floor
    {
        std::ofstream os(cfg);
        os << R"({"samples": 10,
                  "params": {"model": {"kind": "fractional_sheet", "H": [0.5, 0.5]},
                             "notion": "additive", "zeta": [0.5, 0.5], "level": 3},
                  "check": {"min_c_hat": 1e9}})";
    }
    cmd = cli + " lnd --config " + cfg.string() + " --out " + (dir / "chk").string() +
          " --check > /dev/null 2>&1";
    const int rc3 = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(rc3) == 3);
}
#endif

TEST_CASE("band-limited nonlinearities are gated by the regularization condition")
{
    json doc = {{"experiment", "solve"},
                {"params",
                 {{"b", {{"kind", "band_limited"}, {"rho", 0.0}}},
                  {"regularization",
                   {{"zeta", {0.5, 0.5}}, {"n", 1}, {"notion", "multiplicative"}}}}}};
    auto v = validate(ExperimentConfig::parse(doc));
    REQUIRE_FALSE(v.empty());
    CHECK(v.front().find("regularization condition unsatisfied") != std::string::npos);

    doc["params"]["b"]["rho"] = 3.0;
    doc["params"]["regularization"]["zeta"] = {0.25, 0.25};
    doc["params"]["regularization"]["notion"] = "additive";
    CHECK(validate(ExperimentConfig::parse(doc)).empty());

    json missing = {{"experiment", "solve"},
                    {"params", {{"b", {{"kind", "band_limited"}, {"rho", 3.0}}}}}};
    CHECK_FALSE(validate(ExperimentConfig::parse(missing)).empty());
}

#ifdef SHEETSEW_CONFIG_DIR
TEST_CASE("shipped experiment configs validate and run")
{
    const fs::path cdir = SHEETSEW_CONFIG_DIR;
    const std::vector<std::pair<std::string, std::string>> table{
        {"algebra_selftest.json", "algebra-selftest"},
        {"fbs_sample.json", "sample"},
        {"lnd_multiplicative.json", "lnd"},
        {"lnd_boundary_falsification.json", "lnd"},
        {"lnd_boundary_augmented.json", "lnd"},
        {"sew_exponential.json", "sew"},
        {"bdg_stability.json", "bdg"},
        {"bdg_biased.json", "bdg"},
        {"occupation_decay.json", "occupation"},
        {"localtime.json", "localtime"},
        {"solve_goursat.json", "solve"},
        {"solve_smooth.json", "solve"}};
    for (const auto& [file, experiment] : table) {
        auto doc = json::parse(slurp(cdir / file));
        doc["experiment"] = experiment;
        INFO(file);
        CHECK(validate(ExperimentConfig::parse(doc)).empty());
    }

    // run the quick ones end to end with their shipped check blocks
    for (const auto& [file, experiment] :
         {std::pair{std::string("lnd_boundary_falsification.json"), std::string("lnd")},
          std::pair{std::string("solve_goursat.json"), std::string("solve")}}) {
        auto doc = json::parse(slurp(cdir / file));
        doc["experiment"] = experiment;
        doc["out"] = (scratch("cfg_" + experiment)).string();
        auto cfg = ExperimentConfig::parse(doc);
        cfg.check_mode = true;
        INFO(file);
        CHECK(run(cfg).check_passed);
    }
}
#endif
