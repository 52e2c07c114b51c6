#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "doctest.h"

#include "bprelab/errors.hpp"
#include "bprelab/io.hpp"
#include "bprelab/runner.hpp"

#include "json.hpp"

using namespace bprelab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "bprelab_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const json& cfg) {
    const fs::path file = dir / "config.json";
    std::ofstream(file) << cfg.dump(2) << "\n";
    return file;
}

json quarter_env() {
    return {{"kind", "iid"},
            {"states", {{{"family", "binary"}, {"p0", 0.25}, {"k", 2}}}}};
}

json doubling_env() {
    return {{"kind", "iid"},
            {"states", {{{"family", "binary"}, {"p0", 0.0}, {"k", 2}}}}};
}

json halving_env() {
    // strictly subcritical: mean 1/2
    return {{"kind", "iid"},
            {"states", {{{"family", "explicit"},
                         {"pmf", {{"0", 0.5}, {"1", 0.5}}}}}}};
}

int guarded(const std::string& cmd, const fs::path& cfg_file, const CliOverrides& over,
            std::string* err_text = nullptr) {
    std::ostringstream log, err;
    const int rc = run_command_guarded(cmd, cfg_file, over, log, err);
    if (err_text) *err_text = err.str();
    return rc;
}

int run_cli(const std::string& args, const fs::path& capture_dir) {
    const std::string cmd = std::string(BPRELAB_CLI_PATH) + " " + args + " > " +
                            (capture_dir / "stdout.txt").string() + " 2> " +
                            (capture_dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config accessors and validation") {
    CliOverrides none;
    CHECK_THROWS_AS(RunConfig::from_json(json{{"tol", 0.1}}, none), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json::array(), none), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"seed", 1}, {"bogus", 2}}, none), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"seed", 1}, {"threads", -2}}, none), ConfigError);

    try {
        RunConfig::from_json(json{{"seed", 1}, {"bogus", 2}}, none);
        FAIL("expected rejection");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("bogus") != std::string::npos);
    }

    const auto cfg = RunConfig::from_json(
        json{{"seed", 3}, {"tol", 0.5}, {"threads", 8}, {"out", "somewhere"}}, none);
    CHECK(cfg.seed() == 3);
    CHECK(cfg.threads() == 8);
    CHECK(cfg.out_dir() == fs::path("somewhere"));
    CHECK(cfg.num("tol", 1.0) == 0.5);
    CHECK(cfg.num("horizon", 30.0) == 30.0);
    CHECK_FALSE(cfg.has_environment());
    CHECK_THROWS_AS(cfg.environment(), ConfigError);

    const auto echo = cfg.echo();
    CHECK(echo.contains("seed"));
    CHECK(echo.contains("tol"));
    CHECK_FALSE(echo.contains("threads"));
    CHECK_FALSE(echo.contains("out"));
}

TEST_CASE("overrides merge over the file") {
    CliOverrides over;
    over.seed = 9;
    over.threads = 2;
    over.out = "elsewhere";
    over.numeric.push_back({"horizon", 12.0});
    const auto cfg = RunConfig::from_json(json{{"horizon", 40}}, over);
    CHECK(cfg.seed() == 9);
    CHECK(cfg.threads() == 2);
    CHECK(cfg.out_dir() == fs::path("elsewhere"));
    CHECK(cfg.num("horizon", 0.0) == 12.0);

    CliOverrides bad;
    bad.seed = 1;
    bad.numeric.push_back({"bogus", 1.0});
    CHECK_THROWS_AS(RunConfig::from_json(json::object(), bad), ConfigError);
}

TEST_CASE("malformed json reports its location") {
    const auto dir = scratch("badjson");
    const auto file = dir / "config.json";
    std::ofstream(file) << "{ \"seed\": 1, }";
    try {
        RunConfig::from_file(file, CliOverrides{});
        FAIL("expected rejection");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line") != std::string::npos);
    }
    CHECK_THROWS_AS(RunConfig::from_file(dir / "missing.json", CliOverrides{}), ConfigError);
}

TEST_CASE("classify writes a readable report") {
    const auto dir = scratch("classify");
    const auto file = write_config(
        dir, json{{"environment", quarter_env()}, {"seed", 11}, {"out", (dir / "out").string()},
                  {"ks_samples", 20000}});
    CHECK(guarded("classify", file, CliOverrides{}) == kExitOk);
    const auto j = json::parse(std::ifstream(dir / "out" / "classify.json"));
    CHECK(j["format_version"] == kFormatVersion);
    CHECK(j["mu"].get<double>() == doctest::Approx(std::log(1.5)).epsilon(1e-12));
    CHECK(j["supercritical"] == true);
    CHECK(j["kesten_stigum"].get<double>() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(j["nonextin_ok"] == true);
    CHECK_FALSE(j["config"].contains("threads"));
}

TEST_CASE("simulate artifacts are byte-identical across thread counts") {
    const auto dir = scratch("simulate");
    const json base = {{"environment", quarter_env()}, {"seed", 33},
                       {"horizon", 10}, {"replicas", 2000}};
    const auto file = write_config(dir, base);

    for (int threads : {1, 4}) {
        CliOverrides over;
        over.threads = threads;
        over.out = (dir / ("t" + std::to_string(threads))).string();
        CHECK(guarded("simulate", file, over) == kExitOk);
    }
    for (const char* name : {"replicas.csv", "extinction.csv", "summary.json"}) {
        const auto a = read_text_file(dir / "t1" / name);
        const auto b = read_text_file(dir / "t4" / name);
        CHECK(a == b);
        CHECK_FALSE(a.empty());
    }
    const auto j = json::parse(std::ifstream(dir / "t1" / "summary.json"));
    CHECK(j["count"] == 2000);
    CHECK(std::abs(j["mean"].get<double>() - 1.0) < 5.0 * j["se_mean"].get<double>());
    CHECK(j["extinction"]["prob"].get<double>() ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-8));
}

TEST_CASE("charfn produces a grid and bound report") {
    const auto dir = scratch("charfn");
    const auto file = write_config(
        dir, json{{"environment", doubling_env()}, {"seed", 2}, {"out", (dir / "out").string()},
                  {"T", 2.0}, {"dt", 0.1}, {"horizon", 10}, {"replicas", 4000}});
    CHECK(guarded("charfn", file, CliOverrides{}) == kExitOk);
    const auto csv = read_text_file(dir / "out" / "charfn.csv");
    CHECK(csv.rfind("# format_version=1", 0) == 0);
    CHECK(csv.find("t,psi_re,psi_im,psi_abs,depth") != std::string::npos);
    const auto j = json::parse(std::ifstream(dir / "out" / "bound_report.json"));
    CHECK(j["grid"]["T"] == 2.0);
    // degenerate doubling never loses modulus
    CHECK(j["bounds"]["rho_hat"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("tail seed refusal distinguishes exit codes") {
    const auto dir = scratch("refusal");
    const auto file = write_config(
        dir, json{{"environment", halving_env()}, {"seed", 4}, {"out", (dir / "out").string()},
                  {"T", 2.0}, {"dt", 0.1}});
    std::string err;
    CHECK(guarded("charfn", file, CliOverrides{}, &err) == kExitRefusal);
    CHECK(err.find("refused:") != std::string::npos);

    // an explicit tail mean overrides the refusal, but the decaying means then
    // leave no adequate recursion depth: that is a configuration error
    const auto file2 = write_config(
        dir, json{{"environment", halving_env()}, {"seed", 4}, {"out", (dir / "out").string()},
                  {"T", 2.0}, {"dt", 0.1}, {"w_mean_tail", 1.0}});
    CHECK(guarded("charfn", file2, CliOverrides{}, &err) == kExitConfig);

    CHECK(guarded("nonsense", file, CliOverrides{}, &err) == kExitConfig);
}

TEST_CASE("verify passes on the quarter environment") {
    const auto dir = scratch("verify");
    const auto file = write_config(
        dir, json{{"environment", quarter_env()}, {"seed", 5}, {"out", (dir / "out").string()},
                  {"replicas", 50000}, {"horizon", 12}, {"h_dists", 200}});
    CHECK(guarded("verify", file, CliOverrides{}) == kExitOk);
    const auto j = json::parse(std::ifstream(dir / "out" / "verify.json"));
    CHECK(j["all_ok"] == true);
    REQUIRE(j["checks"].size() == 5);
    for (const auto& row : j["checks"]) {
        CHECK((row["status"] == "pass" || row["status"] == "vacuous"));
    }
    CHECK(fs::exists(dir / "out" / "verify.csv"));
}

TEST_CASE("cli round trip") {
    const auto dir = scratch("cli");
    const auto file = write_config(
        dir, json{{"environment", quarter_env()}, {"seed", 21}, {"ks_samples", 5000}});
    const auto out = dir / "out";

    CHECK(run_cli("classify --config " + file.string() + " --out " + out.string(), dir) == 0);
    CHECK(fs::exists(out / "classify.json"));

    CHECK(run_cli("classify", dir) == kExitConfig);  // --config is required

    const auto bad = dir / "bad.json";
    std::ofstream(bad) << "{\"seed\": 1, \"bogus\": true}";
    CHECK(run_cli("classify --config " + bad.string() + " --out " + out.string(), dir) ==
          kExitConfig);
    const auto err = read_text_file(dir / "stderr.txt");
    CHECK(err.find("config error:") != std::string::npos);

    CHECK(run_cli("classify --config " + file.string() + " --out " + out.string() +
                      " --set bogus=1",
                  dir) == kExitConfig);

    const auto bcfg = dir / "bernoulli.json";
    std::ofstream(bcfg) << json{{"seed", 6}, {"lambda", 0.5}, {"t_max", 8.0},
                                {"particles", 2000}, {"iterations", 12}, {"depth", 6}}
                               .dump();
    CHECK(run_cli("bernoulli --config " + bcfg.string() + " --out " + (dir / "bout").string(),
                  dir) == 0);
    CHECK(fs::exists(dir / "bout" / "bernoulli.json"));
    CHECK(fs::exists(dir / "bout" / "decay.csv"));
    CHECK_FALSE(fs::exists(dir / "bout" / "particles.csv"));
}
