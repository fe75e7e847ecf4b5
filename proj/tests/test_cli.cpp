#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cmfg/cli.hpp"
#include "cmfg/config.hpp"
#include "doctest.h"

using namespace cmfg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("cmfg_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const auto p = dir / "run.cfg";
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct CaptureErr {
    std::ostringstream buf;
    std::streambuf* old = std::cerr.rdbuf(buf.rdbuf());
    ~CaptureErr() { std::cerr.rdbuf(old); }
};

const char* kVerify = R"(grid {
  dim = 1
  nx = 41
  nt = 81
}
)";

const char* kLipschitz = R"(grid {
  dim = 1
  nx = 21
  nt = 41
}
coefficients {
  seed = 3
}
experiment {
  seed = 5
}
)";

}  // namespace

TEST_CASE("config parsing") {
    const auto c = Config::parse("a {\n  x = 1.5  # note\n  l = [1, 2e-3]\n  g = 1, 2; 3, 4\n}\nb {\n}\n");
    CHECK(c.number("a", "x") == 1.5);
    CHECK(c.number("b", "y", 7.0) == 7.0);
    CHECK(c.numbers("a", "l") == std::vector<double>{1.0, 2e-3});
    CHECK(c.groups("a", "g", {}) == std::vector<std::vector<double>>{{1, 2}, {3, 4}});
    c.check_consumed();
    CHECK(c.resolved() == "a {\n  g = 1, 2; 3, 4\n  l = 1, 0.002\n  x = 1.5\n}\nb {\n  y = 7\n}\n");

    CHECK_THROWS_AS(Config::parse("x = 1\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("a {\nb {\n}\n}\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("a {\nx = 1\nx = 2\n}\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("a {\nx = 1\n"), ConfigError);
    const auto d = Config::parse("a {\n  x = one\n  z = 2\n}\n");
    CHECK_THROWS_AS(d.number("a", "x"), ConfigError);
    CHECK_THROWS_AS(d.check_consumed(), ConfigError);
    CHECK_THROWS_AS(d.integer("a", "missing"), ConfigError);
}

TEST_CASE("number formatting and hashing") {
    CHECK(format_sci(0.1) == "1.0000000000e-01");
    CHECK(format_sci(-0.0) == "0.0000000000e+00");
    CHECK(format_exact(0.1) == "0.1");
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("verify on the default config exits 0 with every check passing") {
    const auto dir = scratch("verify");
    const auto cfg = write_config(dir, kVerify);
    REQUIRE(run_subcommand("verify", cfg.string(), (dir / "out").string(), 1) == kExitOk);
    const auto csv = slurp(dir / "out" / "report.csv");
    CHECK(csv.rfind("# schema_version=1 subcommand=verify seed=1 config_hash=", 0) == 0);
    CHECK(csv.find(",false") == std::string::npos);
    CHECK(slurp(dir / "out" / "report.json").rfind("{\"header\": {\"schema_version\":1", 0) == 0);
    CHECK(slurp(dir / "out" / "resolved_config.txt").rfind("# schema_version=1", 0) == 0);
}

TEST_CASE("missing grid block exits 1 and names it") {
    const auto dir = scratch("nogrid");
    const auto cfg = write_config(dir, "weights {\n  s = 1\n}\n");
    CaptureErr err;
    CHECK(run_subcommand("verify", cfg.string(), (dir / "out").string(), 1) == kExitValidation);
    CHECK(err.buf.str().find("grid") != std::string::npos);
}

TEST_CASE("validation and io exit codes") {
    const auto dir = scratch("codes");
    CaptureErr err;
    CHECK(run_subcommand("verify", (dir / "absent.cfg").string(), (dir / "out").string(), 1) == kExitIo);
    auto cfg = write_config(dir, std::string(kVerify) + "extra {\n  k = 1\n}\n");
    CHECK(run_subcommand("verify", cfg.string(), (dir / "out").string(), 1) == kExitValidation);
    CHECK(err.buf.str().find("extra.k") != std::string::npos);
    cfg = write_config(dir, kVerify);
    CHECK(run_subcommand("nonsense", cfg.string(), (dir / "out").string(), 1) == kExitValidation);
    CHECK(run_subcommand("verify", cfg.string(), (dir / "out").string(), 0) == kExitValidation);
    std::ofstream(dir / "file") << "x";
    CHECK(run_subcommand("verify", cfg.string(), (dir / "file" / "out").string(), 1) == kExitIo);
    // D not below M.
    cfg = write_config(dir, "grid {\n nx = 21\n nt = 41\n}\ncoefficients {\n kind = zero\n}\nexperiment {\n M = 0.05\n}\n");
    CHECK(run_subcommand("holder", cfg.string(), (dir / "out").string(), 1) == kExitValidation);
}

TEST_CASE("re-runs are byte identical, also across thread counts") {
    const auto dir = scratch("repeat");
    const auto cfg = write_config(dir, kLipschitz);
    REQUIRE(run_subcommand("lipschitz", cfg.string(), (dir / "a").string(), 1) == kExitOk);
    REQUIRE(run_subcommand("lipschitz", cfg.string(), (dir / "b").string(), 1) == kExitOk);
    REQUIRE(run_subcommand("lipschitz", cfg.string(), (dir / "c").string(), 3) == kExitOk);
    for (const char* f : {"report.csv", "report.json", "resolved_config.txt"}) {
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
        CHECK(slurp(dir / "a" / f) == slurp(dir / "c" / f));
    }
    CHECK(slurp(dir / "a" / "report.csv").find("seed=5") != std::string::npos);
}

TEST_CASE("resolved config reproduces the run") {
    const auto dir = scratch("resolved");
    const auto cfg = write_config(dir, kLipschitz);
    REQUIRE(run_subcommand("lipschitz", cfg.string(), (dir / "a").string(), 1) == kExitOk);
    const auto again = dir / "a" / "resolved_config.txt";
    REQUIRE(run_subcommand("lipschitz", again.string(), (dir / "b").string(), 1) == kExitOk);
    CHECK(slurp(dir / "a" / "report.csv") == slurp(dir / "b" / "report.csv"));
    CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));
}
